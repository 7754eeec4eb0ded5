//! File formats.
//!
//! Rank tables are CSV with header `rank,count,frequency`, ranks ascending
//! from 1, LF line endings and an empty `count` field when the table has no
//! counts. Block tables are CSV with header
//! `k,width,width_real,frequency,first_rank,last_rank,tokens`. Real numbers
//! in CSV and JSON are written with 17 significant digits in scientific
//! form (`{:.16e}`), which round-trips every `f64`.
//!
//! Compact token files start with a 16-byte header: the magic `LXZTOKS\0`,
//! the format version as u32 LE (currently 1) and the alphabet size `m` as
//! u32 LE. Each token follows as its length `k` (u32 LE), a byte count `n`
//! (u8) and `n` bytes of its 1-based class index, little-endian with no
//! trailing zero bytes.

use std::io::{self, BufRead, Read, Write};

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::generator::{TypeId, TypeIndex};
use crate::table::{big_to_f64, BlockTable, PendingBlock, Provenance, RankFrequencyTable, TableError};

pub const RANK_HEADER: [&str; 3] = ["rank", "count", "frequency"];
pub const BLOCK_HEADER: [&str; 7] = [
    "k",
    "width",
    "width_real",
    "frequency",
    "first_rank",
    "last_rank",
    "tokens",
];
pub const TOKEN_MAGIC: [u8; 8] = *b"LXZTOKS\0";
pub const TOKEN_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("expected header '{expected}', found '{found}'")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("not a compact token file")]
    BadMagic,
    #[error("unsupported token file version {0}")]
    UnsupportedVersion(u32),
    #[error("token file ends inside a record")]
    Truncated,
    #[error(transparent)]
    Table(#[from] TableError),
}

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), FormatError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(FormatError::BadHeader {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn row_err(rec: &csv::StringRecord, message: impl Into<String>) -> FormatError {
    FormatError::BadRow {
        line: rec.position().map_or(0, |p| p.line()),
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, FormatError> {
    let raw = rec.get(i).ok_or_else(|| row_err(rec, format!("missing {name}")))?;
    raw.parse().map_err(|_| row_err(rec, format!("bad {name} '{raw}'")))
}

pub fn write_rank_csv<W: Write>(table: &RankFrequencyTable, w: W) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(RANK_HEADER)?;
    for e in table.iter() {
        let count = e.count.map(|c| c.to_string()).unwrap_or_default();
        out.write_record([e.rank.to_string(), count, fmt_f64(e.frequency)])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a rank CSV. With every count present the table is rebuilt from the
/// counts; otherwise from the frequencies.
pub fn read_rank_csv<R: Read>(r: R) -> Result<RankFrequencyTable, FormatError> {
    let mut input = csv::Reader::from_reader(r);
    check_header(input.headers()?, &RANK_HEADER)?;
    let mut counts = Vec::new();
    let mut freqs = Vec::new();
    let mut all_counts = true;
    for rec in input.records() {
        let rec = rec?;
        let rank: u64 = field(&rec, 0, "rank")?;
        if rank != freqs.len() as u64 + 1 {
            return Err(row_err(&rec, format!("rank {rank} out of sequence")));
        }
        match rec.get(1) {
            Some("") | None => all_counts = false,
            Some(_) => counts.push(field::<u64>(&rec, 1, "count")?),
        }
        freqs.push(field::<f64>(&rec, 2, "frequency")?);
    }
    if all_counts && !counts.is_empty() {
        Ok(RankFrequencyTable::from_sorted_counts(counts, Provenance::Empirical)?)
    } else {
        Ok(RankFrequencyTable::from_frequencies(freqs, Provenance::Analytic)?)
    }
}

pub fn write_blocks_csv<W: Write>(blocks: &BlockTable, w: W) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(BLOCK_HEADER)?;
    for b in &blocks.blocks {
        out.write_record([
            b.k.to_string(),
            b.width.to_string(),
            fmt_f64(b.width_real),
            fmt_f64(b.frequency),
            b.first_rank.to_string(),
            b.last_rank.to_string(),
            b.tokens.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a block CSV back into a table. Rank ranges are recomputed and must
/// match the file.
pub fn read_blocks_csv<R: Read>(r: R) -> Result<BlockTable, FormatError> {
    let mut input = csv::Reader::from_reader(r);
    check_header(input.headers()?, &BLOCK_HEADER)?;
    let mut pending = Vec::new();
    let mut ranges = Vec::new();
    let mut simulated = false;
    for rec in input.records() {
        let rec = rec?;
        let tokens = match rec.get(6) {
            Some("") | None => None,
            Some(_) => Some(field::<u64>(&rec, 6, "tokens")?),
        };
        simulated |= tokens.is_some();
        pending.push(PendingBlock {
            k: field(&rec, 0, "k")?,
            width: field::<BigUint>(&rec, 1, "width")?,
            width_real: field(&rec, 2, "width_real")?,
            frequency: field(&rec, 3, "frequency")?,
            tokens,
        });
        ranges.push((
            rec.clone(),
            field::<BigUint>(&rec, 4, "first_rank")?,
            field::<BigUint>(&rec, 5, "last_rank")?,
        ));
    }
    let provenance = if simulated {
        Provenance::Simulated
    } else {
        Provenance::Analytic
    };
    let mass: f64 = pending.iter().map(|b| big_to_f64(&b.width) * b.frequency).sum();
    let table = BlockTable::assemble(pending, provenance, 1.0, 0.0, (1.0 - mass).max(0.0));
    if table.blocks.len() != ranges.len() {
        return Err(FormatError::BadRow {
            line: 0,
            message: "blocks of zero width".into(),
        });
    }
    for (b, (rec, first, last)) in table.blocks.iter().zip(&ranges) {
        if &b.first_rank != first || &b.last_rank != last {
            return Err(row_err(rec, "rank range does not follow from the widths"));
        }
    }
    Ok(table)
}

/// Series of `(rank_midpoint, mean_frequency)` points as CSV with header
/// `series,rank_midpoint,mean_frequency`.
pub fn write_curves_csv<W: Write>(series: &[(&str, &[(f64, f64)])], w: W) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(["series", "rank_midpoint", "mean_frequency"])?;
    for (name, points) in series {
        for &(x, y) in points.iter() {
            out.write_record([name.to_string(), fmt_f64(x), fmt_f64(y)])?;
        }
    }
    out.flush()?;
    Ok(())
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON, one document per line, with 17 significant digits for
/// every real number. Non-finite numbers become `null`.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String, FormatError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub struct TokenWriter<W: Write> {
    out: W,
}

impl<W: Write> TokenWriter<W> {
    pub fn new(mut out: W, m: u32) -> io::Result<Self> {
        out.write_all(&TOKEN_MAGIC)?;
        out.write_all(&TOKEN_VERSION.to_le_bytes())?;
        out.write_all(&m.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn write(&mut self, id: &TypeId) -> io::Result<()> {
        let bytes = id.index.to_bytes_le();
        let n = u8::try_from(bytes.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "index wider than 255 bytes"))?;
        self.out.write_all(&id.length.to_le_bytes())?;
        self.out.write_all(&[n])?;
        self.out.write_all(&bytes)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Iterates the tokens of a compact token file.
pub struct TokenReader<R: BufRead> {
    input: R,
    m: u32,
}

impl<R: BufRead> TokenReader<R> {
    pub fn new(mut input: R) -> Result<Self, FormatError> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FormatError::BadMagic,
            _ => e.into(),
        })?;
        if header[..8] != TOKEN_MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
        if version != TOKEN_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let m = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes"));
        Ok(Self { input, m })
    }

    pub fn alphabet_size(&self) -> u32 {
        self.m
    }

    fn next_token(&mut self) -> Result<Option<TypeId>, FormatError> {
        if self.input.fill_buf()?.is_empty() {
            return Ok(None);
        }
        let truncated = |e: io::Error| match e.kind() {
            io::ErrorKind::UnexpectedEof => FormatError::Truncated,
            _ => e.into(),
        };
        let mut head = [0u8; 5];
        self.input.read_exact(&mut head).map_err(truncated)?;
        let length = u32::from_le_bytes(head[..4].try_into().expect("4 bytes"));
        let mut idx = vec![0u8; head[4] as usize];
        self.input.read_exact(&mut idx).map_err(truncated)?;
        Ok(Some(TypeId {
            length,
            index: TypeIndex::from_biguint(BigUint::from_bytes_le(&idx)),
        }))
    }
}

impl<R: BufRead> Iterator for TokenReader<R> {
    type Item = Result<TypeId, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_token().transpose()
    }
}
