//! Truncated and infinite sums of `n^-s` and `ln(n) n^-s` over integer
//! ranges, via a direct head plus an Euler-Maclaurin tail. With an infinite
//! upper end the first sum is the Hurwitz zeta function `zeta(s, lo)` and
//! the second is `-d/ds zeta(s, lo)`.

/// `B_2j / (2j)!` for j = 1..=6.
const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
];

/// `(S0, S1) = (sum n^-s, sum ln(n) n^-s)` for `n` in `lo..=hi`, or
/// `lo..` when `hi` is `None` (which requires `s > 1`).
pub fn power_sums(s: f64, lo: u64, hi: Option<u64>) -> (f64, f64) {
    debug_assert!(lo >= 1);
    debug_assert!(hi.is_some() || s > 1.0);
    // The asymptotic tail is accurate once the start is well above s.
    let head = 10u64.max((2.0 * s).ceil() as u64);
    let direct_end = match hi {
        Some(h) if h - lo.min(h) <= 2 * head => h,
        _ => lo + head - 1,
    };
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for n in lo..=direct_end {
        let x = n as f64;
        let p = x.powf(-s);
        s0 += p;
        s1 += x.ln() * p;
    }
    if hi == Some(direct_end) {
        return (s0, s1);
    }
    let a = (direct_end + 1) as f64;
    let (t0, t1) = tail_sums(s, a, hi.map(|h| h as f64));
    (s0 + t0, s1 + t1)
}

/// Euler-Maclaurin for `sum_{n=a}^{b}` with `a` large relative to `s`.
fn tail_sums(s: f64, a: f64, b: Option<f64>) -> (f64, f64) {
    let (i0, i1) = integrals(s, a, b);
    let mut t0 = i0 + 0.5 * a.powf(-s);
    let mut t1 = i1 + 0.5 * a.ln() * a.powf(-s);
    if let Some(b) = b {
        t0 += 0.5 * b.powf(-s);
        t1 += 0.5 * b.ln() * b.powf(-s);
    }
    // f^(n)(x) = (-1)^n (s)_n x^(-s-n) and for ln(x) x^-s the n-th
    // derivative is (-1)^n x^(-s-n) ((s)_n ln x - d/ds (s)_n).
    let mut rising = 1.0;
    let mut rising_ds = 0.0;
    let mut n = 0u32;
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.into_iter().enumerate() {
        let order = 2 * j as u32 + 1;
        while n < order {
            rising_ds = rising_ds * (s + n as f64) + rising;
            rising *= s + n as f64;
            n += 1;
        }
        // Odd derivative carries a minus sign.
        let deriv0 = |x: f64| -rising * x.powf(-s - order as f64);
        let deriv1 = |x: f64| -x.powf(-s - order as f64) * (rising * x.ln() - rising_ds);
        let (mut d0, mut d1) = (-deriv0(a), -deriv1(a));
        if let Some(b) = b {
            d0 += deriv0(b);
            d1 += deriv1(b);
        }
        t0 += coeff * d0;
        t1 += coeff * d1;
    }
    (t0, t1)
}

/// `(int_a^b x^-s dx, int_a^b ln(x) x^-s dx)`, with `b = inf` when `None`.
fn integrals(s: f64, a: f64, b: Option<f64>) -> (f64, f64) {
    let t = 1.0 - s;
    let la = a.ln();
    match b {
        None => {
            let at = a.powf(t);
            (at / (s - 1.0), at * (1.0 / (t * t) - la / t))
        }
        Some(b) => {
            let lb = b.ln();
            let u = t * (lb - la);
            let i0 = if u == 0.0 {
                a.powf(t) * (lb - la)
            } else {
                a.powf(t) * (lb - la) * u.exp_m1() / u
            };
            let i1 = if (t * lb).abs() < 1e-3 && (t * la).abs() < 1e-3 {
                // int_la^lb y e^(t y) dy as a series in t.
                let mut sum = 0.0;
                let mut term = 1.0;
                for k in 0..12 {
                    if k > 0 {
                        term *= t / k as f64;
                    }
                    let p = k + 2;
                    sum += term * (lb.powi(p) - la.powi(p)) / p as f64;
                }
                sum
            } else {
                let anti = |x: f64, lx: f64| x.powf(t) * (lx / t - 1.0 / (t * t));
                anti(b, lb) - anti(a, la)
            };
            (i0, i1)
        }
    }
}

/// `sum ln(r)` for `r` in `lo..=hi`.
pub fn sum_ln(lo: u64, hi: u64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    if hi - lo < 1000 {
        return (lo..=hi).map(|r| (r as f64).ln()).sum();
    }
    let (a, b) = (lo as f64, hi as f64);
    let anti = |x: f64| x * x.ln() - x;
    anti(b) - anti(a) + 0.5 * (a.ln() + b.ln()) + (1.0 / b - 1.0 / a) / 12.0
}

/// Mean of `ln(r)` over the integers in `[lo, hi]`, for bounds beyond `u64`.
pub fn mean_ln(lo: f64, hi: f64) -> f64 {
    if hi < 9.0e15 {
        return sum_ln(lo as u64, hi as u64) / (hi - lo + 1.0);
    }
    let anti = |x: f64| x * x.ln() - x;
    (anti(hi) - anti(lo) + 0.5 * (lo.ln() + hi.ln())) / (hi - lo + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(s: f64, lo: u64, hi: u64) -> (f64, f64) {
        // Sum smallest terms first.
        (lo..=hi).rev().fold((0.0, 0.0), |(a, b), n| {
            let x = n as f64;
            let p = x.powf(-s);
            (a + p, b + x.ln() * p)
        })
    }

    #[test]
    fn matches_direct_summation_on_finite_ranges() {
        for s in [0.0, 0.5, 0.999_999, 1.0, 1.000_001, 1.2, 2.0, 3.7, 9.0] {
            for (lo, hi) in [(1, 5), (1, 10_000), (50, 200_000), (7, 1_000_000)] {
                let (a0, a1) = power_sums(s, lo, Some(hi));
                let (d0, d1) = direct(s, lo, hi);
                assert!((a0 - d0).abs() <= 1e-11 * d0, "S0 s={s} [{lo},{hi}] {a0} vs {d0}");
                assert!(
                    (a1 - d1).abs() <= 1e-10 * d1.abs().max(1e-300),
                    "S1 s={s} [{lo},{hi}] {a1} vs {d1}"
                );
            }
        }
    }

    #[test]
    fn infinite_sums_match_known_zeta_values() {
        // zeta(2) = pi^2 / 6, zeta'(2) = -0.937548254315843...
        let (z, dz) = power_sums(2.0, 1, None);
        assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        assert!((dz - 0.937_548_254_315_843_8).abs() < 1e-12);
        // zeta(3) = 1.2020569031595942
        assert!((power_sums(3.0, 1, None).0 - 1.202_056_903_159_594_2).abs() < 1e-13);
        // Hurwitz: zeta(2, 5) = zeta(2) - (1 + 1/4 + 1/9 + 1/16)
        let h = power_sums(2.0, 5, None).0;
        let expected = std::f64::consts::PI.powi(2) / 6.0 - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0);
        assert!((h - expected).abs() < 1e-13);
    }

    #[test]
    fn infinite_minus_finite_is_the_rest() {
        let s = 1.7;
        let all = power_sums(s, 3, None);
        let head = power_sums(s, 3, Some(10_000));
        let rest = power_sums(s, 10_001, None);
        assert!((all.0 - head.0 - rest.0).abs() < 1e-12);
        assert!((all.1 - head.1 - rest.1).abs() < 1e-11);
    }

    #[test]
    fn log_sums() {
        let direct: f64 = (5..=50_000u64).map(|r| (r as f64).ln()).sum();
        assert!((sum_ln(5, 50_000) - direct).abs() < 1e-6 * direct);
        assert_eq!(sum_ln(4, 3), 0.0);
        assert!((sum_ln(1, 3) - 6f64.ln()).abs() < 1e-15);
    }
}
