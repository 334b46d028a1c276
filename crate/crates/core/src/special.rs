//! Hurwitz zeta at `s = 2` (the trigamma function) and digamma.
//!
//! Both use upward recurrence until the argument reaches [`SHIFT`], then the
//! Euler–Maclaurin asymptotic series with Bernoulli-number coefficients.

/// Recurrence threshold. At `x ≥ 20` the truncated series is below 1e-17 relative.
const SHIFT: f64 = 20.0;

/// B_2, B_4, ..., B_14.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// `ζ(2, v) = Σ_{k≥0} 1/(v + k)²` for `v > 0`; equal to trigamma ψ₁(v).
pub fn hurwitz_zeta2(v: f64) -> f64 {
    assert!(v > 0.0, "hurwitz_zeta2 requires v > 0, got {v}");
    let mut x = v;
    let mut head = 0.0;
    while x < SHIFT {
        head += 1.0 / (x * x);
        x += 1.0;
    }
    // ψ₁(x) ~ 1/x + 1/(2x²) + Σ B_2k / x^(2k+1)
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv * inv2;
    let mut tail = 0.0;
    for b in BERNOULLI {
        tail += b * term;
        term *= inv2;
    }
    head + inv + 0.5 * inv2 + tail
}

/// Digamma ψ(v) for `v > 0`.
pub fn digamma(v: f64) -> f64 {
    assert!(v > 0.0, "digamma requires v > 0, got {v}");
    let mut x = v;
    let mut head = 0.0;
    while x < SHIFT {
        head -= 1.0 / x;
        x += 1.0;
    }
    // ψ(x) ~ ln x − 1/(2x) − Σ B_2k / (2k · x^(2k))
    let inv2 = 1.0 / (x * x);
    let mut term = inv2;
    let mut tail = 0.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        tail += b / (2.0 * (k + 1) as f64) * term;
        term *= inv2;
    }
    head + x.ln() - 0.5 / x - tail
}
