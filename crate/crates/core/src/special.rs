//! Log-gamma, digamma and trigamma for positive real arguments.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Shift point for the asymptotic expansions.
const ASYMPTOTIC_FROM: f64 = 15.0;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// `ln(x) − ψ(x)` for `x > 0`, evaluated without cancellation for large `x`.
pub fn ln_minus_digamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_FROM {
        // ψ(z) = ψ(z + 1) − 1/z
        acc += 1.0 / z;
        z += 1.0;
        shift += 1.0;
    }
    // ln z − ψ(z) ~ 1/(2z) + 1/(12z²) − 1/(120z⁴) + 1/(252z⁶) − 1/(240z⁸) + 1/(132z¹⁰)
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv * 0.5
        + inv2
            * (1.0 / 12.0
                - inv2
                    * (1.0 / 120.0
                        - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    if shift == 0.0 {
        series
    } else {
        // ln x − ψ(x) = [ln z − ψ(z)] − ln(z/x) + Σ 1/(x+i)
        series - (z / x).ln() + acc
    }
}

/// Digamma `ψ(x)` for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    x.ln() - ln_minus_digamma(x)
}

/// Trigamma `ψ'(x)` for `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_FROM {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // 1/z + 1/(2z²) + 1/(6z³) − 1/(30z⁵) + 1/(42z⁷) − 1/(30z⁹) + 5/(66z¹¹)
    let tail = inv
        + inv2 * 0.5
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))));
    acc + tail
}
