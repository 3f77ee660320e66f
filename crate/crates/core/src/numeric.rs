//! Small numeric helpers shared by the quadrature and bound-checking code:
//! complex log-gamma (Lanczos), the completed Gamma factor, and compensated
//! summation for deterministic parallel quadrature.

use num_complex::Complex64;

/// Lanczos coefficients (g = 7, 9 terms) — standard double-precision set.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_C: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// log Γ(z) for complex z via Lanczos approximation with reflection for
/// Re z < 1/2; accurate to ~1e-13 relative over the ranges used here.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1−z) = π/sin(πz)
        let pi = std::f64::consts::PI;
        let pi_c = Complex64::new(pi, 0.0);
        return (pi_c / (pi_c * z).sin()).ln() - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let zm1 = z - 1.0;
    let mut x = Complex64::new(LANCZOS_C[0], 0.0);
    for (i, &c) in LANCZOS_C.iter().enumerate().skip(1) {
        x += c / (zm1 + i as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    half_log_2pi + (zm1 + 0.5) * t.ln() - t + x.ln()
}

/// Γ(z) for complex z.
#[cfg_attr(not(test), allow(dead_code))]
pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// Completed factor Γ_R(z) = π^{−z/2} Γ(z/2).
#[cfg_attr(not(test), allow(dead_code))]
pub fn gamma_r(z: Complex64) -> Complex64 {
    let pi = std::f64::consts::PI;
    ((-z / 2.0) * pi.ln() + ln_gamma(z / 2.0)).exp()
}

/// |Γ_R(z)| without the phase (avoids overflow of the full exponential).
#[cfg_attr(not(test), allow(dead_code))]
pub fn gamma_r_abs(z: Complex64) -> f64 {
    let pi = std::f64::consts::PI;
    ((-z.re / 2.0) * pi.ln() + ln_gamma(z / 2.0).re).exp()
}

/// Kahan–Babuška compensated accumulator for complex sums; fixed insertion
/// order gives bit-reproducible totals.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    c: Complex64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Complex64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> Complex64 {
        self.sum
    }
}

/// Real compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSumReal {
    sum: f64,
    c: f64,
}

impl CompensatedSumReal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}
