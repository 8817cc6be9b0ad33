//! Precision and tolerance settings shared by every numerical stage.

use serde::{Deserialize, Serialize};

/// Working precision and the tolerances derived from it.
///
/// `working_digits <= 16` selects the `Complex64` backend; anything larger
/// runs on arbitrary-precision floats with a few guard digits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PrecisionConfig {
    /// Significant decimal digits carried by the scalar type.
    pub working_digits: u32,
    /// Relative tolerance for contour and path quadrature.
    pub quad_rel_tol: f64,
    /// Absolute truncation tolerance for theta lattice sums.
    pub theta_tol: f64,
    /// Base step for finite-difference stencils in moduli directions.
    pub fd_step: f64,
}

impl PrecisionConfig {
    pub fn with_digits(digits: u32) -> Self {
        // Quadrature aims a little above the representable precision floor;
        // finite differences balance truncation against roundoff at h ~ eps^(1/3).
        let eps = 10f64.powi(-(digits as i32));
        PrecisionConfig {
            working_digits: digits,
            quad_rel_tol: (eps * 1e3).max(1e-300),
            theta_tol: (eps * 1e2).max(1e-300),
            fd_step: eps.cbrt().clamp(1e-8, 1e-3),
        }
    }

    /// Mantissa bits for the big-float backend, with guard bits.
    pub fn prec_bits(&self) -> u32 {
        let bits = (self.working_digits as f64 * std::f64::consts::LOG2_10).ceil() as u32;
        bits + 24
    }

    /// True when the fast `Complex64` backend is precise enough.
    pub fn fits_f64(&self) -> bool {
        self.working_digits <= 16
    }

    /// Radius below which roots are merged into a multiple root, relative to
    /// the spread of the root set.
    pub fn cluster_radius(&self) -> f64 {
        10.0 * self.quad_rel_tol
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig::with_digits(30)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_presets_are_monotone() {
        let lo = PrecisionConfig::with_digits(15);
        let hi = PrecisionConfig::with_digits(30);
        assert!(lo.fits_f64());
        assert!(!hi.fits_f64());
        assert!(hi.quad_rel_tol < lo.quad_rel_tol);
        assert!(hi.prec_bits() > lo.prec_bits());
        assert!(hi.prec_bits() >= 100);
    }
}
