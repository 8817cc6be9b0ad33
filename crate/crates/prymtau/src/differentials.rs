//! Holomorphic differentials on the cover, written as num(x) dx / (y^a w^b).
//!
//! The cover carries three pullback families that together span all
//! holomorphic forms: x^k dx/y from the base curve (even under the cover
//! involution), x^k dx/w and x^k dx/(yw) from the two quotient curves of the
//! Galois group (odd). The distinguished odd form v = w dx/y is stored as
//! f(x) dx/(yw), which is the same function on the cover.

use crate::cover::{CoverCurve, SheetSigns};
use crate::poly::ComplexPolynomial;
use crate::scalar::CScalar;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parity {
    Even,
    Odd,
}

/// num(x) dx / (y^y_pow w^w_pow).
#[derive(Clone, Debug)]
pub struct MonomialForm<C: CScalar> {
    pub num: ComplexPolynomial<C>,
    pub y_pow: u32,
    pub w_pow: u32,
}

impl<C: CScalar> MonomialForm<C> {
    pub fn parity(&self) -> Parity {
        if self.w_pow % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Coefficient function at a labeled point (the dx factor is supplied by
    /// the contour parametrization).
    pub fn eval(&self, cover: &CoverCurve<C>, x: &C, signs: SheetSigns) -> C {
        let mut val = self.num.eval(x);
        if self.y_pow > 0 {
            val = val / cover.y_at(x, signs).powi(self.y_pow as i32);
        }
        if self.w_pow > 0 {
            val = val / cover.w_at(x, signs).powi(self.w_pow as i32);
        }
        val
    }
}

fn monomial<C: CScalar>(model: &C, k: usize) -> ComplexPolynomial<C> {
    let mut coeffs = vec![model.zero_like(); k + 1];
    coeffs[k] = model.one_like();
    ComplexPolynomial { coeffs }
}

/// Basis of holomorphic differentials on the cover: first the g even forms,
/// then the 3g-3 odd ones.
pub fn holomorphic_basis<C: CScalar>(cover: &CoverCurve<C>) -> Vec<MonomialForm<C>> {
    let g = cover.genus;
    let m = cover.model();
    let mut out = Vec::with_capacity(4 * g - 3);
    for k in 0..g {
        out.push(MonomialForm {
            num: monomial(m, k),
            y_pow: 1,
            w_pow: 0,
        });
    }
    for k in 0..g.saturating_sub(2) {
        out.push(MonomialForm {
            num: monomial(m, k),
            y_pow: 0,
            w_pow: 1,
        });
    }
    for k in 0..(2 * g - 1) {
        out.push(MonomialForm {
            num: monomial(m, k),
            y_pow: 1,
            w_pow: 1,
        });
    }
    out
}

/// The odd form v = w dx / y whose squares are the quadratic differential
/// f(x) (dx)^2 / y^2 on the base curve.
pub fn v_form<C: CScalar>(cover: &CoverCurve<C>) -> MonomialForm<C> {
    MonomialForm {
        num: cover.f.clone(),
        y_pow: 1,
        w_pow: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn quintic_cover() -> CoverCurve<Complex64> {
        let p = ComplexPolynomial::from_f64_pairs(
            53,
            &[
                (-1.0, 0.0),
                (0.0, 0.0),
                (0.0, 0.0),
                (0.0, 0.0),
                (0.0, 0.0),
                (1.0, 0.0),
            ],
        );
        let f = ComplexPolynomial::from_f64_pairs(53, &[(-4.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        CoverCurve::new(2, p, f, 1e-10).unwrap()
    }

    #[test]
    fn basis_size_and_parities() {
        let cover = quintic_cover();
        let basis = holomorphic_basis(&cover);
        assert_eq!(basis.len(), cover.genus_cover());
        let even = basis.iter().filter(|b| b.parity() == Parity::Even).count();
        assert_eq!(even, cover.genus);
        assert_eq!(basis.len() - even, 3 * cover.genus - 3);
    }

    #[test]
    fn involution_action_matches_parity() {
        let cover = quintic_cover();
        let x = Complex64::new(0.7, -1.3);
        let s = SheetSigns::base();
        for form in holomorphic_basis(&cover) {
            let a = form.eval(&cover, &x, s);
            let b = form.eval(&cover, &x, s.mu());
            match form.parity() {
                Parity::Even => assert!((a - b).norm() < 1e-13),
                Parity::Odd => assert!((a + b).norm() < 1e-13),
            }
        }
    }

    #[test]
    fn v_equals_w_over_y() {
        let cover = quintic_cover();
        let x = Complex64::new(1.4, 0.9);
        let s = SheetSigns::base();
        let v = v_form(&cover).eval(&cover, &x, s);
        let direct = cover.w_at(&x, s) / cover.y_at(&x, s);
        assert!((v - direct).norm() < 1e-13);
    }

    #[test]
    fn v_is_odd_under_mu() {
        let cover = quintic_cover();
        let x = Complex64::new(-0.4, 2.1);
        let v = v_form(&cover);
        let a = v.eval(&cover, &x, SheetSigns::base());
        let b = v.eval(&cover, &x, SheetSigns::base().mu());
        assert!((a + b).norm() < 1e-13);
    }
}
