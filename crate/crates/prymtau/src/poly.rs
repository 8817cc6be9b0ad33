//! Dense complex polynomials with simultaneous root iteration.

use crate::error::{PrymError, Result};
use crate::scalar::{CScalar, RScalar};

/// Coefficients in ascending degree order; the leading entry is nonzero
/// after [`ComplexPolynomial::trimmed`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPolynomial<C: CScalar> {
    pub coeffs: Vec<C>,
}

impl<C: CScalar> ComplexPolynomial<C> {
    pub fn new(coeffs: Vec<C>) -> Self {
        ComplexPolynomial { coeffs }
    }

    pub fn from_f64_pairs(bits: u32, pairs: &[(f64, f64)]) -> Self {
        ComplexPolynomial {
            coeffs: pairs.iter().map(|&(re, im)| C::with_prec(bits, re, im)).collect(),
        }
    }

    /// Drops (numerically) vanishing leading coefficients.
    pub fn trimmed(mut self) -> Self {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.abs().to_f64())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        while self.coeffs.len() > 1 {
            let lead = self.coeffs.last().unwrap().abs().to_f64();
            if lead > 1e-14 * scale {
                break;
            }
            self.coeffs.pop();
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: &C) -> C {
        let mut acc = x.zero_like();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return ComplexPolynomial::new(vec![self.coeffs[0].zero_like()]);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.like(k as f64, 0.0) * c)
            .collect();
        ComplexPolynomial::new(coeffs)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let zero = self.coeffs[0].zero_like();
        let mut out = vec![zero; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a.clone() * b;
            }
        }
        ComplexPolynomial::new(out)
    }

    pub fn scale(&self, s: &C) -> Self {
        ComplexPolynomial::new(self.coeffs.iter().map(|c| c.clone() * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = self.coeffs[0].zero_like();
        let mut out = vec![zero; n];
        for (i, a) in self.coeffs.iter().enumerate() {
            out[i] += a.clone();
        }
        for (i, b) in other.coeffs.iter().enumerate() {
            out[i] += b.clone();
        }
        ComplexPolynomial::new(out)
    }

    /// Returns d^k/dx^k p(x) for k = 0..=orders.
    pub fn jets(&self, x: &C, orders: usize) -> Vec<C> {
        let mut p = self.clone();
        let mut out = Vec::with_capacity(orders + 1);
        for k in 0..=orders {
            if k > 0 {
                p = p.derivative();
            }
            out.push(p.eval(x));
        }
        out
    }

    /// All roots with multiplicity clustering.
    ///
    /// Weierstrass-Durand-Kerner simultaneous iteration, Newton-polished, with
    /// roots closer than `cluster_radius * spread` merged into one root of
    /// higher multiplicity.
    pub fn roots(&self, cluster_radius: f64) -> Result<Vec<Root<C>>> {
        let p = self.clone().trimmed();
        let n = p.degree();
        if n == 0 {
            return Ok(vec![]);
        }
        let lead = p.coeffs.last().unwrap().clone();
        // monic normalization
        let monic: Vec<C> = p.coeffs.iter().map(|c| c.clone() / &lead).collect();
        let monic_poly = ComplexPolynomial::new(monic.clone());
        let one = lead.one_like();

        // Cauchy bound for initial circle radius.
        let bound = monic
            .iter()
            .take(n)
            .map(|c| c.abs().to_f64())
            .fold(0.0f64, f64::max)
            + 1.0;
        let mut zs: Vec<C> = (0..n)
            .map(|k| {
                // slightly irrational angle offset avoids symmetric stalls
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.354) / n as f64;
                one.like(0.4 + 0.9 * bound * t.cos(), 0.9 * bound * t.sin())
            })
            .collect();

        let max_iter = 200 + 40 * n;
        let mut converged = false;
        for _ in 0..max_iter {
            let mut delta_max = 0.0f64;
            for i in 0..n {
                let zi = zs[i].clone();
                let mut denom = one.clone();
                for (j, zj) in zs.iter().enumerate() {
                    if j != i {
                        denom = denom * (zi.clone() - zj);
                    }
                }
                if denom.abs().to_f64() == 0.0 {
                    // coincident iterates: nudge
                    zs[i] = zi.clone() + zi.like(1e-6 * bound, 2e-6 * bound);
                    delta_max = f64::max(delta_max, 1.0);
                    continue;
                }
                let step = monic_poly.eval(&zi) / denom;
                delta_max = f64::max(delta_max, step.abs().to_f64());
                zs[i] = zi - step;
            }
            if delta_max < 1e-14 * bound.max(1.0) {
                converged = true;
                break;
            }
        }
        // Newton polish at native precision (quadratic from DK seeds).
        let dp = monic_poly.derivative();
        for z in zs.iter_mut() {
            for _ in 0..8 {
                let f = monic_poly.eval(z);
                let d = dp.eval(z);
                if d.abs().to_f64() == 0.0 {
                    break;
                }
                let step = f / d;
                let sz = step.abs().to_f64();
                *z = z.clone() - step;
                if sz < 1e-40 * bound.max(1.0) {
                    break;
                }
            }
        }
        if !converged {
            // Accept if Newton pushed residuals to the floor anyway.
            let worst = zs
                .iter()
                .map(|z| monic_poly.eval(z).abs().to_f64())
                .fold(0.0f64, f64::max);
            if worst > 1e-10 * bound.max(1.0) {
                return Err(PrymError::Numerical(format!(
                    "root iteration stalled, residual {worst:e}"
                )));
            }
        }

        // Cluster by spread-relative radius.
        let spread = {
            let mut s = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    s = s.max((zs[i].clone() - &zs[j]).abs().to_f64());
                }
            }
            s.max(1.0)
        };
        let merge_r = cluster_radius * spread;
        let mut used = vec![false; n];
        let mut roots = Vec::new();
        for i in 0..n {
            if used[i] {
                continue;
            }
            let mut members = vec![i];
            used[i] = true;
            for j in (i + 1)..n {
                if !used[j] && (zs[i].clone() - &zs[j]).abs().to_f64() < merge_r {
                    used[j] = true;
                    members.push(j);
                }
            }
            let m = members.len();
            let mut center = zs[members[0]].zero_like();
            for &k in &members {
                center += &zs[k];
            }
            center = center * one.like(1.0 / m as f64, 0.0);
            roots.push(Root {
                value: center,
                multiplicity: m,
            });
        }
        // Deterministic order: by (re, im) of the f64 shadow.
        roots.sort_by(|a, b| {
            let pa = a.value.to_c64();
            let pb = b.value.to_c64();
            pa.re
                .partial_cmp(&pb.re)
                .unwrap()
                .then(pa.im.partial_cmp(&pb.im).unwrap())
        });
        Ok(roots)
    }
}

#[derive(Debug, Clone)]
pub struct Root<C: CScalar> {
    pub value: C,
    pub multiplicity: usize,
}

/// Simple roots only; errors if any multiplicity exceeds 1.
pub fn simple_roots<C: CScalar>(p: &ComplexPolynomial<C>, cluster_radius: f64) -> Result<Vec<C>> {
    let roots = p.roots(cluster_radius)?;
    if let Some(r) = roots.iter().find(|r| r.multiplicity > 1) {
        return Err(PrymError::DegenerateInput(format!(
            "multiple root of order {} near {}",
            r.multiplicity,
            r.value.to_c64()
        )));
    }
    Ok(roots.into_iter().map(|r| r.value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cpoly(cs: &[(f64, f64)]) -> ComplexPolynomial<Complex64> {
        ComplexPolynomial::from_f64_pairs(53, cs)
    }

    #[test]
    fn quadratic_roots() {
        // x^2 - 4 = 0
        let p = cpoly(&[(-4.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let rs = simple_roots(&p, 1e-9).unwrap();
        assert_eq!(rs.len(), 2);
        assert!((rs[0] - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!((rs[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn quintic_unit_roots() {
        // x^5 - 1: the five fifth roots of unity
        let p = cpoly(&[(-1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let rs = simple_roots(&p, 1e-9).unwrap();
        assert_eq!(rs.len(), 5);
        for r in &rs {
            assert!((r.norm() - 1.0).abs() < 1e-12);
            assert!((r.powi(5) - Complex64::new(1.0, 0.0)).norm() < 1e-11);
        }
    }

    #[test]
    fn clustered_double_root() {
        // (x-1)^2 (x+3)
        let p = cpoly(&[(3.0, 0.0), (-5.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        let rs = p.roots(1e-5).unwrap();
        assert_eq!(rs.len(), 2);
        let double = rs.iter().find(|r| r.multiplicity == 2).unwrap();
        assert!((double.value - Complex64::new(1.0, 0.0)).norm() < 1e-5);
        let simple = rs.iter().find(|r| r.multiplicity == 1).unwrap();
        assert!((simple.value - Complex64::new(-3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn high_precision_roots() {
        let p: ComplexPolynomial<rug::Complex> = ComplexPolynomial::from_f64_pairs(
            190,
            &[(-1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)],
        );
        let rs = simple_roots(&p, 1e-25).unwrap();
        for r in &rs {
            let resid = CScalar::abs(&p.eval(r)).to_f64();
            assert!(resid < 1e-45, "residual {resid:e}");
        }
    }

    #[test]
    fn eval_and_derivative() {
        let p = cpoly(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]); // 1 + 2x + 3x^2
        let x = Complex64::new(2.0, 1.0);
        let expect = Complex64::new(1.0, 0.0) + Complex64::new(2.0, 0.0) * x
            + Complex64::new(3.0, 0.0) * x * x;
        assert!((p.eval(&x) - expect).norm() < 1e-13);
        let dp = p.derivative();
        let dexpect = Complex64::new(2.0, 0.0) + Complex64::new(6.0, 0.0) * x;
        assert!((dp.eval(&x) - dexpect).norm() < 1e-13);
    }
}
