//! Siegel theta functions with half-integer characteristics.
//!
//! The series is summed over the integer points of an ellipsoid determined by
//! the imaginary part of the period matrix.  Enumeration bounds come from a
//! float Cholesky factor; the summands themselves are computed at working
//! precision.  Along the innermost lattice direction consecutive terms differ
//! by a geometric-of-geometric recurrence, so each inner segment costs two
//! exponentials regardless of its length.  A shell of lattice points just
//! outside the target ellipsoid is accumulated separately; its mass is the
//! empirical truncation bound, and the radius grows until that bound clears
//! the requested tolerance.

use crate::error::{PrymError, Result};
use crate::linalg::CMat;
use crate::scalar::{CScalar, RScalar};

/// Half-integer characteristic, stored doubled: entries of `a` and `b` lie in
/// {0, 1} and stand for the shifts a/2 (lattice) and b/2 (argument).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Characteristic {
    pub a: Vec<u8>,
    pub b: Vec<u8>,
}

impl Characteristic {
    pub fn zero(g: usize) -> Self {
        Characteristic { a: vec![0; g], b: vec![0; g] }
    }

    pub fn new(a: Vec<u8>, b: Vec<u8>) -> Self {
        assert_eq!(a.len(), b.len(), "characteristic halves must have equal length");
        let a = a.into_iter().map(|x| x % 2).collect();
        let b = b.into_iter().map(|x| x % 2).collect();
        Characteristic { a, b }
    }

    pub fn genus(&self) -> usize {
        self.a.len()
    }

    /// +1 for even, -1 for odd; the sign of theta under argument negation.
    pub fn parity(&self) -> i32 {
        let dot: u32 = self.a.iter().zip(&self.b).map(|(&x, &y)| (x * y) as u32).sum();
        if dot % 2 == 0 { 1 } else { -1 }
    }

    pub fn is_odd(&self) -> bool {
        self.parity() == -1
    }
}

/// All 4^g doubled characteristics, lexicographic in (a, b).
pub fn half_characteristics(g: usize) -> Vec<Characteristic> {
    assert!(g <= 8, "characteristic enumeration is exponential in the genus");
    let mut out = Vec::with_capacity(1usize << (2 * g));
    for mask in 0..(1u32 << (2 * g)) {
        let a: Vec<u8> = (0..g).map(|i| ((mask >> i) & 1) as u8).collect();
        let b: Vec<u8> = (0..g).map(|i| ((mask >> (g + i)) & 1) as u8).collect();
        out.push(Characteristic { a, b });
    }
    out
}

/// Which per-term polynomial factors to accumulate alongside the plain sum.
pub enum FactorSpec<'a, C: CScalar> {
    /// `[theta]`
    Plain,
    /// `[theta, D theta, ..., D^order theta]` for the directional derivative
    /// along `dir`.
    Jets { dir: &'a [C], order: usize },
    /// `[theta, d_1 theta, ..., d_g theta]`
    Gradient,
    /// `[theta, d_j theta (g entries), d_j d_k theta (upper triangle, row
    /// major)]`
    Hessian,
}

impl<'a, C: CScalar> FactorSpec<'a, C> {
    fn output_len(&self, g: usize) -> usize {
        match self {
            FactorSpec::Plain => 1,
            FactorSpec::Jets { order, .. } => order + 1,
            FactorSpec::Gradient => 1 + g,
            FactorSpec::Hessian => 1 + g + g * (g + 1) / 2,
        }
    }

    fn max_order(&self) -> usize {
        match self {
            FactorSpec::Plain => 0,
            FactorSpec::Jets { order, .. } => *order,
            FactorSpec::Gradient => 1,
            FactorSpec::Hessian => 2,
        }
    }
}

/// Index of the (j, k) Hessian slot, j <= k, in the packed upper triangle.
pub fn hessian_slot(g: usize, j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < g);
    j * g - j * (j + 1) / 2 + k
}

pub struct ThetaEngine<C: CScalar> {
    omega: CMat<C>,
    /// Lower Cholesky factor of Im(omega).
    chol: Vec<Vec<f64>>,
    sqrt_det_y: f64,
    max_terms: usize,
}

pub(crate) fn cholesky_lower(y: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = y.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = y[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve (L L^t) x = b with the lower Cholesky factor.
pub(crate) fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i][k] * x[k];
        }
        x[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= l[k][i] * x[k];
        }
        x[i] /= l[i][i];
    }
    x
}

/// Volume of the unit ball in dimension g.
fn unit_ball_volume(g: usize) -> f64 {
    let mut v = [1.0, 2.0][g % 2];
    let mut d = g % 2;
    while d < g {
        d += 2;
        v *= 2.0 * std::f64::consts::PI / d as f64;
    }
    v
}

struct Enumeration<'x, C: CScalar> {
    g: usize,
    omega: &'x CMat<C>,
    chol: &'x [Vec<f64>],
    /// Real center: the lattice is summed over n + center.
    center: Vec<f64>,
    a_half: Vec<f64>,
    /// w + b/2 at working precision.
    wb: Vec<C>,
    q_main: f64,
    q_total: f64,
    n: Vec<i64>,
    /// rowacc[j] = sum over fixed k > level of omega[j][k] * m_k.
    rowacc: Vec<C>,
    /// Quadratic partial sum over fixed pairs.
    qacc: C,
    /// Linear partial sum of m_k * wb[k] over fixed k.
    wacc: C,
    /// Directional partial sum of m_k * dir[k] over fixed k (jets only).
    pfix: C,
    spec_dir: Vec<C>,
    spec_order: usize,
    grad_like: bool,
    hess: bool,
    out: Vec<C>,
    shell_abs: f64,
    count: usize,
    max_terms: usize,
    pi_i_o00: C,
    ratio2: C,
    two_pi_i: C,
}

impl<'x, C: CScalar> Enumeration<'x, C> {
    fn descend(&mut self, level: usize, q_part: f64) -> Result<()> {
        let ljj = self.chol[level][level];
        let t: f64 = (level + 1..self.g)
            .map(|k| self.chol[k][level] * (self.n[k] as f64 + self.center[k]))
            .sum();
        let rem = (self.q_total - q_part).max(0.0).sqrt();
        let lo = ((-rem - t) / ljj - self.center[level] - 1e-9).ceil() as i64;
        let hi = ((rem - t) / ljj - self.center[level] + 1e-9).floor() as i64;
        if lo > hi {
            return Ok(());
        }
        if level == 0 {
            return self.inner_run(lo, hi, t, q_part);
        }
        for nl in lo..=hi {
            self.n[level] = nl;
            let y = nl as f64 + self.center[level];
            let q_new = q_part + (ljj * y + t) * (ljj * y + t);
            let ml = nl as f64 + self.a_half[level];
            let cml = self.qacc.like(ml, 0.0);

            let saved_qacc = self.qacc.clone();
            let saved_wacc = self.wacc.clone();
            let saved_pfix = self.pfix.clone();
            let saved_row: Vec<C> = self.rowacc[..level].to_vec();

            let diag = self.omega.at(level, level).clone() * &cml
                + self.rowacc[level].clone() * &self.qacc.like(2.0, 0.0);
            self.qacc = self.qacc.clone() + diag * &cml;
            self.wacc = self.wacc.clone() + self.wb[level].clone() * &cml;
            if !self.spec_dir.is_empty() {
                self.pfix = self.pfix.clone() + self.spec_dir[level].clone() * &cml;
            }
            for j in 0..level {
                self.rowacc[j] =
                    self.rowacc[j].clone() + self.omega.at(j, level).clone() * &cml;
            }

            self.descend(level - 1, q_new)?;

            self.qacc = saved_qacc;
            self.wacc = saved_wacc;
            self.pfix = saved_pfix;
            self.rowacc[..level].clone_from_slice(&saved_row);
        }
        Ok(())
    }

    fn inner_run(&mut self, lo: i64, hi: i64, t: f64, q_part: f64) -> Result<()> {
        let len = (hi - lo + 1) as usize;
        self.count += len;
        if self.count > self.max_terms {
            return Err(PrymError::LatticeBlowup(self.count));
        }
        let model = self.qacc.clone();
        let pi_i = model.pi_like().mul_i();
        let l00 = self.chol[0][0];

        let m0_start = lo as f64 + self.a_half[0];
        let cm0 = model.like(m0_start, 0.0);
        // Exponent at the segment start and the two recurrence multipliers.
        let b_lin = (self.rowacc[0].clone() + self.wb[0].clone()) * &self.two_pi_i;
        let e_start = (self.pi_i_o00.clone() * &cm0 + &b_lin) * &cm0
            + self.qacc.clone() * &pi_i
            + self.wacc.clone() * &self.two_pi_i;
        let mut term = e_start.exp();
        let mut ratio = (self.pi_i_o00.clone() * &model.like(2.0 * m0_start + 1.0, 0.0) + &b_lin)
            .exp();

        let max_order = if self.hess {
            2
        } else if self.grad_like {
            1
        } else {
            self.spec_order
        };

        // Fixed gradient / Hessian factors for coordinates >= 1.
        let mut fac_fixed: Vec<C> = Vec::new();
        if self.grad_like || self.hess {
            fac_fixed = (1..self.g)
                .map(|k| {
                    self.two_pi_i.clone()
                        * &model.like(self.n[k] as f64 + self.a_half[k], 0.0)
                })
                .collect();
        }
        let mut pcur = model.zero_like();
        let mut pstep = model.zero_like();
        if !self.spec_dir.is_empty() {
            pcur = (self.pfix.clone() + self.spec_dir[0].clone() * &cm0) * &self.two_pi_i;
            pstep = self.spec_dir[0].clone() * &self.two_pi_i;
        }

        let mnorm_fixed: f64 = (1..self.g)
            .map(|k| (self.n[k] as f64 + self.a_half[k]).abs())
            .sum();
        let dirnorm: f64 = self
            .spec_dir
            .iter()
            .map(|d| CScalar::abs(d).to_f64())
            .sum::<f64>()
            .max(1.0);

        for n0 in lo..=hi {
            let m0 = n0 as f64 + self.a_half[0];
            let y0 = n0 as f64 + self.center[0];
            let q = q_part + (l00 * y0 + t) * (l00 * y0 + t);
            let in_main = q <= self.q_main;

            if in_main {
                if self.hess {
                    let fac0 = self.two_pi_i.clone() * &model.like(m0, 0.0);
                    self.out[0] = self.out[0].clone() + &term;
                    let mut firsts: Vec<C> = Vec::with_capacity(self.g);
                    firsts.push(term.clone() * &fac0);
                    for k in 1..self.g {
                        firsts.push(term.clone() * &fac_fixed[k - 1]);
                    }
                    for (k, fk) in firsts.iter().enumerate() {
                        self.out[1 + k] = self.out[1 + k].clone() + fk;
                    }
                    let mut slot = 1 + self.g;
                    for j in 0..self.g {
                        let fj = if j == 0 { &fac0 } else { &fac_fixed[j - 1] };
                        for k in j..self.g {
                            self.out[slot] = self.out[slot].clone() + firsts[k].clone() * fj;
                            slot += 1;
                        }
                    }
                } else if self.grad_like {
                    self.out[0] = self.out[0].clone() + &term;
                    let fac0 = self.two_pi_i.clone() * &model.like(m0, 0.0);
                    self.out[1] = self.out[1].clone() + term.clone() * &fac0;
                    for k in 1..self.g {
                        self.out[1 + k] =
                            self.out[1 + k].clone() + term.clone() * &fac_fixed[k - 1];
                    }
                } else if self.spec_order > 0 {
                    let mut acc = term.clone();
                    for j in 0..=self.spec_order {
                        self.out[j] = self.out[j].clone() + &acc;
                        if j < self.spec_order {
                            acc = acc * &pcur;
                        }
                    }
                } else {
                    self.out[0] = self.out[0].clone() + &term;
                }
            } else {
                let mag = CScalar::abs(&term).to_f64();
                let fmax = (1.0
                    + 2.0 * std::f64::consts::PI
                        * (mnorm_fixed + m0.abs())
                        * dirnorm)
                    .powi(max_order as i32);
                self.shell_abs += mag * fmax;
            }

            if n0 < hi {
                term = term * &ratio;
                ratio = ratio * &self.ratio2;
                if !self.spec_dir.is_empty() {
                    pcur = pcur + &pstep;
                }
            }
        }
        Ok(())
    }
}

impl<C: CScalar> ThetaEngine<C> {
    pub fn new(omega: &CMat<C>) -> Result<Self> {
        if omega.rows != omega.cols {
            return Err(PrymError::DegenerateInput("period matrix must be square".into()));
        }
        let scale = omega.max_norm().max(1e-300);
        if omega.asymmetry() > 1e-6 * scale {
            return Err(PrymError::DegenerateInput(format!(
                "period matrix asymmetry {:.3e} too large for theta summation",
                omega.asymmetry()
            )));
        }
        let y = omega.imag_f64();
        let chol = cholesky_lower(&y).ok_or_else(|| {
            PrymError::DegenerateInput(
                "imaginary part of the period matrix is not positive definite".into(),
            )
        })?;
        let sqrt_det_y = chol.iter().enumerate().map(|(i, r)| r[i]).product();
        Ok(ThetaEngine { omega: omega.clone(), chol, sqrt_det_y, max_terms: 100_000_000 })
    }

    pub fn genus(&self) -> usize {
        self.omega.rows
    }

    pub fn omega(&self) -> &CMat<C> {
        &self.omega
    }

    /// Core summation; output layout per `spec`.
    pub fn sum_with_factors(
        &self,
        w: &[C],
        chi: &Characteristic,
        spec: &FactorSpec<'_, C>,
        tol: f64,
    ) -> Result<Vec<C>> {
        let g = self.genus();
        if w.len() != g || chi.genus() != g {
            return Err(PrymError::DegenerateInput(
                "theta argument or characteristic has the wrong length".into(),
            ));
        }
        let model = self.omega.model().clone();
        let a_half: Vec<f64> = chi.a.iter().map(|&x| x as f64 / 2.0).collect();
        let wb: Vec<C> = w
            .iter()
            .zip(&chi.b)
            .map(|(wi, &bi)| wi.clone() + &model.like(bi as f64 / 2.0, 0.0))
            .collect();

        // Center of the Gaussian weight: a/2 + Y^{-1} Im w.
        let im_w: Vec<f64> = w.iter().map(|wi| wi.im().to_f64()).collect();
        let yinv_imw = cholesky_solve(&self.chol, &im_w);
        let center: Vec<f64> =
            (0..g).map(|i| a_half[i] + yinv_imw[i]).collect();
        // Peak log-magnitude of a term, pi * Im(w)^t Y^{-1} Im(w).
        let peak: f64 = std::f64::consts::PI
            * im_w.iter().zip(&yinv_imw).map(|(a, b)| a * b).sum::<f64>();

        let tol = tol.clamp(1e-60, 1e-2);
        let max_order = spec.max_order();
        let dirnorm = match spec {
            FactorSpec::Jets { dir, .. } => {
                dir.iter().map(|d| CScalar::abs(d).to_f64()).sum::<f64>().max(1.0)
            }
            _ => 1.0,
        };
        let mut q_main = (tol.recip().ln() + peak.max(0.0) + 3.0
            + max_order as f64 * (3.0 + dirnorm.ln().max(0.0)))
            / std::f64::consts::PI;

        let (dir, order, grad_like, hess) = match spec {
            FactorSpec::Plain => (Vec::new(), 0, false, false),
            FactorSpec::Jets { dir, order } => (dir.to_vec(), *order, false, false),
            FactorSpec::Gradient => (Vec::new(), 0, true, false),
            FactorSpec::Hessian => (Vec::new(), 0, false, true),
        };

        for _attempt in 0..6 {
            let q_total = q_main + 2.0;
            let estimate = unit_ball_volume(g) * q_total.powf(g as f64 / 2.0)
                / self.sqrt_det_y;
            if !estimate.is_finite() || estimate > self.max_terms as f64 {
                return Err(PrymError::LatticeBlowup(estimate.min(1e18) as usize));
            }

            let two_pi_i = model.two_pi_i_like();
            let pi_i_o00 = self.omega.at(0, 0).clone() * &model.pi_like().mul_i();
            let ratio2 = (pi_i_o00.clone() + &pi_i_o00).exp();
            let mut en = Enumeration {
                g,
                omega: &self.omega,
                chol: &self.chol,
                center: center.clone(),
                a_half: a_half.clone(),
                wb: wb.clone(),
                q_main,
                q_total,
                n: vec![0; g],
                rowacc: vec![model.zero_like(); g],
                qacc: model.zero_like(),
                wacc: model.zero_like(),
                pfix: model.zero_like(),
                spec_dir: dir.clone(),
                spec_order: order,
                grad_like,
                hess,
                out: vec![model.zero_like(); spec.output_len(g)],
                shell_abs: 0.0,
                count: 0,
                max_terms: self.max_terms,
                pi_i_o00,
                ratio2,
                two_pi_i,
            };
            if g == 1 {
                en.descend(0, 0.0)?;
            } else {
                en.descend(g - 1, 0.0)?;
            }

            let out_scale = en
                .out
                .iter()
                .map(|v| CScalar::abs(v).to_f64())
                .fold(0.0f64, f64::max)
                .max(peak.max(0.0).exp());
            if en.shell_abs <= 0.3 * tol * out_scale {
                return Ok(en.out);
            }
            q_main += 2.0;
        }
        Err(PrymError::Numerical(
            "theta series shell failed to fall below the requested tolerance".into(),
        ))
    }

    pub fn theta(&self, w: &[C], chi: &Characteristic, tol: f64) -> Result<C> {
        Ok(self.sum_with_factors(w, chi, &FactorSpec::Plain, tol)?.pop().unwrap())
    }

    /// Directional derivatives along `dir`: `[theta, D theta, ..., D^order theta]`.
    pub fn theta_jets(
        &self,
        w: &[C],
        chi: &Characteristic,
        dir: &[C],
        order: usize,
        tol: f64,
    ) -> Result<Vec<C>> {
        self.sum_with_factors(w, chi, &FactorSpec::Jets { dir, order }, tol)
    }

    pub fn theta_gradient(&self, w: &[C], chi: &Characteristic, tol: f64) -> Result<Vec<C>> {
        let mut o = self.sum_with_factors(w, chi, &FactorSpec::Gradient, tol)?;
        Ok(o.drain(1..).collect())
    }

    /// Value, gradient and full symmetric Hessian in one lattice pass.
    pub fn theta_hessian(
        &self,
        w: &[C],
        chi: &Characteristic,
        tol: f64,
    ) -> Result<(C, Vec<C>, CMat<C>)> {
        let g = self.genus();
        let o = self.sum_with_factors(w, chi, &FactorSpec::Hessian, tol)?;
        let value = o[0].clone();
        let grad = o[1..1 + g].to_vec();
        let mut hess = CMat::zeros(self.omega.model(), g, g);
        for j in 0..g {
            for k in j..g {
                let v = o[1 + g + hessian_slot(g, j, k)].clone();
                *hess.at_mut(j, k) = v.clone();
                *hess.at_mut(k, j) = v;
            }
        }
        Ok((value, grad, hess))
    }

    /// The odd characteristic whose theta gradient at zero is largest; ties in
    /// magnitude break lexicographically through the stable enumeration order.
    pub fn strongest_odd_characteristic(&self, tol: f64) -> Result<(Characteristic, Vec<C>)> {
        let g = self.genus();
        let zero: Vec<C> = vec![self.omega.model().zero_like(); g];
        let mut best: Option<(f64, Characteristic, Vec<C>)> = None;
        for chi in half_characteristics(g) {
            if !chi.is_odd() {
                continue;
            }
            let grad = self.theta_gradient(&zero, &chi, tol)?;
            let mag = grad.iter().map(|v| CScalar::abs(v).to_f64().powi(2)).sum::<f64>().sqrt();
            if best.as_ref().map(|(m, _, _)| mag > *m).unwrap_or(true) {
                best = Some((mag, chi, grad));
            }
        }
        let (mag, chi, grad) = best.ok_or_else(|| {
            PrymError::SingularCharacteristic("no odd characteristic found".into())
        })?;
        if mag < 1e-10 {
            return Err(PrymError::SingularCharacteristic(format!(
                "all odd theta gradients vanish to {:.3e}",
                mag
            )));
        }
        Ok((chi, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::cauchy_derivatives;
    use num_complex::Complex64;

    type C64 = Complex64;

    fn mat(entries: &[&[(f64, f64)]]) -> CMat<C64> {
        CMat::from_rows(
            entries
                .iter()
                .map(|row| row.iter().map(|&(re, im)| C64::new(re, im)).collect())
                .collect(),
        )
    }

    fn sample_omega2() -> CMat<C64> {
        mat(&[
            &[(0.3, 2.0), (0.5, 0.3)],
            &[(0.5, 0.3), (-0.2, 1.7)],
        ])
    }

    #[test]
    fn genus_one_oracle_values() {
        let omega = mat(&[&[(0.0, 1.0)]]);
        let eng = ThetaEngine::new(&omega).unwrap();
        let zero = [C64::new(0.0, 0.0)];

        let t3 = eng.theta(&zero, &Characteristic::zero(1), 1e-14).unwrap();
        assert!((t3 - C64::new(1.0864348112133080145753161215, 0.0)).norm() < 1e-13);

        let t2 = eng.theta(&zero, &Characteristic::new(vec![1], vec![0]), 1e-14).unwrap();
        let t4 = eng.theta(&zero, &Characteristic::new(vec![0], vec![1]), 1e-14).unwrap();
        let reference = 0.9135791381561168214072425934;
        assert!((t2 - C64::new(reference, 0.0)).norm() < 1e-13);
        assert!((t4 - C64::new(reference, 0.0)).norm() < 1e-13);

        // Odd characteristic: value vanishes, derivative matches -pi t2 t3 t4.
        let odd = Characteristic::new(vec![1], vec![1]);
        assert!(eng.theta(&zero, &odd, 1e-14).unwrap().norm() < 1e-13);
        let grad = eng.theta_gradient(&zero, &odd, 1e-14).unwrap();
        assert!((grad[0] - C64::new(-2.8486946039877873160799850571, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn genus_one_high_precision_oracle() {
        use rug::Complex as RC;
        let bits = 160;
        let i = RC::with_val(bits, (0.0, 1.0));
        let omega = CMat::from_rows(vec![vec![i.clone()]]);
        let eng = ThetaEngine::new(&omega).unwrap();
        let zero = [RC::with_val(bits, (0.0, 0.0))];
        let t3 = eng.theta(&zero, &Characteristic::zero(1), 1e-40).unwrap();
        let reference = RC::with_val(bits, RC::parse("(1.08643481121330801457531612151022345707020571 0)").unwrap());
        let diff: RC = t3 - reference;
        assert!(CScalar::abs(&diff).to_f64() < 1e-40);
    }

    #[test]
    fn quasi_periodicity_genus_two() {
        let omega = sample_omega2();
        let eng = ThetaEngine::new(&omega).unwrap();
        let chi = Characteristic::zero(2);
        let w = [C64::new(0.17, 0.23), C64::new(-0.31, 0.11)];
        let m = [1i64, -2];
        let n = [2i64, 1];

        // Shift by omega*m + n picks up exp(-pi i m^t omega m - 2 pi i m^t w).
        let mut shifted = w;
        for j in 0..2 {
            for k in 0..2 {
                shifted[j] += *omega.at(j, k) * C64::new(m[k] as f64, 0.0);
            }
            shifted[j] += C64::new(n[j] as f64, 0.0);
        }
        let mut expo = C64::new(0.0, 0.0);
        for j in 0..2 {
            for k in 0..2 {
                expo -= *omega.at(j, k) * C64::new((m[j] * m[k]) as f64, 0.0);
            }
            expo -= C64::new(2.0 * m[j] as f64, 0.0) * w[j];
        }
        expo *= C64::new(0.0, std::f64::consts::PI);

        let lhs = eng.theta(&shifted, &chi, 1e-13).unwrap();
        let rhs = expo.exp() * eng.theta(&w, &chi, 1e-13).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn characteristic_shift_identity() {
        // theta[a,b](w) = exp(pi i a/2 . omega a/2 + 2 pi i a/2 . (w + b/2))
        //                 * theta(w + omega a/2 + b/2).
        let omega = sample_omega2();
        let eng = ThetaEngine::new(&omega).unwrap();
        let chi = Characteristic::new(vec![1, 0], vec![0, 1]);
        let w = [C64::new(0.05, 0.4), C64::new(0.21, -0.07)];
        let ah = [0.5, 0.0];
        let bh = [0.0, 0.5];

        let lhs = eng.theta(&w, &chi, 1e-13).unwrap();

        let mut arg = w;
        for j in 0..2 {
            for k in 0..2 {
                arg[j] += *omega.at(j, k) * C64::new(ah[k], 0.0);
            }
            arg[j] += C64::new(bh[j], 0.0);
        }
        let mut expo = C64::new(0.0, 0.0);
        for j in 0..2 {
            for k in 0..2 {
                expo += C64::new(ah[j] * ah[k], 0.0) * *omega.at(j, k);
            }
            expo += C64::new(2.0 * ah[j], 0.0) * (w[j] + C64::new(bh[j], 0.0));
        }
        expo *= C64::new(0.0, std::f64::consts::PI);
        let rhs = expo.exp() * eng.theta(&arg, &Characteristic::zero(2), 1e-13).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn jets_match_cauchy_derivatives() {
        let omega = sample_omega2();
        let eng = ThetaEngine::new(&omega).unwrap();
        let chi = Characteristic::new(vec![0, 1], vec![1, 1]);
        let w = [C64::new(0.12, 0.08), C64::new(-0.05, 0.19)];
        let dir = [C64::new(0.7, 0.2), C64::new(-0.4, 0.5)];

        let jets = eng.theta_jets(&w, &chi, &dir, 3, 1e-13).unwrap();

        let mut f = |t: &C64| {
            let shifted: Vec<C64> = (0..2).map(|j| w[j] + *t * dir[j]).collect();
            eng.theta(&shifted, &chi, 1e-13).unwrap()
        };
        let derivs =
            cauchy_derivatives(&mut f, &C64::new(0.0, 0.0), 0.3, 3, 1e-11).unwrap();

        let mut factorial = 1.0;
        for k in 0..=3 {
            if k > 0 {
                factorial *= k as f64;
            }
            // cauchy_derivatives returns true derivatives, jets too.
            let diff = (jets[k] - derivs[k]).norm();
            assert!(
                diff < 1e-9 * (1.0 + derivs[k].norm()),
                "jet {} mismatch {:.3e} (factorial {})",
                k,
                diff,
                factorial
            );
        }
    }

    #[test]
    fn gradient_and_hessian_match_jets() {
        let omega = sample_omega2();
        let eng = ThetaEngine::new(&omega).unwrap();
        let chi = Characteristic::zero(2);
        let w = [C64::new(0.11, 0.21), C64::new(0.02, -0.13)];

        let grad = eng.theta_gradient(&w, &chi, 1e-13).unwrap();
        let (val, grad2, hess) = eng.theta_hessian(&w, &chi, 1e-13).unwrap();
        let plain = eng.theta(&w, &chi, 1e-13).unwrap();
        assert!((val - plain).norm() < 1e-11);
        for k in 0..2 {
            assert!((grad[k] - grad2[k]).norm() < 1e-11);
        }

        // Directional second derivative along e0 + e1 equals summed Hessian.
        let dir = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let jets = eng.theta_jets(&w, &chi, &dir, 2, 1e-13).unwrap();
        let hsum = *hess.at(0, 0) + *hess.at(0, 1) + *hess.at(1, 0) + *hess.at(1, 1);
        assert!((jets[2] - hsum).norm() < 1e-10 * (1.0 + hsum.norm()));
        let gsum = grad[0] + grad[1];
        assert!((jets[1] - gsum).norm() < 1e-11 * (1.0 + gsum.norm()));
    }

    #[test]
    fn odd_characteristics_vanish_at_zero() {
        let omega = sample_omega2();
        let eng = ThetaEngine::new(&omega).unwrap();
        let zero = [C64::new(0.0, 0.0); 2];
        let mut odd_count = 0;
        for chi in half_characteristics(2) {
            let v = eng.theta(&zero, &chi, 1e-13).unwrap();
            if chi.is_odd() {
                odd_count += 1;
                assert!(v.norm() < 1e-12, "odd theta value {:.3e}", v.norm());
            } else {
                assert!(v.norm() > 1e-3, "even theta value {:.3e}", v.norm());
            }
        }
        assert_eq!(odd_count, 6);
        // Genus 5 has 496 odd characteristics.
        let odd5 = half_characteristics(5).iter().filter(|c| c.is_odd()).count();
        assert_eq!(odd5, 496);
    }

    #[test]
    fn strongest_odd_characteristic_has_nonzero_gradient() {
        let omega = sample_omega2();
        let eng = ThetaEngine::new(&omega).unwrap();
        let (chi, grad) = eng.strongest_odd_characteristic(1e-12).unwrap();
        assert!(chi.is_odd());
        let mag: f64 = grad.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(mag > 0.5, "gradient magnitude {:.3e}", mag);
    }

    #[test]
    fn near_singular_imaginary_part_is_rejected() {
        let omega = mat(&[
            &[(0.0, 1e-9), (0.0, 0.0)],
            &[(0.0, 0.0), (0.0, 1e-9)],
        ]);
        let eng = ThetaEngine::new(&omega).unwrap();
        let zero = [C64::new(0.0, 0.0); 2];
        match eng.theta(&zero, &Characteristic::zero(2), 1e-13) {
            Err(PrymError::LatticeBlowup(n)) => assert!(n > 1_000_000),
            other => panic!("expected lattice blowup, got {:?}", other.map(|v| v.norm())),
        }
    }
}
