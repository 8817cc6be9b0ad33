//! Period matrices of the cover and their involution eigenblocks.
//!
//! Raw periods are contour integrals of the monomial differentials over the
//! candidate tubes; everything after that is linear algebra against the
//! integer basis rows. The normalized matrix splits under the involution:
//! conjugating by T = [[I,I,0],[I,-I,0],[0,0,I]] must make it block diagonal,
//! with the top block twice the period matrix of the base curve and the
//! bottom block the Prym period matrix. The off-block leak is recorded, not
//! assumed.
//!
//! Homological coordinates are the periods of v over the odd cycles,
//! interleaved (alpha_1, beta_1, alpha_2, ...). Their dual role is the
//! variational identity: the derivative of either eigenblock along the i-th
//! coordinate is the integral of u_j u_k / v over the conjugate cycle, which
//! `variational_check` verifies against central differences of a deformed
//! family built on the same integer homology.

use rayon::prelude::*;

use crate::contour::XPath;
use crate::cover::{CoverCurve, LabeledPath, SheetSigns};
use crate::differentials::{holomorphic_basis, v_form, MonomialForm};
use crate::error::{PrymError, Result};
use crate::homology::{AdaptedHomology, Candidate};
use crate::linalg::{inverse, CMat};
use crate::poly::ComplexPolynomial;
use crate::quad::{integrate_fn, GaussLegendre, QuadratureEngine};
use crate::scalar::{CScalar, RScalar};

/// Evaluates a family of monomial differentials with y and w computed once
/// per node. Values are the coefficient functions of dx.
pub struct FormEvaluator<C: CScalar> {
    pub forms: Vec<MonomialForm<C>>,
}

impl<C: CScalar> FormEvaluator<C> {
    /// The full holomorphic basis followed by v.
    pub fn basis_with_v(cover: &CoverCurve<C>) -> Self {
        let mut forms = holomorphic_basis(cover);
        forms.push(v_form(cover));
        FormEvaluator { forms }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn values(&self, cover: &CoverCurve<C>, x: &C, signs: SheetSigns) -> Vec<C> {
        let y = cover.y_at(x, signs);
        let w = cover.w_at(x, signs);
        self.forms
            .iter()
            .map(|fm| {
                let mut val = fm.num.eval(x);
                for _ in 0..fm.y_pow {
                    val = val / &y;
                }
                for _ in 0..fm.w_pow {
                    val = val / &w;
                }
                val
            })
            .collect()
    }
}

/// Integral of a vector integrand along a labeled path, open or closed. The
/// integrand receives the point, the sheet label and dx/ds and returns the
/// full integrand values including the dx factor.
pub fn integrate_over_labeled<C: CScalar>(
    cover: &CoverCurve<C>,
    path: &XPath,
    labeled: &LabeledPath<C>,
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
    dims: usize,
    f: &(dyn Fn(&C, SheetSigns, &C) -> Vec<C> + Sync),
) -> Result<Vec<C>> {
    let model = cover.model();
    let mut acc = vec![model.zero_like(); dims];
    for piece in &labeled.pieces {
        if (piece.t_hi.clone() - &piece.t_lo).to_f64() == 0.0 {
            continue;
        }
        let out = integrate_fn(engine, dims, model, rel_tol, |t: &C| {
            let s = t.re();
            let x = cover.piece_point(path, piece, &s);
            let dx = cover.piece_velocity(path, piece, &s);
            f(&x, piece.signs, &dx)
        })?;
        for (a, v) in acc.iter_mut().zip(out.values) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Integral of a vector integrand over one candidate loop.
pub fn integrate_over_candidate<C: CScalar>(
    cover: &CoverCurve<C>,
    cand: &Candidate<C>,
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
    dims: usize,
    f: &(dyn Fn(&C, SheetSigns, &C) -> Vec<C> + Sync),
) -> Result<Vec<C>> {
    integrate_over_labeled(cover, &cand.path, &cand.labeled, engine, rel_tol, dims, f)
}

/// Integral over an integer combination of candidates with denominator `den`.
pub fn integrate_over_class<C: CScalar>(
    cover: &CoverCurve<C>,
    candidates: &[Candidate<C>],
    row: &[i64],
    den: i64,
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
    dims: usize,
    f: &(dyn Fn(&C, SheetSigns, &C) -> Vec<C> + Sync),
) -> Result<Vec<C>> {
    let model = cover.model();
    let mut acc = vec![model.zero_like(); dims];
    for (k, &coeff) in row.iter().enumerate() {
        if coeff == 0 {
            continue;
        }
        let vals = integrate_over_candidate(cover, &candidates[k], engine, rel_tol, dims, f)?;
        let s = model.like(coeff as f64 / den as f64, 0.0);
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v * &s;
        }
    }
    Ok(acc)
}

/// Candidate-by-form period table; the last column is v. Only candidates
/// carrying weight in some basis row are integrated, one per involution
/// orbit: the partner's row follows from the parity of each form.
fn raw_period_table<C: CScalar>(
    cover: &CoverCurve<C>,
    candidates: &[Candidate<C>],
    mu: &[usize],
    used: &[bool],
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
) -> Result<CMat<C>> {
    let ev = FormEvaluator::basis_with_v(cover);
    let dims = ev.len();
    let model = cover.model().clone();
    let g = cover.genus;
    let reps: Vec<usize> = (0..candidates.len())
        .filter(|&k| (used[k] || used[mu[k]]) && k <= mu[k])
        .collect();
    let rows: Result<Vec<(usize, Vec<C>)>> = reps
        .par_iter()
        .map(|&k| {
            let vals = integrate_over_candidate(
                cover,
                &candidates[k],
                engine,
                rel_tol,
                dims,
                &|x, s, dx| {
                    ev.values(cover, x, s)
                        .into_iter()
                        .map(|v| v * dx)
                        .collect()
                },
            )?;
            Ok((k, vals))
        })
        .collect();
    let mut table = CMat::zeros(&model, candidates.len(), dims);
    for (k, vals) in rows? {
        let mk = mu[k];
        for (j, v) in vals.iter().enumerate() {
            if mk != k {
                *table.at_mut(mk, j) = if j >= g { -v.clone() } else { v.clone() };
            }
            *table.at_mut(k, j) = v.clone();
        }
    }
    Ok(table)
}

fn combo_row<C: CScalar>(table: &CMat<C>, row: &[i64], den: i64) -> Vec<C> {
    let model = table.model();
    let mut out = vec![model.zero_like(); table.cols];
    for (k, &c) in row.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let s = model.like(c as f64 / den as f64, 0.0);
        for (slot, o) in out.iter_mut().enumerate() {
            *o += table.at(k, slot).clone() * &s;
        }
    }
    out
}

pub struct PeriodData<C: CScalar> {
    pub genus: usize,
    /// Candidate-by-form raw periods, v in the last column.
    pub raw: CMat<C>,
    /// Row i holds the monomial coefficients of the i-th normalized form.
    pub normalization: CMat<C>,
    pub omega_hat: CMat<C>,
    pub omega_plus: CMat<C>,
    pub omega_minus: CMat<C>,
    /// Relative size of the off-diagonal blocks after conjugating by T.
    pub block_residual: f64,
    /// Periods of v over the odd cycles: z[2i] over alpha_i, z[2i+1] over beta_i.
    pub z: Vec<C>,
    /// Largest period of v over the even cycles, relative to max |z|.
    pub v_plus_leak: f64,
    /// Conditioning proxy of the normalization solve.
    pub cond_normalization: f64,
}

impl<C: CScalar> PeriodData<C> {
    pub fn ghat(&self) -> usize {
        4 * self.genus - 3
    }

    pub fn n_minus(&self) -> usize {
        3 * self.genus - 3
    }

    /// Monomial coefficient rows of u+_j = u_j + u*_j.
    pub fn u_plus_rows(&self) -> CMat<C> {
        let g = self.genus;
        let n = self.normalization.cols;
        let mut out = CMat::zeros(self.normalization.model(), g, n);
        for j in 0..g {
            for k in 0..n {
                *out.at_mut(j, k) =
                    self.normalization.at(j, k).clone() + self.normalization.at(g + j, k);
            }
        }
        out
    }

    /// Monomial coefficient rows of u-_i: differences first, then the tilde forms.
    pub fn u_minus_rows(&self) -> CMat<C> {
        let g = self.genus;
        let n = self.normalization.cols;
        let mut out = CMat::zeros(self.normalization.model(), 3 * g - 3, n);
        for l in 0..g {
            for k in 0..n {
                *out.at_mut(l, k) =
                    self.normalization.at(l, k).clone() - self.normalization.at(g + l, k);
            }
        }
        for t in 0..(2 * g - 3) {
            for k in 0..n {
                *out.at_mut(g + t, k) = self.normalization.at(2 * g + t, k).clone();
            }
        }
        out
    }
}

pub fn period_data_base<C: CScalar>(
    cover: &CoverCurve<C>,
    hom: &AdaptedHomology<C>,
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
) -> Result<PeriodData<C>> {
    period_data(cover, hom, &hom.candidates, engine, rel_tol)
}

/// Periods on `cover` against the integer rows of `hom`. The candidates must
/// be relabelings of `hom.candidates` on `cover`, which allows reusing one
/// homology across precisions and along families.
pub fn period_data<C: CScalar, B: CScalar>(
    cover: &CoverCurve<C>,
    hom: &AdaptedHomology<B>,
    candidates: &[Candidate<C>],
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
) -> Result<PeriodData<C>> {
    let g = cover.genus;
    let ghat = 4 * g - 3;
    let n = candidates.len();
    let mut used = vec![false; n];
    for i in 0..2 * ghat {
        for (k, u) in used.iter_mut().enumerate() {
            if hom.basis[(i, k)] != 0 {
                *u = true;
            }
        }
    }
    let raw = raw_period_table(cover, candidates, &hom.mu, &used, engine, rel_tol)?;
    let model = raw.model().clone();

    let mut a_hat = CMat::zeros(&model, ghat, ghat);
    let mut b_hat = CMat::zeros(&model, ghat, ghat);
    for i in 0..ghat {
        let ra = combo_row(&raw, hom.basis.row(i), 1);
        let rb = combo_row(&raw, hom.basis.row(ghat + i), 1);
        for j in 0..ghat {
            *a_hat.at_mut(i, j) = ra[j].clone();
            *b_hat.at_mut(i, j) = rb[j].clone();
        }
    }

    let a_t = a_hat.transpose();
    let normalization = inverse(&a_t)?;
    let cond_normalization = a_t.max_norm() * normalization.max_norm() * ghat as f64;
    if cond_normalization > 1e8 {
        return Err(PrymError::IllConditioned(format!(
            "normalization solve conditioning {cond_normalization:.2e}"
        )));
    }
    let omega_hat = b_hat.matmul(&inverse(&a_hat)?);

    // T-conjugation splits the eigenblocks; the leak is the check.
    let mut t = CMat::zeros(&model, ghat, ghat);
    for j in 0..g {
        *t.at_mut(j, j) = model.one_like();
        *t.at_mut(j, g + j) = model.one_like();
        *t.at_mut(g + j, j) = model.one_like();
        *t.at_mut(g + j, g + j) = -model.one_like();
    }
    for k in 0..2 * g - 3 {
        *t.at_mut(2 * g + k, 2 * g + k) = model.one_like();
    }
    let m = t.matmul(&omega_hat).matmul(&t.transpose());
    let mut omega_plus = CMat::zeros(&model, g, g);
    let nm = 3 * g - 3;
    let mut omega_minus = CMat::zeros(&model, nm, nm);
    let mut leak = 0.0f64;
    for i in 0..ghat {
        for j in 0..ghat {
            match (i < g, j < g) {
                (true, true) => *omega_plus.at_mut(i, j) = m.at(i, j).clone(),
                (false, false) => *omega_minus.at_mut(i - g, j - g) = m.at(i, j).clone(),
                _ => leak = leak.max(m.at(i, j).abs().to_f64()),
            }
        }
    }
    let block_residual = leak / m.max_norm().max(1e-300);

    let vcol = ghat;
    let mut z = Vec::with_capacity(2 * nm);
    for i in 0..nm {
        let (ra, da) = hom.minus_alpha(i);
        let (rb, db) = hom.minus_beta(i);
        z.push(combo_row(&raw, &ra, da)[vcol].clone());
        z.push(combo_row(&raw, &rb, db)[vcol].clone());
    }
    let zmax = z.iter().map(|v| v.abs().to_f64()).fold(0.0f64, f64::max);
    let mut plus_leak = 0.0f64;
    for j in 0..g {
        let (ra, da) = hom.plus_alpha(j);
        let (rb, db) = hom.plus_beta(j);
        plus_leak = plus_leak.max(combo_row(&raw, &ra, da)[vcol].abs().to_f64());
        plus_leak = plus_leak.max(combo_row(&raw, &rb, db)[vcol].abs().to_f64());
    }

    Ok(PeriodData {
        genus: g,
        raw,
        normalization,
        omega_hat,
        omega_plus,
        omega_minus,
        block_residual,
        z,
        v_plus_leak: plus_leak / zmax.max(1e-300),
        cond_normalization,
    })
}

// ---------------------------------------------------------------------------
// base-curve period oracle

/// Periods of x^j dx/y over a closed x-plane loop, evaluated by analytic
/// continuation of y along the contour instead of the global cut structure.
/// The starting branch is anchored to the reference square root at the start
/// point, which is the label convention of the tube candidates.
fn continued_base_periods<C: CScalar>(
    cover: &CoverCurve<C>,
    path: &crate::contour::XPath,
    rel_tol: f64,
    dims: usize,
) -> Result<Vec<C>> {
    let model = cover.model();
    let bits = (-rel_tol.log2()) as u32 + 8;
    let gl: GaussLegendre<C> = GaussLegendre::with_order(12);
    let nodes = gl.sorted_nodes(model, bits);
    let x0 = path.start();
    let y0 = cover.yhat(&model.like(x0.re, x0.im));

    let mut prev: Option<Vec<C>> = None;
    let mut div = 1usize;
    'refine: while div <= 1 << 10 {
        let mut acc = vec![model.zero_like(); dims];
        let mut y_prev = y0.clone();
        for seg in &path.segments {
            let panels = div * (1 + (3.0 * seg.approx_len()) as usize);
            for p in 0..panels {
                let lo = p as f64 / panels as f64;
                let half = 0.5 / panels as f64;
                for (xn, wn) in &nodes {
                    let t = model.like(lo + half, 0.0) + xn.clone() * model.like(half, 0.0);
                    let x = seg.point_p(model, &t);
                    let dx = seg.velocity_p(model, &t) * model.like(half, 0.0);
                    let mut y = cover.p.eval(&x).sqrt();
                    let d_keep = (y.clone() - &y_prev).abs().to_f64();
                    let d_flip = (y.clone() + &y_prev).abs().to_f64();
                    if d_flip < d_keep {
                        y = -y;
                    }
                    if d_keep.min(d_flip) > 0.7 * CScalar::abs(&y).to_f64() {
                        div *= 2;
                        continue 'refine;
                    }
                    y_prev = y.clone();
                    let mut xp = model.one_like();
                    for a in acc.iter_mut().take(dims) {
                        *a += xp.clone() / &y * &dx * wn;
                        xp = xp * &x;
                    }
                }
            }
        }
        if (y_prev - &y0).abs().to_f64() > CScalar::abs(&y0).to_f64() {
            return Err(PrymError::TrackingAmbiguity {
                near: format!("{x0}"),
            });
        }
        if let Some(pv) = &prev {
            let scale = acc
                .iter()
                .map(|v| v.abs().to_f64())
                .fold(0.0f64, f64::max)
                .max(1e-300);
            let gap = acc
                .iter()
                .zip(pv)
                .map(|(a, b)| (a.clone() - b).abs().to_f64())
                .fold(0.0f64, f64::max);
            if gap <= rel_tol * scale {
                return Ok(acc);
            }
        }
        prev = Some(acc);
        div *= 2;
    }
    Err(PrymError::QuadratureFailure {
        last: [f64::INFINITY, 1.0],
        tol: rel_tol,
    })
}

/// Period matrix of the base curve over the pushed-down symplectic basis,
/// computed entirely with the continuation oracle. Twice this matrix must
/// reproduce the even eigenblock.
pub fn omega_base_oracle<C: CScalar, B: CScalar>(
    cover: &CoverCurve<C>,
    hom: &AdaptedHomology<B>,
    rel_tol: f64,
) -> Result<CMat<C>> {
    let g = cover.genus;
    let model = cover.model().clone();
    let nd = hom.downstairs_candidates.len();
    let mut per = CMat::zeros(&model, nd, g);
    let vals: Result<Vec<Vec<C>>> = hom
        .downstairs_candidates
        .par_iter()
        .map(|&ci| continued_base_periods(cover, &hom.candidates[ci].path, rel_tol, g))
        .collect();
    for (slot, vs) in vals?.into_iter().enumerate() {
        for j in 0..g {
            *per.at_mut(slot, j) = vs[j].clone();
        }
    }
    let mut ac = CMat::zeros(&model, g, g);
    let mut bc = CMat::zeros(&model, g, g);
    for i in 0..g {
        for k in 0..nd {
            let ca = hom.downstairs_a[(i, k)];
            let cb = hom.downstairs_b[(i, k)];
            for j in 0..g {
                if ca != 0 {
                    *ac.at_mut(i, j) += per.at(k, j).clone() * model.like(ca as f64, 0.0);
                }
                if cb != 0 {
                    *bc.at_mut(i, j) += per.at(k, j).clone() * model.like(cb as f64, 0.0);
                }
            }
        }
    }
    Ok(bc.matmul(&inverse(&ac)?))
}

// ---------------------------------------------------------------------------
// variational identity

/// Derivatives of both eigenblocks along every homological coordinate,
/// as integrals of u_j u_k / v over the conjugate odd cycles.
pub struct OmegaDerivatives<C: CScalar> {
    pub d_plus: Vec<CMat<C>>,
    pub d_minus: Vec<CMat<C>>,
}

pub fn omega_z_derivatives<C: CScalar, B: CScalar>(
    cover: &CoverCurve<C>,
    hom: &AdaptedHomology<B>,
    candidates: &[Candidate<C>],
    data: &PeriodData<C>,
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
) -> Result<OmegaDerivatives<C>> {
    let g = cover.genus;
    let nm = 3 * g - 3;
    let model = cover.model().clone();
    let up = data.u_plus_rows();
    let um = data.u_minus_rows();
    let ev = FormEvaluator::basis_with_v(cover);
    let np = g * (g + 1) / 2;
    let nn = nm * (nm + 1) / 2;
    let dims = np + nn;

    let integrand = |x: &C, s: SheetSigns, dx: &C| -> Vec<C> {
        let vals = ev.values(cover, x, s);
        let vv = vals[ev.len() - 1].clone();
        let dot = |rows: &CMat<C>, i: usize| -> C {
            let mut acc = model.zero_like();
            for k in 0..rows.cols {
                acc += rows.at(i, k).clone() * &vals[k];
            }
            acc
        };
        let upv: Vec<C> = (0..g).map(|i| dot(&up, i)).collect();
        let umv: Vec<C> = (0..nm).map(|i| dot(&um, i)).collect();
        let mut out = Vec::with_capacity(dims);
        for j in 0..g {
            for k in j..g {
                out.push(upv[j].clone() * &upv[k] / &vv * dx);
            }
        }
        for j in 0..nm {
            for k in j..nm {
                out.push(umv[j].clone() * &umv[k] / &vv * dx);
            }
        }
        out
    };

    let mut d_plus = Vec::with_capacity(2 * nm);
    let mut d_minus = Vec::with_capacity(2 * nm);
    for i in 0..nm {
        // conjugate cycles: minus the beta partner for an alpha coordinate,
        // the alpha partner for a beta coordinate; the sign is pinned by the
        // finite-difference oracle in the tests
        let (rb, db) = hom.minus_beta(i);
        let (ra, da) = hom.minus_alpha(i);
        for (row, den, sign) in [(rb, db, -1.0), (ra, da, 1.0)] {
            let vals =
                integrate_over_class(cover, candidates, &row, den, engine, rel_tol, dims, &integrand)?;
            let mut mp = CMat::zeros(&model, g, g);
            let mut mm = CMat::zeros(&model, nm, nm);
            let mut idx = 0usize;
            for j in 0..g {
                for k in j..g {
                    let v = vals[idx].clone() * model.like(sign, 0.0);
                    *mp.at_mut(j, k) = v.clone();
                    *mp.at_mut(k, j) = v;
                    idx += 1;
                }
            }
            for j in 0..nm {
                for k in j..nm {
                    let v = vals[idx].clone() * model.like(sign, 0.0);
                    *mm.at_mut(j, k) = v.clone();
                    *mm.at_mut(k, j) = v;
                    idx += 1;
                }
            }
            d_plus.push(mp);
            d_minus.push(mm);
        }
    }
    Ok(OmegaDerivatives { d_plus, d_minus })
}

pub struct VariationalReport {
    /// Relative error of the predicted differential at h and h/2.
    pub rel_err_plus: [f64; 2],
    pub rel_err_minus: [f64; 2],
    pub ratio_plus: f64,
    pub ratio_minus: f64,
}

/// Central-difference check of the variational identity along the coefficient
/// direction (dp, df). The deformed covers reuse the base homology rows and
/// the base cut-ray direction, so the coordinates vary smoothly.
pub fn variational_check<C: CScalar>(
    cover: &CoverCurve<C>,
    hom: &AdaptedHomology<C>,
    base: &PeriodData<C>,
    dp: &ComplexPolynomial<C>,
    df: &ComplexPolynomial<C>,
    h: f64,
    engine: &dyn QuadratureEngine<C>,
    rel_tol: f64,
) -> Result<VariationalReport> {
    let derivs = omega_z_derivatives(cover, hom, &hom.candidates, base, engine, rel_tol)?;

    let eval_at = |s: f64| -> Result<PeriodData<C>> {
        let model = cover.model();
        let ps = cover.p.add(&dp.scale(&model.like(s, 0.0)));
        let fs = cover.f.add(&df.scale(&model.like(s, 0.0)));
        let def = CoverCurve::new_with_ray(
            cover.genus,
            ps,
            fs,
            cover.cluster_radius,
            cover.ray_angle,
        )?;
        let cands = hom.relabel_candidates(&def)?;
        period_data(&def, hom, &cands, engine, rel_tol)
    };

    let mut errs_p = [0.0f64; 2];
    let mut errs_m = [0.0f64; 2];
    for (slot, step) in [h, 0.5 * h].iter().enumerate() {
        let hi = eval_at(*step)?;
        let lo = eval_at(-*step)?;
        let dz: Vec<C> = hi
            .z
            .iter()
            .zip(lo.z.iter())
            .map(|(a, b)| (a.clone() - b) * cover.model().like(0.5, 0.0))
            .collect();
        let d_op = hi
            .omega_plus
            .sub(&lo.omega_plus)
            .scale(&cover.model().like(0.5, 0.0));
        let d_om = hi
            .omega_minus
            .sub(&lo.omega_minus)
            .scale(&cover.model().like(0.5, 0.0));
        let mut pred_p = CMat::zeros(cover.model(), d_op.rows, d_op.cols);
        let mut pred_m = CMat::zeros(cover.model(), d_om.rows, d_om.cols);
        for (i, dzi) in dz.iter().enumerate() {
            pred_p = pred_p.add(&derivs.d_plus[i].scale(dzi));
            pred_m = pred_m.add(&derivs.d_minus[i].scale(dzi));
        }
        errs_p[slot] = pred_p.sub(&d_op).max_norm() / d_op.max_norm().max(1e-300);
        errs_m[slot] = pred_m.sub(&d_om).max_norm() / d_om.max_norm().max(1e-300);
    }
    Ok(VariationalReport {
        rel_err_plus: errs_p,
        rel_err_minus: errs_m,
        ratio_plus: errs_p[0] / errs_p[1].max(1e-300),
        ratio_minus: errs_m[0] / errs_m[1].max(1e-300),
    })
}
