//! Geometry of the double cover w^2 = f(x) over the hyperelliptic curve
//! y^2 = P(x).
//!
//! Sheets are labeled globally: yhat and what are fixed single-valued square
//! roots of P and f, each a product of per-root square-root factors cut along
//! parallel rays. A point of the cover is (x, sy, sw) with y = sy * yhat(x),
//! w = sw * what(x). Paths get split where they cross a cut ray so that the
//! sign pair is constant on every piece; the tracked value sy * yhat stays
//! continuous across the splits because the label flip cancels the jump of
//! yhat.

use num_complex::Complex64;

use crate::contour::{ContourSegment, XPath};
use crate::error::{PrymError, Result};
use crate::poly::{simple_roots, ComplexPolynomial};
use crate::scalar::{CScalar, RScalar};

/// Margin (in segment parameter) below which a crossing counts as sitting on
/// a segment endpoint.
const T_MARGIN: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SheetSigns {
    pub y: i8,
    pub w: i8,
}

impl SheetSigns {
    pub fn base() -> Self {
        SheetSigns { y: 1, w: 1 }
    }

    /// Involution of the cover over the hyperelliptic curve: w changes sign.
    pub fn mu(self) -> Self {
        SheetSigns {
            y: self.y,
            w: -self.w,
        }
    }

    /// Lift of the hyperelliptic involution: y changes sign.
    pub fn hyperelliptic(self) -> Self {
        SheetSigns {
            y: -self.y,
            w: self.w,
        }
    }
}

/// A crossing of a contour segment with one branch-cut ray.
#[derive(Debug, Clone)]
pub struct CutCrossing<C: CScalar> {
    pub t: C::Re,
    pub tf: f64,
    /// true: the w-label flips (f-root ray); false: the y-label flips.
    pub flips_w: bool,
    pub root_index: usize,
}

/// Maximal sub-interval of one segment on which both sheet labels are constant.
#[derive(Debug, Clone)]
pub struct PathPiece<C: CScalar> {
    pub seg_index: usize,
    pub t_lo: C::Re,
    pub t_hi: C::Re,
    pub signs: SheetSigns,
    pub path_start: bool,
    pub path_end: bool,
}

#[derive(Debug, Clone)]
pub struct LabeledPath<C: CScalar> {
    pub pieces: Vec<PathPiece<C>>,
    pub start: SheetSigns,
    pub end: SheetSigns,
}

pub struct CoverCurve<C: CScalar> {
    pub genus: usize,
    pub p: ComplexPolynomial<C>,
    pub f: ComplexPolynomial<C>,
    pub p_roots: Vec<C>,
    pub f_roots: Vec<C>,
    /// Common direction (radians) of all branch-cut rays.
    pub ray_angle: f64,
    /// Largest pairwise distance between branch points, floored at 1.
    pub geom_scale: f64,
    /// Root-clustering threshold the curve was validated against.
    pub cluster_radius: f64,
    rot: C,
    k_p: C,
    k_f: C,
    model: C,
}

impl<C: CScalar> CoverCurve<C> {
    pub fn new(
        genus: usize,
        p: ComplexPolynomial<C>,
        f: ComplexPolynomial<C>,
        cluster_radius: f64,
    ) -> Result<Self> {
        Self::build(genus, p, f, cluster_radius, None)
    }

    /// Same curve with a pinned cut-ray direction. Rebuilds along a family or
    /// at another precision must share the ray so that sheet labels carry over.
    pub fn new_with_ray(
        genus: usize,
        p: ComplexPolynomial<C>,
        f: ComplexPolynomial<C>,
        cluster_radius: f64,
        ray_angle: f64,
    ) -> Result<Self> {
        Self::build(genus, p, f, cluster_radius, Some(ray_angle))
    }

    fn build(
        genus: usize,
        p: ComplexPolynomial<C>,
        f: ComplexPolynomial<C>,
        cluster_radius: f64,
        pinned_ray: Option<f64>,
    ) -> Result<Self> {
        if genus < 2 {
            return Err(PrymError::DegenerateInput(
                "genus must be at least 2".into(),
            ));
        }
        let p = p.trimmed();
        let f = f.trimmed();
        let dp = p.degree();
        let df = f.degree();
        if dp != 2 * genus + 1 && dp != 2 * genus + 2 {
            return Err(PrymError::DegenerateInput(format!(
                "deg P = {dp} incompatible with genus {genus}"
            )));
        }
        if df != 2 * genus - 2 {
            return Err(PrymError::DegenerateInput(format!(
                "deg f = {df}, expected {}",
                2 * genus - 2
            )));
        }
        let p_roots = simple_roots(&p, cluster_radius)?;
        let f_roots = simple_roots(&f, cluster_radius)?;

        let shadows: Vec<Complex64> = p_roots
            .iter()
            .chain(f_roots.iter())
            .map(|r| r.to_c64())
            .collect();
        let mut geom_scale = 1.0f64;
        for i in 0..shadows.len() {
            for j in (i + 1)..shadows.len() {
                geom_scale = geom_scale.max((shadows[i] - shadows[j]).norm());
            }
        }
        let mut min_cross_gap = f64::INFINITY;
        for pr in &p_roots {
            for fr in &f_roots {
                min_cross_gap = min_cross_gap.min((pr.clone() - fr).abs().to_f64());
            }
        }
        if min_cross_gap < 1e3 * cluster_radius * geom_scale {
            return Err(PrymError::DegenerateInput(
                "a root of f collides with a branch point of the curve".into(),
            ));
        }

        let ray_angle = pinned_ray.unwrap_or_else(|| choose_ray(&shadows, geom_scale));

        let model = p.coeffs.last().expect("trimmed polynomial").clone();
        // rot = -exp(-i*angle): principal sqrt of z*rot has its jump exactly on
        // the ray {r + t*exp(i*angle), t > 0}
        let rot = model.cis_like(std::f64::consts::PI - ray_angle);
        let lc_p = p.coeffs.last().unwrap().clone();
        let lc_f = f.coeffs.last().unwrap().clone();
        let k_p = lc_p.sqrt() / rot.clone().sqrt().powi(dp as i32);
        let k_f = lc_f.sqrt() / rot.clone().sqrt().powi(df as i32);

        Ok(CoverCurve {
            genus,
            p,
            f,
            p_roots,
            f_roots,
            ray_angle,
            geom_scale,
            cluster_radius,
            rot,
            k_p,
            k_f,
            model,
        })
    }

    pub fn genus_cover(&self) -> usize {
        4 * self.genus - 3
    }

    pub fn model(&self) -> &C {
        &self.model
    }

    /// Reference square root of P; jumps across the cut rays of the P-roots.
    pub fn yhat(&self, x: &C) -> C {
        let mut acc = self.k_p.clone();
        for r in &self.p_roots {
            acc = acc * ((x.clone() - r) * &self.rot).sqrt();
        }
        acc
    }

    /// Reference square root of f; jumps across the cut rays of the f-roots.
    pub fn what(&self, x: &C) -> C {
        let mut acc = self.k_f.clone();
        for r in &self.f_roots {
            acc = acc * ((x.clone() - r) * &self.rot).sqrt();
        }
        acc
    }

    pub fn y_at(&self, x: &C, signs: SheetSigns) -> C {
        let v = self.yhat(x);
        if signs.y < 0 {
            -v
        } else {
            v
        }
    }

    pub fn w_at(&self, x: &C, signs: SheetSigns) -> C {
        let v = self.what(x);
        if signs.w < 0 {
            -v
        } else {
            v
        }
    }

    pub fn branch_points_f64(&self) -> Vec<Complex64> {
        self.p_roots
            .iter()
            .chain(self.f_roots.iter())
            .map(|r| r.to_c64())
            .collect()
    }

    /// Smallest distance between distinct branch points.
    pub fn min_root_gap(&self) -> f64 {
        let pts = self.branch_points_f64();
        let mut gap = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                gap = gap.min((pts[i] - pts[j]).norm());
            }
        }
        gap
    }

    /// All crossings of `seg` with cut rays, sorted along the segment.
    pub fn cut_crossings(&self, seg: &ContourSegment) -> Result<Vec<CutCrossing<C>>> {
        let mut out = Vec::new();
        for (idx, r) in self.p_roots.iter().enumerate() {
            self.segment_ray_crossings(seg, r, false, idx, &mut out)?;
        }
        for (idx, r) in self.f_roots.iter().enumerate() {
            self.segment_ray_crossings(seg, r, true, idx, &mut out)?;
        }
        out.sort_by(|a, b| {
            (a.tf, a.flips_w, a.root_index)
                .partial_cmp(&(b.tf, b.flips_w, b.root_index))
                .unwrap()
        });
        Ok(out)
    }

    fn segment_ray_crossings(
        &self,
        seg: &ContourSegment,
        root: &C,
        flips_w: bool,
        root_index: usize,
        out: &mut Vec<CutCrossing<C>>,
    ) -> Result<()> {
        let e = self.model.cis_like(-self.ray_angle);
        match seg {
            ContourSegment::Line { from, to } => {
                let u0 = (self.model.like(from.re, from.im) - root) * &e;
                let u1 = (self.model.like(to.re, to.im) - root) * &e;
                let den = u1.im() - &u0.im();
                let scale = self.geom_scale;
                if den.to_f64().abs() < 1e-13 * scale {
                    if u0.im().to_f64().abs() < 1e-13 * scale
                        && (u0.re().to_f64() > 0.0 || u1.re().to_f64() > 0.0)
                    {
                        return Err(PrymError::TrackingAmbiguity {
                            near: root.to_c64().to_string(),
                        });
                    }
                    return Ok(());
                }
                let t = -u0.im() / den;
                let tf = t.to_f64();
                if !(0.0..=1.0).contains(&tf) {
                    return Ok(());
                }
                let ru = u0.re() * (t.rlike(1.0) - &t) + u1.re() * &t;
                let ruf = ru.to_f64();
                if tf < T_MARGIN || tf > 1.0 - T_MARGIN {
                    // endpoint on the ray: harmless if at the ray apex (the
                    // root itself, where paths are allowed to start or end)
                    if ruf > 1e-9 * scale {
                        return Err(PrymError::TrackingAmbiguity {
                            near: root.to_c64().to_string(),
                        });
                    }
                    return Ok(());
                }
                if ruf <= 0.0 {
                    return Ok(());
                }
                out.push(CutCrossing {
                    t,
                    tf,
                    flips_w,
                    root_index,
                });
            }
            ContourSegment::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let a_im = ((self.model.like(center.re, center.im) - root) * &e).im();
                let rho = a_im.rlike(*radius);
                let q = -a_im / &rho;
                let qf = q.to_f64();
                if qf.abs() > 1.0 - 1e-9 {
                    if qf.abs() < 1.0 + 1e-9 {
                        // near-tangency: crossing pair too close to separate
                        let touches = self.arc_near_ray(*center, *radius, *theta0, *theta1, root);
                        if touches {
                            return Err(PrymError::TrackingAmbiguity {
                                near: root.to_c64().to_string(),
                            });
                        }
                    }
                    return Ok(());
                }
                let s = q.asin();
                let pi = self.model.pi_like().re();
                let alpha = s.rlike(self.ray_angle);
                let bases = [alpha.clone() + &s, alpha + &pi - &s];
                let lo = theta0.min(*theta1);
                let hi = theta0.max(*theta1);
                for base in bases {
                    let bf = base.to_f64();
                    let kmin = ((lo - bf) / (2.0 * std::f64::consts::PI)).floor() as i64 - 1;
                    let kmax = ((hi - bf) / (2.0 * std::f64::consts::PI)).ceil() as i64 + 1;
                    for k in kmin..=kmax {
                        let two_pi_k = base.rlike(2.0 * k as f64) * &pi;
                        let theta = base.clone() + two_pi_k;
                        let thf = theta.to_f64();
                        if thf < lo - 1e-12 || thf > hi + 1e-12 {
                            continue;
                        }
                        let t = (theta.clone() - base.rlike(*theta0))
                            / base.rlike(theta1 - theta0);
                        let tf = t.to_f64();
                        if !(0.0..=1.0).contains(&tf) {
                            continue;
                        }
                        // positive-side check: the point must be on the ray
                        let point = self.model.like(center.re, center.im)
                            + C::from_re(rho.clone())
                                * C::from_re(theta).mul_i().exp();
                        let ru = ((point - root) * &e).re();
                        let ruf = ru.to_f64();
                        if tf < T_MARGIN || tf > 1.0 - T_MARGIN {
                            if ruf > 1e-9 * self.geom_scale {
                                return Err(PrymError::TrackingAmbiguity {
                                    near: root.to_c64().to_string(),
                                });
                            }
                            continue;
                        }
                        if ruf <= 0.0 {
                            continue;
                        }
                        out.push(CutCrossing {
                            t,
                            tf,
                            flips_w,
                            root_index,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// f64 check whether an arc passes close to the ray of `root` at all.
    fn arc_near_ray(&self, center: Complex64, radius: f64, th0: f64, th1: f64, root: &C) -> bool {
        let r = root.to_c64();
        let n = 64;
        for k in 0..=n {
            let th = th0 + (th1 - th0) * k as f64 / n as f64;
            let p = center + Complex64::from_polar(radius, th);
            let u = (p - r) * Complex64::from_polar(1.0, -self.ray_angle);
            if u.re > 0.0 && u.im.abs() < 1e-7 * self.geom_scale {
                return true;
            }
        }
        false
    }

    /// Splits a path at every cut crossing and propagates the sheet labels.
    pub fn label_path(&self, path: &XPath, start: SheetSigns) -> Result<LabeledPath<C>> {
        let mut pieces = Vec::new();
        let mut signs = start;
        let zero = self.model.re();
        let nseg = path.segments.len();
        for (seg_index, seg) in path.segments.iter().enumerate() {
            let crossings = self.cut_crossings(seg)?;
            let mut t_lo = zero.rlike(0.0);
            for cr in crossings {
                pieces.push(PathPiece {
                    seg_index,
                    t_lo: t_lo.clone(),
                    t_hi: cr.t.clone(),
                    signs,
                    path_start: seg_index == 0 && t_lo.to_f64() == 0.0,
                    path_end: false,
                });
                if cr.flips_w {
                    signs.w = -signs.w;
                } else {
                    signs.y = -signs.y;
                }
                t_lo = cr.t;
            }
            pieces.push(PathPiece {
                seg_index,
                t_lo: t_lo.clone(),
                t_hi: zero.rlike(1.0),
                signs,
                path_start: seg_index == 0 && t_lo.to_f64() == 0.0,
                path_end: seg_index + 1 == nseg,
            });
        }
        Ok(LabeledPath {
            pieces,
            start,
            end: signs,
        })
    }

    /// Point of a piece at local parameter `s` in [0,1], working precision.
    pub fn piece_point(&self, path: &XPath, piece: &PathPiece<C>, s: &C::Re) -> C {
        let t = piece.t_lo.clone() + (piece.t_hi.clone() - &piece.t_lo) * s;
        path.segments[piece.seg_index].point_p(&self.model, &C::from_re(t))
    }

    /// dx/ds on a piece (segment velocity times the interval length).
    pub fn piece_velocity(&self, path: &XPath, piece: &PathPiece<C>, s: &C::Re) -> C {
        let span = piece.t_hi.clone() - &piece.t_lo;
        let t = piece.t_lo.clone() + span.clone() * s;
        path.segments[piece.seg_index].velocity_p(&self.model, &C::from_re(t)) * C::from_re(span)
    }
}

/// Picks a shared ray direction so no branch point sits near the cut ray of
/// another; candidates sweep a full turn starting near straight down.
fn choose_ray(pts: &[Complex64], scale: f64) -> f64 {
    let mut best = (f64::NEG_INFINITY, -std::f64::consts::FRAC_PI_2 + 0.318309886);
    for k in 0..96 {
        let a = -std::f64::consts::FRAC_PI_2 + 0.318309886 + k as f64 * 0.0654498469;
        let rot = Complex64::from_polar(1.0, -a);
        let mut worst = f64::INFINITY;
        for (i, &pi) in pts.iter().enumerate() {
            for (j, &pj) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (pj - pi) * rot;
                let dist = if d.re <= 0.0 { d.norm() } else { d.im.abs() };
                worst = worst.min(dist);
            }
        }
        if worst > 0.01 * scale {
            return a;
        }
        if worst > best.0 {
            best = (worst, a);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::circle;
    use crate::scalar::rel_diff;

    fn quintic_cover() -> CoverCurve<Complex64> {
        // P = x^5 - 1, f = x^2 - 4
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
    fn reference_roots_square_correctly() {
        let cover = quintic_cover();
        for &(re, im) in &[(1.7, 0.3), (-2.5, 1.1), (0.2, -3.0), (0.9, 0.01)] {
            let x = Complex64::new(re, im);
            let y = cover.yhat(&x);
            let w = cover.what(&x);
            assert!(rel_diff(&(y * y), &cover.p.eval(&x)) < 1e-12, "yhat at {x}");
            assert!(rel_diff(&(w * w), &cover.f.eval(&x)) < 1e-12, "what at {x}");
        }
    }

    #[test]
    fn rejects_shared_roots() {
        // f shares the root x = 1 with P
        let p: ComplexPolynomial<Complex64> = ComplexPolynomial::from_f64_pairs(
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
        let f = ComplexPolynomial::from_f64_pairs(53, &[(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert!(CoverCurve::new(2, p, f, 1e-10).is_err());
    }

    #[test]
    fn loop_around_p_root_flips_y_only() {
        let cover = quintic_cover();
        // P-root at x = 1, f-roots at +-2: a small circle catches only one ray
        let loop_path = circle(Complex64::new(1.0, 0.0), 0.3);
        let lp = cover.label_path(&loop_path, SheetSigns::base()).unwrap();
        assert_eq!(lp.end.y, -1, "y flips around a branch point of P");
        assert_eq!(lp.end.w, 1, "w untouched");
    }

    #[test]
    fn loop_around_f_root_flips_w_only() {
        let cover = quintic_cover();
        let loop_path = circle(Complex64::new(2.0, 0.0), 0.3);
        let lp = cover.label_path(&loop_path, SheetSigns::base()).unwrap();
        assert_eq!(lp.end.y, 1);
        assert_eq!(lp.end.w, -1);
    }

    #[test]
    fn big_loop_monodromy_matches_degrees() {
        let cover = quintic_cover();
        let loop_path = circle(Complex64::new(0.0, 0.0), 25.0);
        let lp = cover.label_path(&loop_path, SheetSigns::base()).unwrap();
        // deg P = 5 (odd): y flips; deg f = 2 (even): w does not
        assert_eq!(lp.end.y, -1);
        assert_eq!(lp.end.w, 1);
    }

    #[test]
    fn labels_match_brute_force_continuation() {
        let cover = quintic_cover();
        // a path wandering below and above the root cluster
        let path = XPath {
            segments: vec![
                ContourSegment::Line {
                    from: Complex64::new(-3.2, -2.0),
                    to: Complex64::new(0.4, -2.3),
                },
                ContourSegment::Line {
                    from: Complex64::new(0.4, -2.3),
                    to: Complex64::new(3.1, 0.8),
                },
                ContourSegment::Line {
                    from: Complex64::new(3.1, 0.8),
                    to: Complex64::new(-0.3, 2.4),
                },
            ],
        };
        let lp = cover.label_path(&path, SheetSigns::base()).unwrap();

        // brute-force: continue y and w by nearest-value steps along a fine
        // polyline and compare with the labels piece by piece
        let x0 = Complex64::new(-3.2, -2.0);
        let mut y = cover.yhat(&x0);
        let mut w = cover.what(&x0);
        let mut walked = x0;
        let mut step_to = |target: Complex64, y: &mut Complex64, w: &mut Complex64| {
            let n = 400;
            for k in 1..=n {
                let x = walked + (target - walked) * (k as f64 / n as f64);
                let yh = cover.yhat(&x);
                let wh = cover.what(&x);
                *y = if (yh - *y).norm() <= (yh + *y).norm() { yh } else { -yh };
                *w = if (wh - *w).norm() <= (wh + *w).norm() { wh } else { -wh };
            }
            walked = target;
        };

        for piece in &lp.pieces {
            let seg = &path.segments[piece.seg_index];
            let smid = 0.5;
            let tmid = piece.t_lo.to_f64() + (piece.t_hi.to_f64() - piece.t_lo.to_f64()) * smid;
            let xm = seg.point(tmid);
            step_to(xm, &mut y, &mut w);
            let yl = cover.y_at(&xm, piece.signs);
            let wl = cover.w_at(&xm, piece.signs);
            assert!((yl - y).norm() < 1e-9, "y label disagrees at {xm}");
            assert!((wl - w).norm() < 1e-9, "w label disagrees at {xm}");
        }
    }

    #[test]
    fn high_precision_crossing_parameter() {
        // P-root at 1: its ray crosses the segment; the crossing parameter
        // must be accurate at working precision, not just f64
        let p = ComplexPolynomial::<rug::Complex>::from_f64_pairs(
            190,
            &[
                (-1.0, 0.0),
                (0.0, 0.0),
                (0.0, 0.0),
                (0.0, 0.0),
                (0.0, 0.0),
                (1.0, 0.0),
            ],
        );
        let f = ComplexPolynomial::<rug::Complex>::from_f64_pairs(
            190,
            &[(-4.0, 0.0), (0.0, 0.0), (1.0, 0.0)],
        );
        let cover = CoverCurve::new(2, p, f, 1e-30).unwrap();
        let seg = ContourSegment::Line {
            from: Complex64::new(0.0, -1.0),
            to: Complex64::new(2.0, -1.0),
        };
        let crossings = cover.cut_crossings(&seg).unwrap();
        assert!(!crossings.is_empty(), "segment must cross at least one ray");
        for cr in &crossings {
            let root = if cr.flips_w {
                cover.f_roots[cr.root_index].clone()
            } else {
                cover.p_roots[cr.root_index].clone()
            };
            // residual of the ray condition at the crossing point
            let t = cr.t.clone();
            let x = rug::Complex::with_val(190, (0.0, -1.0))
                + rug::Complex::with_val(190, (2.0, 0.0)) * rug::Complex::from_re(t);
            let e = x.like(0.0, -cover.ray_angle).exp();
            let resid = ((x - root) * e).im().to_f64().abs();
            assert!(resid < 1e-50, "crossing residual {resid}");
        }
    }

    #[test]
    fn continuity_of_signed_value_across_split() {
        let cover = quintic_cover();
        let seg = ContourSegment::Line {
            from: Complex64::new(0.0, -1.0),
            to: Complex64::new(2.0, -1.0),
        };
        let path = XPath {
            segments: vec![seg],
        };
        let lp = cover.label_path(&path, SheetSigns::base()).unwrap();
        assert!(lp.pieces.len() >= 2, "at least one crossing expected");
        for k in 0..lp.pieces.len() - 1 {
            let cr_t = lp.pieces[k].t_hi.to_f64();
            let before = path.segments[0].point(cr_t - 1e-7);
            let after = path.segments[0].point(cr_t + 1e-7);
            let yb = cover.y_at(&before, lp.pieces[k].signs);
            let ya = cover.y_at(&after, lp.pieces[k + 1].signs);
            assert!(
                (yb - ya).norm() < 1e-5,
                "tracked y must be continuous across the cut at t = {cr_t}"
            );
            let wb = cover.w_at(&before, lp.pieces[k].signs);
            let wa = cover.w_at(&after, lp.pieces[k + 1].signs);
            assert!(
                (wb - wa).norm() < 1e-5,
                "tracked w must be continuous across the cut at t = {cr_t}"
            );
        }
    }
}
