//! Integer homology of the cover, organized around the involution.
//!
//! Cycles are represented by closed tube loops in the x-plane lifted to the
//! cover with explicit sheet labels. Intersection numbers come from counting
//! label-matched signed crossings of fine polylines; everything downstream of
//! that count is exact integer lattice algebra, and the final basis is
//! certified by recomputing its Gram matrix and the involution action.
//!
//! The basis layout is a_1..a_g, a*_1..a*_g, at_1..at_{2g-3} followed by the
//! dual half b_1..b_g, b*_1..b*_g, bt_1..bt_{2g-3}, where * marks the
//! involution partner and the tilde pairs span the part orthogonal to all
//! lifted cycles. Bananas over pairs of P-roots are routed through a corridor
//! that avoids every branch cut of w, which forces their lifts to keep a
//! constant w-label; that is what makes the lifted block come out exactly in
//! this normal form.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::contour::{route_clear_disks, tube_loop, ContourSegment, XPath};
use crate::cover::{CoverCurve, LabeledPath, SheetSigns};
use crate::error::{PrymError, Result};
use crate::intmat::{
    gcd_combination, integer_kernel, skew_normal_form, solve_row_combo, IMat, IVec,
};
use crate::scalar::{CScalar, RScalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CandKind {
    PPair,
    FPair,
    Mixed,
    NecklacePpf,
    NecklaceFfp,
}

/// Tube geometry shared by all sheet lifts of one loop.
#[derive(Debug, Clone)]
pub struct GeomSpec {
    pub kind: CandKind,
    pub roots: (usize, usize, usize),
    pub route: Vec<Complex64>,
    pub width: f64,
    pub traversals: u8,
}

/// One homology candidate: a tube with a starting sheet label.
#[derive(Debug, Clone)]
pub struct Candidate<C: CScalar> {
    pub geom: usize,
    pub kind: CandKind,
    pub start: SheetSigns,
    pub name: String,
    /// Tube segments repeated once per traversal.
    pub path: XPath,
    pub labeled: LabeledPath<C>,
}

/// Vanishing cycle to steer into a distinguished basis slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VanishingClass {
    /// Banana over two P-roots goes into the a_1 slot (and its lift into a*_1).
    DownstairsBanana { i: usize, j: usize },
    /// Banana over two f-roots goes into the at_1 slot.
    TildeFPair { i: usize, j: usize },
    /// Double-traversed loop around p_i, p_j, f_k into the at_1 slot.
    TildeNecklace { pi: usize, pj: usize, fk: usize },
}

#[derive(Debug, Clone, Default)]
pub struct HomologyOptions {
    pub vanishing: Option<VanishingClass>,
}

pub struct AdaptedHomology<C: CScalar> {
    pub genus: usize,
    pub geoms: Vec<GeomSpec>,
    pub candidates: Vec<Candidate<C>>,
    /// Full cover intersection Gram of the candidates.
    pub gram: IMat,
    /// Involution as a candidate permutation.
    pub mu: Vec<usize>,
    /// Basis rows in candidate coordinates; layout documented above.
    pub basis: IMat,
    /// Downstairs symplectic basis over the (+,+)-lifted P-bananas.
    pub downstairs_a: IMat,
    pub downstairs_b: IMat,
    pub downstairs_candidates: Vec<usize>,
}

// ---------------------------------------------------------------------------
// geometry construction

fn achieved_ray_clearance(pts: &[Complex64], angle: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, -angle);
    let mut worst = f64::INFINITY;
    for (i, &a) in pts.iter().enumerate() {
        for (j, &b) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = (b - a) * rot;
            let dist = if d.re <= 0.0 { d.norm() } else { d.im.abs() };
            worst = worst.min(dist);
        }
    }
    worst
}

struct GeomParams {
    clearance: f64,
    corridor_depth: f64,
    ray_u: Complex64,
}

fn geom_params<C: CScalar>(cover: &CoverCurve<C>) -> GeomParams {
    let pts = cover.branch_points_f64();
    let c_ray = achieved_ray_clearance(&pts, cover.ray_angle);
    let clearance = 0.25 * cover.min_root_gap().min(c_ray);
    let ray_u = Complex64::from_polar(1.0, cover.ray_angle);
    // depth grows along the rays; the corridor sits on the shallow side of
    // every branch point, where no cut can reach
    let min_depth = pts
        .iter()
        .map(|p| (p * ray_u.conj()).re)
        .fold(f64::INFINITY, f64::min);
    GeomParams {
        clearance,
        corridor_depth: min_depth - 6.0 * clearance,
        ray_u,
    }
}

/// Exclusion disk around a prescribed pinching segment. Tubes not anchored at
/// the pinching roots must stay clear of it so that their classes pair to zero
/// with the pinching cycle. The band bounds are the disk extent in ray
/// coordinates, used by corridor risers to jog around it.
struct AvoidZone {
    center: Complex64,
    radius: f64,
    perp_lo: f64,
    perp_hi: f64,
    depth_lo: f64,
    depth_hi: f64,
    depth_mid: f64,
    p_anchor: Vec<usize>,
    f_anchor: Vec<usize>,
}

impl AvoidZone {
    fn anchored(&self, kind: CandKind, roots: (usize, usize, usize)) -> bool {
        match kind {
            CandKind::PPair => {
                self.p_anchor.contains(&roots.0) || self.p_anchor.contains(&roots.1)
            }
            CandKind::FPair => {
                self.f_anchor.contains(&roots.0) || self.f_anchor.contains(&roots.1)
            }
            CandKind::Mixed => {
                self.p_anchor.contains(&roots.0) || self.f_anchor.contains(&roots.1)
            }
            CandKind::NecklacePpf => {
                self.p_anchor.contains(&roots.0)
                    || self.p_anchor.contains(&roots.1)
                    || self.f_anchor.contains(&roots.2)
            }
            CandKind::NecklaceFfp => {
                self.f_anchor.contains(&roots.0)
                    || self.f_anchor.contains(&roots.1)
                    || self.p_anchor.contains(&roots.2)
            }
        }
    }
}

fn avoid_zone(
    proots: &[Complex64],
    froots: &[Complex64],
    vanish: Option<&VanishingClass>,
    params: &GeomParams,
) -> Option<AvoidZone> {
    let v = vanish?;
    let (pinned, p_anchor, f_anchor): (Vec<Complex64>, Vec<usize>, Vec<usize>) = match v {
        VanishingClass::DownstairsBanana { i, j } => {
            (vec![proots[*i], proots[*j]], vec![*i, *j], vec![])
        }
        VanishingClass::TildeFPair { i, j } => {
            (vec![froots[*i], froots[*j]], vec![], vec![*i, *j])
        }
        VanishingClass::TildeNecklace { pi, pj, fk } => (
            vec![proots[*pi], proots[*pj], froots[*fk]],
            vec![*pi, *pj],
            vec![*fk],
        ),
    };
    let center = pinned.iter().sum::<Complex64>() / pinned.len() as f64;
    let radius = pinned
        .iter()
        .map(|r| (r - center).norm())
        .fold(0.0, f64::max)
        + 3.0 * params.clearance;
    // only a well isolated pinch cluster can be excluded from every other
    // tube; a bystander root near the disk would leave no room to route
    // around it
    let bystanders = proots
        .iter()
        .enumerate()
        .filter(|(i, _)| !p_anchor.contains(i))
        .map(|(_, r)| *r)
        .chain(
            froots
                .iter()
                .enumerate()
                .filter(|(i, _)| !f_anchor.contains(i))
                .map(|(_, r)| *r),
        );
    for r in bystanders {
        if (r - center).norm() < radius + 4.0 * params.clearance {
            return None;
        }
    }
    let z = center * params.ray_u.conj();
    let reach = radius + 2.0 * params.clearance;
    Some(AvoidZone {
        center,
        radius,
        perp_lo: z.im - reach,
        perp_hi: z.im + reach,
        depth_lo: z.re - reach,
        depth_hi: z.re + reach,
        depth_mid: z.re,
        p_anchor,
        f_anchor,
    })
}

fn corridor_route(
    from: Complex64,
    to: Complex64,
    params: &GeomParams,
    floor: f64,
    zone: Option<&AvoidZone>,
) -> Vec<Complex64> {
    let u = params.ray_u;
    let mk = |d: f64, q: f64| u * Complex64::new(d, q);
    let leg = |root: Complex64| -> Vec<Complex64> {
        let z = root * u.conj();
        let (d_r, q) = (z.re, z.im);
        let mut pts = Vec::new();
        let mut q_end = q;
        if let Some(zn) = zone {
            // a riser whose descent would cross the band jogs around it: out
            // to the deep edge when the root sits deeper than the zone
            // center, down to the shallow edge otherwise
            if q >= zn.perp_lo && q <= zn.perp_hi && d_r >= zn.depth_lo {
                let d_jog = if d_r >= zn.depth_mid {
                    zn.depth_hi
                } else {
                    zn.depth_lo
                };
                let q_safe = if q - zn.perp_lo <= zn.perp_hi - q {
                    zn.perp_lo
                } else {
                    zn.perp_hi
                };
                if (d_jog - d_r).abs() > 1e-12 {
                    pts.push(mk(d_jog, q));
                }
                pts.push(mk(d_jog, q_safe));
                q_end = q_safe;
            }
        }
        pts.push(mk(floor, q_end));
        pts
    };
    let mut route = vec![from];
    route.extend(leg(from));
    let mut back = leg(to);
    back.reverse();
    route.extend(back);
    route.push(to);
    route.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    route
}

fn multi_route(
    stops: &[Complex64],
    disks: &[(Complex64, f64)],
    clearance: f64,
) -> Vec<Complex64> {
    let mut route = vec![stops[0]];
    for w in stops.windows(2) {
        let leg = route_clear_disks(w[0], w[1], disks, 2.0 * clearance);
        route.extend_from_slice(&leg[1..]);
    }
    route
}

fn geometries<C: CScalar>(
    cover: &CoverCurve<C>,
    tier: usize,
    vanish: Option<&VanishingClass>,
) -> Vec<GeomSpec> {
    let params = geom_params(cover);
    let proots: Vec<Complex64> = cover.p_roots.iter().map(|r| r.to_c64()).collect();
    let froots: Vec<Complex64> = cover.f_roots.iter().map(|r| r.to_c64()).collect();
    let all: Vec<Complex64> = proots.iter().chain(froots.iter()).copied().collect();
    let zone = avoid_zone(&proots, &froots, vanish, &params);

    let mut descs: Vec<(CandKind, (usize, usize, usize), u8)> = Vec::new();

    let p_pairs: Vec<(usize, usize)> = if tier >= 2 {
        (0..proots.len())
            .flat_map(|i| ((i + 1)..proots.len()).map(move |j| (i, j)))
            .collect()
    } else {
        (0..proots.len() - 1).map(|i| (i, i + 1)).collect()
    };
    for &(i, j) in &p_pairs {
        descs.push((CandKind::PPair, (i, j, usize::MAX), 1));
    }

    let f_pairs: Vec<(usize, usize)> = if tier >= 2 {
        (0..froots.len())
            .flat_map(|i| ((i + 1)..froots.len()).map(move |j| (i, j)))
            .collect()
    } else if froots.len() >= 2 {
        (0..froots.len() - 1).map(|i| (i, i + 1)).collect()
    } else {
        Vec::new()
    };
    for &(i, j) in &f_pairs {
        descs.push((CandKind::FPair, (i, j, usize::MAX), 1));
    }

    for i in 0..proots.len() {
        for j in 0..froots.len() {
            descs.push((CandKind::Mixed, (i, j, usize::MAX), 2));
        }
    }

    if tier >= 3 {
        for i in 0..proots.len() - 1 {
            for k in 0..froots.len() {
                descs.push((CandKind::NecklacePpf, (i, i + 1, k), 2));
            }
        }
        if froots.len() >= 2 {
            for i in 0..froots.len() - 1 {
                for k in 0..proots.len() {
                    descs.push((CandKind::NecklaceFfp, (i, i + 1, k), 2));
                }
            }
        }
    }

    let n = descs.len().max(1);
    let root_disks: Vec<(Complex64, f64)> =
        all.iter().map(|&r| (r, params.clearance)).collect();
    // with an active zone every corridor floor drops below its band so that
    // jogged risers can always reach it
    let floor_base = zone
        .as_ref()
        .map_or(params.corridor_depth, |z| {
            params.corridor_depth.min(z.depth_lo - params.clearance)
        });
    descs
        .into_iter()
        .enumerate()
        .map(|(idx, (kind, roots, traversals))| {
            // widths and corridor depths vary per tube so that no two distinct
            // tubes share a wall or a cap circle
            let frac = (idx + 1) as f64 / (n + 1) as f64;
            let width = params.clearance * (0.25 + 0.35 * frac);
            let clear = zone
                .as_ref()
                .filter(|z| !z.anchored(kind, roots));
            let disks: Vec<(Complex64, f64)> = match clear {
                Some(z) => root_disks
                    .iter()
                    .copied()
                    .chain(std::iter::once((z.center, z.radius)))
                    .collect(),
                None => root_disks.clone(),
            };
            let route = match kind {
                CandKind::PPair => corridor_route(
                    proots[roots.0],
                    proots[roots.1],
                    &params,
                    floor_base - 3.0 * params.clearance * frac,
                    clear,
                ),
                CandKind::FPair => multi_route(
                    &[froots[roots.0], froots[roots.1]],
                    &disks,
                    params.clearance,
                ),
                CandKind::Mixed => multi_route(
                    &[proots[roots.0], froots[roots.1]],
                    &disks,
                    params.clearance,
                ),
                CandKind::NecklacePpf => multi_route(
                    &[proots[roots.0], proots[roots.1], froots[roots.2]],
                    &disks,
                    params.clearance,
                ),
                CandKind::NecklaceFfp => multi_route(
                    &[froots[roots.0], froots[roots.1], proots[roots.2]],
                    &disks,
                    params.clearance,
                ),
            };
            GeomSpec {
                kind,
                roots,
                route,
                width,
                traversals,
            }
        })
        .collect()
}

fn build_candidates<C: CScalar>(
    cover: &CoverCurve<C>,
    geoms: &[GeomSpec],
) -> Result<Vec<Candidate<C>>> {
    let mut out = Vec::new();
    for (gi, geom) in geoms.iter().enumerate() {
        let tube = tube_loop(&geom.route, geom.width);
        let mut segments = Vec::new();
        for _ in 0..geom.traversals {
            segments.extend(tube.segments.iter().cloned());
        }
        let path = XPath { segments };
        let lifts: &[(i8, i8)] = if geom.traversals == 1 {
            &[(1, 1), (1, -1), (-1, 1), (-1, -1)]
        } else {
            &[(1, 1), (1, -1)]
        };
        for &(sy, sw) in lifts {
            let start = SheetSigns { y: sy, w: sw };
            let labeled = cover.label_path(&path, start)?;
            if labeled.end != start {
                return Err(PrymError::Numerical(format!(
                    "candidate loop fails to close on the cover: {:?} {:?}",
                    geom.kind, geom.roots
                )));
            }
            out.push(Candidate {
                geom: gi,
                kind: geom.kind,
                start,
                name: format!(
                    "{:?}({},{}){}{}",
                    geom.kind,
                    geom.roots.0,
                    geom.roots.1,
                    if sy > 0 { '+' } else { '-' },
                    if sw > 0 { '+' } else { '-' }
                ),
                path: path.clone(),
                labeled,
            });
        }
    }
    Ok(out)
}

fn mu_permutation<C: CScalar>(cands: &[Candidate<C>]) -> Result<Vec<usize>> {
    let mut index: HashMap<(usize, i8, i8), usize> = HashMap::new();
    for (k, c) in cands.iter().enumerate() {
        index.insert((c.geom, c.start.y, c.start.w), k);
    }
    cands
        .iter()
        .map(|c| {
            index
                .get(&(c.geom, c.start.y, -c.start.w))
                .copied()
                .ok_or_else(|| PrymError::Numerical("missing involution partner".into()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// crossing Gram

#[derive(Debug, Clone, Copy)]
struct PolySeg {
    a: Complex64,
    b: Complex64,
    sy: i8,
    sw: i8,
}

fn sample_polyline<C: CScalar>(cand: &Candidate<C>, step: f64) -> Vec<PolySeg> {
    let mut out = Vec::new();
    for piece in &cand.labeled.pieces {
        let seg = &cand.path.segments[piece.seg_index];
        // arcs from tubes sharing a root are concentric with nearby radii, so
        // their polylines need a sagitta much smaller than the radius gap
        let local_step = match seg {
            ContourSegment::Arc { radius, .. } => step.min(radius / 10.0),
            ContourSegment::Line { .. } => step,
        };
        let t0 = piece.t_lo.to_f64();
        let t1 = piece.t_hi.to_f64();
        let plen = seg.approx_len() * (t1 - t0);
        let n = ((plen / local_step).ceil() as usize).max(2);
        let mut prev = seg.point(t0);
        for k in 1..=n {
            let t = t0 + (t1 - t0) * k as f64 / n as f64;
            let p = seg.point(t);
            out.push(PolySeg {
                a: prev,
                b: p,
                sy: piece.signs.y,
                sw: piece.signs.w,
            });
            prev = p;
        }
    }
    out
}

fn cross2(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

struct SegGrid {
    cell: f64,
    map: HashMap<(i64, i64), Vec<u32>>,
}

impl SegGrid {
    fn build(segs: &[PolySeg], cell: f64) -> Self {
        let mut map: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (idx, s) in segs.iter().enumerate() {
            let (lo_x, hi_x) = (s.a.re.min(s.b.re), s.a.re.max(s.b.re));
            let (lo_y, hi_y) = (s.a.im.min(s.b.im), s.a.im.max(s.b.im));
            let cx0 = (lo_x / cell).floor() as i64;
            let cx1 = (hi_x / cell).floor() as i64;
            let cy0 = (lo_y / cell).floor() as i64;
            let cy1 = (hi_y / cell).floor() as i64;
            for cx in cx0..=cx1 {
                for cy in cy0..=cy1 {
                    map.entry((cx, cy)).or_default().push(idx as u32);
                }
            }
        }
        SegGrid { cell, map }
    }

    fn query(&self, s: &PolySeg, out: &mut Vec<u32>) {
        out.clear();
        let (lo_x, hi_x) = (s.a.re.min(s.b.re), s.a.re.max(s.b.re));
        let (lo_y, hi_y) = (s.a.im.min(s.b.im), s.a.im.max(s.b.im));
        let cx0 = (lo_x / self.cell).floor() as i64;
        let cx1 = (hi_x / self.cell).floor() as i64;
        let cy0 = (lo_y / self.cell).floor() as i64;
        let cy1 = (hi_y / self.cell).floor() as i64;
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                if let Some(v) = self.map.get(&(cx, cy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

/// Signed label-matched crossing count of two labeled polylines.
fn crossing_count(a: &[PolySeg], grid_b: &SegGrid, b: &[PolySeg], full_sheets: bool) -> i64 {
    let mut total = 0i64;
    let mut hits = Vec::new();
    for sa in a {
        grid_b.query(sa, &mut hits);
        for &bi in &hits {
            let sb = &b[bi as usize];
            if sa.sy != sb.sy || (full_sheets && sa.sw != sb.sw) {
                continue;
            }
            let d1 = sa.b - sa.a;
            let d2 = sb.b - sb.a;
            let den = cross2(d1, d2);
            if den.abs() < 1e-14 * d1.norm() * d2.norm() {
                continue;
            }
            let r = sb.a - sa.a;
            let s = cross2(r, d2) / den;
            let t = cross2(r, d1) / den;
            // half-open on both so a crossing through a shared vertex counts once
            if (-1e-9..1.0 - 1e-9).contains(&s) && (-1e-9..1.0 - 1e-9).contains(&t) {
                total += if den > 0.0 { 1 } else { -1 };
            }
        }
    }
    total
}

fn bbox(segs: &[PolySeg]) -> (f64, f64, f64, f64) {
    let mut lo_x = f64::INFINITY;
    let mut hi_x = f64::NEG_INFINITY;
    let mut lo_y = f64::INFINITY;
    let mut hi_y = f64::NEG_INFINITY;
    for s in segs {
        lo_x = lo_x.min(s.a.re).min(s.b.re);
        hi_x = hi_x.max(s.a.re).max(s.b.re);
        lo_y = lo_y.min(s.a.im).min(s.b.im);
        hi_y = hi_y.max(s.a.im).max(s.b.im);
    }
    (lo_x, hi_x, lo_y, hi_y)
}

fn intersection_gram(polylines: &[Vec<PolySeg>], cell: f64, full_sheets: bool) -> IMat {
    let n = polylines.len();
    let grids: Vec<SegGrid> = polylines.iter().map(|p| SegGrid::build(p, cell)).collect();
    let boxes: Vec<_> = polylines.iter().map(|p| bbox(p)).collect();
    let mut g = IMat::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (alx, ahx, aly, ahy) = boxes[i];
            let (blx, bhx, bly, bhy) = boxes[j];
            if ahx < blx || bhx < alx || ahy < bly || bhy < aly {
                continue;
            }
            let v = crossing_count(&polylines[i], &grids[j], &polylines[j], full_sheets);
            g[(i, j)] = v;
            g[(j, i)] = -v;
        }
    }
    g
}

// ---------------------------------------------------------------------------
// symplectic pair extraction

struct SymplecticPairs {
    pairs: Vec<(IVec, IVec)>,
    divisors: Vec<i64>,
}

/// Hyperbolic pairs of the span of `gram`'s generators, optionally forcing a
/// prescribed primitive vector into the first slot.
fn symplectic_pairs(gram: &IMat, prescribe: Option<&[i64]>) -> Result<SymplecticPairs> {
    let n = gram.rows;
    match prescribe {
        None => {
            let nf = skew_normal_form(gram)?;
            let pairs = (0..nf.divisors.len()).map(|k| nf.pair_rows(k)).collect();
            Ok(SymplecticPairs {
                pairs,
                divisors: nf.divisors,
            })
        }
        Some(v) => {
            assert_eq!(v.len(), n);
            // pairings q_k = <v, gen_k>
            let mut q = vec![0i64; n];
            for k in 0..n {
                let mut acc = 0i128;
                for l in 0..n {
                    acc += v[l] as i128 * gram[(l, k)] as i128;
                }
                q[k] = i64::try_from(acc)
                    .map_err(|_| PrymError::Numerical("overflow in pairing".into()))?;
            }
            let (g, u) = gcd_combination(&q);
            if g != 1 {
                return Err(PrymError::LatticeObstruction { divisors: vec![g] });
            }
            // <v, u> = 1; reduce every generator against the pair (v, u)
            let ug: Vec<i64> = (0..n)
                .map(|k| {
                    let mut acc = 0i128;
                    for l in 0..n {
                        acc += u[l] as i128 * gram[(l, k)] as i128;
                    }
                    acc as i64
                })
                .collect();
            let mut reduced = Vec::with_capacity(n);
            for k in 0..n {
                let mut row = vec![0i64; n];
                row[k] = 1;
                for l in 0..n {
                    row[l] += ug[k] * v[l] - q[k] * u[l];
                }
                reduced.push(row);
            }
            let r = IMat::from_rows(reduced);
            let sub = r.congruence(gram)?;
            let nf = skew_normal_form(&sub)?;
            let mut pairs = vec![(v.to_vec(), u)];
            let mut divisors = vec![1];
            for k in 0..nf.divisors.len() {
                let (e, f) = nf.pair_rows(k);
                let back = |row: &[i64]| -> IVec {
                    let mut out = vec![0i64; n];
                    for (idx, &c) in row.iter().enumerate() {
                        for l in 0..n {
                            out[l] += c * r[(idx, l)];
                        }
                    }
                    out
                };
                pairs.push((back(&e), back(&f)));
                divisors.push(nf.divisors[k]);
            }
            Ok(SymplecticPairs { pairs, divisors })
        }
    }
}

// ---------------------------------------------------------------------------
// assembly

fn standard_j(ghat: usize) -> IMat {
    let mut j = IMat::zeros(2 * ghat, 2 * ghat);
    for i in 0..ghat {
        j[(i, ghat + i)] = 1;
        j[(ghat + i, i)] = -1;
    }
    j
}

fn apply_perm(row: &[i64], perm: &[usize]) -> IVec {
    let mut out = vec![0i64; row.len()];
    for (k, &c) in row.iter().enumerate() {
        out[perm[k]] += c;
    }
    out
}

impl<C: CScalar> AdaptedHomology<C> {
    pub fn ghat(&self) -> usize {
        4 * self.genus - 3
    }

    /// Number of minus-eigenvalue pairs (the tilde slots included).
    pub fn n_minus(&self) -> usize {
        3 * self.genus - 3
    }

    pub fn row_a(&self, j: usize) -> &[i64] {
        self.basis.row(j)
    }
    pub fn row_astar(&self, j: usize) -> &[i64] {
        self.basis.row(self.genus + j)
    }
    pub fn row_atilde(&self, k: usize) -> &[i64] {
        self.basis.row(2 * self.genus + k)
    }
    pub fn row_b(&self, j: usize) -> &[i64] {
        self.basis.row(self.ghat() + j)
    }
    pub fn row_bstar(&self, j: usize) -> &[i64] {
        self.basis.row(self.ghat() + self.genus + j)
    }
    pub fn row_btilde(&self, k: usize) -> &[i64] {
        self.basis.row(self.ghat() + 2 * self.genus + k)
    }

    /// alpha_plus_j = (a_j + a*_j)/2 as (numerator row, denominator).
    pub fn plus_alpha(&self, j: usize) -> (IVec, i64) {
        let s: IVec = self
            .row_a(j)
            .iter()
            .zip(self.row_astar(j))
            .map(|(x, y)| x + y)
            .collect();
        (s, 2)
    }

    /// beta_plus_j = b_j + b*_j.
    pub fn plus_beta(&self, j: usize) -> (IVec, i64) {
        let s: IVec = self
            .row_b(j)
            .iter()
            .zip(self.row_bstar(j))
            .map(|(x, y)| x + y)
            .collect();
        (s, 1)
    }

    /// alpha_minus_i: (a_i - a*_i)/2 for i < g, then the tilde a-cycles.
    pub fn minus_alpha(&self, i: usize) -> (IVec, i64) {
        if i < self.genus {
            let s: IVec = self
                .row_a(i)
                .iter()
                .zip(self.row_astar(i))
                .map(|(x, y)| x - y)
                .collect();
            (s, 2)
        } else {
            (self.row_atilde(i - self.genus).to_vec(), 1)
        }
    }

    /// beta_minus_i: b_i - b*_i for i < g, then the tilde b-cycles.
    pub fn minus_beta(&self, i: usize) -> (IVec, i64) {
        if i < self.genus {
            let s: IVec = self
                .row_b(i)
                .iter()
                .zip(self.row_bstar(i))
                .map(|(x, y)| x - y)
                .collect();
            (s, 1)
        } else {
            (self.row_btilde(i - self.genus).to_vec(), 1)
        }
    }

    /// Coordinates of a candidate-space vector in the adapted basis.
    pub fn class_coords(&self, x: &[i64]) -> Result<IVec> {
        let n = self.candidates.len();
        assert_eq!(x.len(), n);
        let ghat = self.ghat();
        // p_i = <basis_i, x>
        let mut p = vec![0i128; 2 * ghat];
        for i in 0..2 * ghat {
            for k in 0..n {
                if self.basis[(i, k)] == 0 {
                    continue;
                }
                for l in 0..n {
                    p[i] += self.basis[(i, k)] as i128
                        * self.gram[(k, l)] as i128
                        * x[l] as i128;
                }
            }
        }
        // coords c with x = sum c_k basis_k: p = J c, c = -J p
        let mut c = vec![0i64; 2 * ghat];
        for i in 0..ghat {
            c[i] = i64::try_from(-p[ghat + i])
                .map_err(|_| PrymError::Numerical("overflow in class coords".into()))?;
            c[ghat + i] = i64::try_from(p[i])
                .map_err(|_| PrymError::Numerical("overflow in class coords".into()))?;
        }
        Ok(c)
    }

    /// Same candidate loops labeled on another cover. Valid when the other
    /// cover keeps every root inside the clearance of its counterpart here
    /// (precision changes, small coefficient deformations); closure of each
    /// lift certifies that no route was invalidated.
    pub fn relabel_candidates<D: CScalar>(&self, cover: &CoverCurve<D>) -> Result<Vec<Candidate<D>>> {
        self.candidates
            .iter()
            .map(|c| {
                let labeled = cover.label_path(&c.path, c.start)?;
                if labeled.end != c.start {
                    return Err(PrymError::Numerical(format!(
                        "candidate {} no longer closes on the deformed cover",
                        c.name
                    )));
                }
                Ok(Candidate {
                    geom: c.geom,
                    kind: c.kind,
                    start: c.start,
                    name: c.name.clone(),
                    path: c.path.clone(),
                    labeled,
                })
            })
            .collect()
    }

    /// Involution in basis coordinates; exact block form is asserted by the
    /// builder, this recomputes it for reporting.
    pub fn mu_matrix(&self) -> Result<IMat> {
        let rows: Result<Vec<IVec>> = (0..2 * self.ghat())
            .map(|i| self.class_coords(&apply_perm(self.basis.row(i), &self.mu)))
            .collect();
        Ok(IMat::from_rows(rows?))
    }

    fn expected_mu_block(g: usize) -> IMat {
        let ghat = 4 * g - 3;
        let mut m = IMat::zeros(2 * ghat, 2 * ghat);
        for half in 0..2 {
            let o = half * ghat;
            for j in 0..g {
                m[(o + j, o + g + j)] = 1;
                m[(o + g + j, o + j)] = 1;
            }
            for k in 0..2 * g - 3 {
                m[(o + 2 * g + k, o + 2 * g + k)] = -1;
            }
        }
        m
    }

    fn verify(&self) -> Result<()> {
        let j = standard_j(self.ghat());
        let gram = self.basis.congruence(&self.gram)?;
        if gram != j {
            return Err(PrymError::LatticeObstruction {
                divisors: (0..gram.rows.min(8)).map(|i| gram[(0, i)]).collect(),
            });
        }
        let mu = self.mu_matrix()?;
        if mu != Self::expected_mu_block(self.genus) {
            return Err(PrymError::Numerical(
                "involution does not take the adapted block form".into(),
            ));
        }
        Ok(())
    }
}

pub fn build_adapted<C: CScalar>(
    cover: &CoverCurve<C>,
    opts: &HomologyOptions,
) -> Result<AdaptedHomology<C>> {
    let mut last_err = PrymError::Numerical("homology construction not attempted".into());
    for tier in 1..=3 {
        match build_tier(cover, opts, tier) {
            Ok(h) => return Ok(h),
            Err(e @ PrymError::LatticeObstruction { .. }) => {
                last_err = e;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn build_tier<C: CScalar>(
    cover: &CoverCurve<C>,
    opts: &HomologyOptions,
    tier: usize,
) -> Result<AdaptedHomology<C>> {
    let g = cover.genus;
    let ghat = 4 * g - 3;
    let geoms = geometries(cover, tier, opts.vanishing.as_ref());
    let candidates = build_candidates(cover, &geoms)?;
    let n = candidates.len();
    let mu = mu_permutation(&candidates)?;

    let max_width = geoms.iter().map(|s| s.width).fold(0.0f64, f64::max);
    let step = max_width / 2.5;
    let polylines: Vec<Vec<PolySeg>> = candidates
        .iter()
        .map(|c| sample_polyline(c, step))
        .collect();
    let gram = intersection_gram(&polylines, 3.0 * step, true);

    // candidate lattice must be the full unimodular homology lattice
    let master = skew_normal_form(&gram)?;
    if master.rank != 2 * ghat || master.divisors.iter().any(|&d| d != 1) {
        return Err(PrymError::LatticeObstruction {
            divisors: master.divisors,
        });
    }

    // consistency: the involution preserves intersection numbers
    let mut mu_mat = IMat::zeros(n, n);
    for (k, &mk) in mu.iter().enumerate() {
        mu_mat[(k, mk)] = 1;
    }
    if mu_mat.congruence(&gram)? != gram {
        return Err(PrymError::Numerical(
            "involution permutation does not preserve the intersection form".into(),
        ));
    }

    // downstairs pipeline over (+,+)-lifted P-bananas
    let pp_idx: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == CandKind::PPair && c.start.y == 1 && c.start.w == 1)
        .map(|(i, _)| i)
        .collect();
    let pp_polys: Vec<Vec<PolySeg>> = pp_idx.iter().map(|&i| polylines[i].clone()).collect();
    let cgram = intersection_gram(&pp_polys, 3.0 * step, false);

    let prescribe_c: Option<IVec> = match &opts.vanishing {
        Some(VanishingClass::DownstairsBanana { i, j }) => {
            let slot = pp_idx
                .iter()
                .position(|&k| {
                    let c = &candidates[k];
                    geoms[c.geom].roots.0 == *i && geoms[c.geom].roots.1 == *j
                })
                .ok_or_else(|| {
                    PrymError::DegenerateInput("prescribed banana not among candidates".into())
                })?;
            let mut v = vec![0i64; pp_idx.len()];
            v[slot] = 1;
            Some(v)
        }
        _ => None,
    };
    let cpairs = symplectic_pairs(&cgram, prescribe_c.as_deref())?;
    if cpairs.pairs.len() != g || cpairs.divisors.iter().any(|&d| d != 1) {
        return Err(PrymError::LatticeObstruction {
            divisors: cpairs.divisors,
        });
    }

    let expand = |row: &[i64]| -> IVec {
        let mut out = vec![0i64; n];
        for (slot, &c) in row.iter().enumerate() {
            out[pp_idx[slot]] += c;
        }
        out
    };
    let a_rows: Vec<IVec> = cpairs.pairs.iter().map(|(e, _)| expand(e)).collect();
    let b_rows: Vec<IVec> = cpairs.pairs.iter().map(|(_, f)| expand(f)).collect();
    let astar_rows: Vec<IVec> = a_rows.iter().map(|r| apply_perm(r, &mu)).collect();
    let bstar_rows: Vec<IVec> = b_rows.iter().map(|r| apply_perm(r, &mu)).collect();

    // orthogonal complement of the lifted block
    let mut lifted: Vec<IVec> = Vec::new();
    lifted.extend(a_rows.iter().cloned());
    lifted.extend(astar_rows.iter().cloned());
    lifted.extend(b_rows.iter().cloned());
    lifted.extend(bstar_rows.iter().cloned());
    let lmat = IMat::from_rows(lifted);
    let lg = lmat.matmul(&gram)?;
    let kernel = integer_kernel(&lg)?;
    let hgram = kernel.congruence(&gram)?;

    let prescribe_t: Option<IVec> = match &opts.vanishing {
        Some(VanishingClass::TildeFPair { i, j }) => {
            let cand = candidates
                .iter()
                .position(|c| {
                    c.kind == CandKind::FPair
                        && geoms[c.geom].roots.0 == *i
                        && geoms[c.geom].roots.1 == *j
                        && c.start == SheetSigns::base()
                })
                .ok_or_else(|| {
                    PrymError::DegenerateInput("prescribed f-banana not among candidates".into())
                })?;
            let mut v = vec![0i64; n];
            v[cand] = 1;
            Some(solve_row_combo(&kernel, &v).map_err(|_| {
                PrymError::LatticeObstruction {
                    divisors: vec![-1],
                }
            })?)
        }
        Some(VanishingClass::TildeNecklace { pi, pj, fk }) => {
            let cand = candidates
                .iter()
                .position(|c| {
                    c.kind == CandKind::NecklacePpf
                        && geoms[c.geom].roots == (*pi, *pj, *fk)
                        && c.start == SheetSigns::base()
                })
                .ok_or_else(|| {
                    PrymError::DegenerateInput("prescribed necklace not among candidates".into())
                })?;
            let mut v = vec![0i64; n];
            v[cand] = 1;
            Some(solve_row_combo(&kernel, &v).map_err(|_| {
                PrymError::LatticeObstruction {
                    divisors: vec![-1],
                }
            })?)
        }
        _ => None,
    };

    let tpairs = symplectic_pairs(&hgram, prescribe_t.as_deref())?;
    if tpairs.pairs.len() != 2 * g - 3 || tpairs.divisors.iter().any(|&d| d != 1) {
        return Err(PrymError::LatticeObstruction {
            divisors: tpairs.divisors,
        });
    }
    let back = |row: &[i64]| -> IVec {
        let mut out = vec![0i64; n];
        for (idx, &c) in row.iter().enumerate() {
            for l in 0..n {
                out[l] += c * kernel[(idx, l)];
            }
        }
        out
    };
    let at_rows: Vec<IVec> = tpairs.pairs.iter().map(|(e, _)| back(e)).collect();
    let bt_rows: Vec<IVec> = tpairs.pairs.iter().map(|(_, f)| back(f)).collect();

    let mut rows = Vec::with_capacity(2 * ghat);
    rows.extend(a_rows.iter().cloned());
    rows.extend(astar_rows.iter().cloned());
    rows.extend(at_rows.iter().cloned());
    rows.extend(b_rows.iter().cloned());
    rows.extend(bstar_rows.iter().cloned());
    rows.extend(bt_rows.iter().cloned());
    let basis = IMat::from_rows(rows);

    let da = IMat::from_rows(cpairs.pairs.iter().map(|(e, _)| e.clone()).collect());
    let db = IMat::from_rows(cpairs.pairs.iter().map(|(_, f)| f.clone()).collect());

    let adapted = AdaptedHomology {
        genus: g,
        geoms,
        candidates,
        gram,
        mu,
        basis,
        downstairs_a: da,
        downstairs_b: db,
        downstairs_candidates: pp_idx,
    };
    adapted.verify()?;
    Ok(adapted)
}
