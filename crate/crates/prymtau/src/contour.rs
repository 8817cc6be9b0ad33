//! Contours in the x-plane: smooth segments, obstacle-avoiding routes, and
//! closed tube loops around chains of branch points.
//!
//! Geometry is planned in f64 (topology only needs rough positions); the
//! parametrizations are then evaluated at working precision for quadrature.

use num_complex::Complex64;

use crate::scalar::CScalar;

/// One smooth piece of a contour, parametrized over t in [0,1].
#[derive(Debug, Clone)]
pub enum ContourSegment {
    Line {
        from: Complex64,
        to: Complex64,
    },
    /// Circular arc, angles in radians; theta1 < theta0 traverses clockwise.
    Arc {
        center: Complex64,
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
}

impl ContourSegment {
    pub fn point(&self, t: f64) -> Complex64 {
        match self {
            ContourSegment::Line { from, to } => from + (to - from) * t,
            ContourSegment::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let th = theta0 + (theta1 - theta0) * t;
                center + Complex64::from_polar(*radius, th)
            }
        }
    }

    pub fn velocity(&self, t: f64) -> Complex64 {
        match self {
            ContourSegment::Line { from, to } => to - from,
            ContourSegment::Arc {
                center: _,
                radius,
                theta0,
                theta1,
            } => {
                let th = theta0 + (theta1 - theta0) * t;
                Complex64::from_polar(*radius, th) * Complex64::new(0.0, theta1 - theta0)
            }
        }
    }

    /// Point at working precision.
    pub fn point_p<C: CScalar>(&self, model: &C, t: &C) -> C {
        match self {
            ContourSegment::Line { from, to } => {
                let a = model.like(from.re, from.im);
                let d = model.like(to.re - from.re, to.im - from.im);
                a + d * t
            }
            ContourSegment::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let c = model.like(center.re, center.im);
                let r = model.like(*radius, 0.0);
                let th = model.like(*theta0, 0.0)
                    + model.like(theta1 - theta0, 0.0) * t;
                c + r * th.mul_i().exp()
            }
        }
    }

    /// Velocity at working precision.
    pub fn velocity_p<C: CScalar>(&self, model: &C, t: &C) -> C {
        match self {
            ContourSegment::Line { from, to } => model.like(to.re - from.re, to.im - from.im),
            ContourSegment::Arc {
                center: _,
                radius,
                theta0,
                theta1,
            } => {
                let r = model.like(*radius, 0.0);
                let dth = theta1 - theta0;
                let th = model.like(*theta0, 0.0) + model.like(dth, 0.0) * t;
                (r * th.mul_i().exp() * model.like(dth, 0.0)).mul_i()
            }
        }
    }

    pub fn approx_len(&self) -> f64 {
        match self {
            ContourSegment::Line { from, to } => (to - from).norm(),
            ContourSegment::Arc { radius, theta0, theta1, .. } => {
                radius * (theta1 - theta0).abs()
            }
        }
    }
}

/// A piecewise-smooth path: segments traversed in order.
#[derive(Debug, Clone, Default)]
pub struct XPath {
    pub segments: Vec<ContourSegment>,
}

impl XPath {
    pub fn line(from: Complex64, to: Complex64) -> Self {
        XPath {
            segments: vec![ContourSegment::Line { from, to }],
        }
    }

    pub fn start(&self) -> Complex64 {
        self.segments.first().map(|s| s.point(0.0)).unwrap_or_default()
    }

    pub fn end(&self) -> Complex64 {
        self.segments.last().map(|s| s.point(1.0)).unwrap_or_default()
    }

    pub fn is_closed(&self) -> bool {
        (self.start() - self.end()).norm() < 1e-9 * (1.0 + self.approx_len())
    }

    pub fn approx_len(&self) -> f64 {
        self.segments.iter().map(|s| s.approx_len()).sum()
    }

    /// Uniform-ish polyline discretization for crossing detection.
    pub fn polyline(&self, max_step: f64) -> Vec<Complex64> {
        if self.segments.is_empty() {
            return Vec::new();
        }
        let mut pts = vec![self.segments[0].point(0.0)];
        for seg in &self.segments {
            let n = ((seg.approx_len() / max_step).ceil() as usize).max(8);
            for k in 1..=n {
                pts.push(seg.point(k as f64 / n as f64));
            }
        }
        pts
    }

    pub fn reversed(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| match s {
                ContourSegment::Line { from, to } => ContourSegment::Line {
                    from: *to,
                    to: *from,
                },
                ContourSegment::Arc {
                    center,
                    radius,
                    theta0,
                    theta1,
                } => ContourSegment::Arc {
                    center: *center,
                    radius: *radius,
                    theta0: *theta1,
                    theta1: *theta0,
                },
            })
            .collect();
        XPath { segments }
    }
}

/// Distance from point `p` to segment `ab`.
fn seg_dist(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Polyline route from `from` to `to` that stays clear of every obstacle
/// disk `(center, radius)`. A blocking disk is skirted on the side away from
/// the segment at `radius + margin` from its center; recursion caps at a
/// fixed depth. Disks centered on an endpoint are ignored.
pub fn route_clear_disks(
    from: Complex64,
    to: Complex64,
    disks: &[(Complex64, f64)],
    margin: f64,
) -> Vec<Complex64> {
    fn go(
        from: Complex64,
        to: Complex64,
        disks: &[(Complex64, f64)],
        margin: f64,
        depth: usize,
        out: &mut Vec<Complex64>,
    ) {
        let mut worst: Option<(f64, Complex64, f64)> = None;
        for &(o, r) in disks {
            if (o - from).norm() < 1e-12 || (o - to).norm() < 1e-12 {
                continue;
            }
            let d = seg_dist(o, from, to) - r;
            if d < 0.0 && worst.map_or(true, |(wd, _, _)| d < wd) {
                worst = Some((d, o, r));
            }
        }
        match worst {
            Some((_, o, r)) if depth > 0 => {
                let dir = (to - from) / (to - from).norm().max(1e-300);
                // foot of the perpendicular from o
                let t = ((o - from) * dir.conj()).re;
                let foot = from + dir * t;
                let mut n = foot - o;
                let nn = n.norm();
                if nn < 1e-12 {
                    n = dir * Complex64::new(0.0, 1.0);
                } else {
                    n /= nn;
                }
                let way = o + n * (r + margin);
                go(from, way, disks, margin, depth - 1, out);
                out.push(way);
                go(way, to, disks, margin, depth - 1, out);
            }
            _ => {}
        }
    }
    let mut mid = Vec::new();
    go(from, to, disks, margin, 8, &mut mid);
    let mut route = vec![from];
    route.extend(mid);
    route.push(to);
    route
}

/// Polyline route from `from` to `to` that stays at least `clearance` away
/// from every point obstacle, skirting at 3x clearance.
pub fn route_clear(
    from: Complex64,
    to: Complex64,
    obstacles: &[Complex64],
    clearance: f64,
) -> Vec<Complex64> {
    let disks: Vec<(Complex64, f64)> = obstacles.iter().map(|&o| (o, clearance)).collect();
    route_clear_disks(from, to, &disks, 2.0 * clearance)
}

/// Closed tube (counterclockwise) at distance `width` around the polyline
/// `route`, with circular caps of radius `width` at both ends.
///
/// Returned loop: offset run on the right of the route, cap around the last
/// route point, offset run back on the other side, cap around the first point.
pub fn tube_loop(route: &[Complex64], width: f64) -> XPath {
    assert!(route.len() >= 2, "tube route needs at least two points");
    let mut segs: Vec<ContourSegment> = Vec::new();

    let dir = |a: Complex64, b: Complex64| (b - a) / (b - a).norm().max(1e-300);
    // right normal of direction d is -i*d
    let right = |d: Complex64| d * Complex64::new(0.0, -1.0);

    let n = route.len();
    // forward pass on the right side
    for k in 0..n - 1 {
        let d = dir(route[k], route[k + 1]);
        let off = right(d) * width;
        let a = route[k] + off;
        let b = route[k + 1] + off;
        if k > 0 {
            // corner joint: arc around route[k] from previous offset to this one
            let prev = segs.last().unwrap().point(1.0);
            push_corner(&mut segs, route[k], prev, a, width);
        }
        segs.push(ContourSegment::Line { from: a, to: b });
    }
    // end cap around route[n-1]: from right offset to the far side, ccw
    {
        let d = dir(route[n - 2], route[n - 1]);
        let th_in = (right(d)).arg();
        segs.push(ContourSegment::Arc {
            center: route[n - 1],
            radius: width,
            theta0: th_in,
            theta1: th_in + std::f64::consts::PI,
        });
    }
    // backward pass (right side of the reversed route)
    for k in (0..n - 1).rev() {
        let d = dir(route[k + 1], route[k]);
        let off = right(d) * width;
        let a = route[k + 1] + off;
        let b = route[k] + off;
        let prev = segs.last().unwrap().point(1.0);
        if (prev - a).norm() > 1e-12 * (1.0 + width) {
            push_corner(&mut segs, route[k + 1], prev, a, width);
        }
        segs.push(ContourSegment::Line { from: a, to: b });
    }
    // start cap around route[0]
    {
        let d = dir(route[1], route[0]);
        let th_in = (right(d)).arg();
        segs.push(ContourSegment::Arc {
            center: route[0],
            radius: width,
            theta0: th_in,
            theta1: th_in + std::f64::consts::PI,
        });
    }
    XPath { segments: segs }
}

/// Arc joining two offset points around a route corner, choosing the short way.
fn push_corner(segs: &mut Vec<ContourSegment>, center: Complex64, from: Complex64, to: Complex64, width: f64) {
    let t0 = (from - center).arg();
    let mut t1 = (to - center).arg();
    while t1 - t0 > std::f64::consts::PI {
        t1 -= 2.0 * std::f64::consts::PI;
    }
    while t1 - t0 < -std::f64::consts::PI {
        t1 += 2.0 * std::f64::consts::PI;
    }
    if (t1 - t0).abs() > 1e-9 {
        segs.push(ContourSegment::Arc {
            center,
            radius: width,
            theta0: t0,
            theta1: t1,
        });
    }
}

/// Counterclockwise full circle around `center`.
pub fn circle(center: Complex64, radius: f64) -> XPath {
    XPath {
        segments: vec![ContourSegment::Arc {
            center,
            radius,
            theta0: 0.0,
            theta1: 2.0 * std::f64::consts::PI,
        }],
    }
}

/// Winding number of a closed polyline around `p`.
pub fn winding_number(poly: &[Complex64], p: Complex64) -> i64 {
    let mut total = 0.0f64;
    for k in 0..poly.len() - 1 {
        let a = poly[k] - p;
        let b = poly[k + 1] - p;
        total += (b / a).arg();
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn route_avoids_obstacle() {
        let from = Complex64::new(-1.0, 0.0);
        let to = Complex64::new(1.0, 0.0);
        let obst = [Complex64::new(0.0, 0.0)];
        let r = route_clear(from, to, &obst, 0.2);
        assert!(r.len() >= 3);
        for w in r.windows(2) {
            assert!(seg_dist(obst[0], w[0], w[1]) > 0.19, "route too close");
        }
    }

    #[test]
    fn straight_route_when_clear() {
        let r = route_clear(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
            &[Complex64::new(5.0, 5.0)],
            0.3,
        );
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn tube_is_closed_and_encircles_endpoints_once() {
        let a = Complex64::new(0.0, 0.0);
        let b = Complex64::new(2.0, 1.0);
        let tube = tube_loop(&[a, b], 0.3);
        assert!(tube.is_closed());
        let poly = tube.polyline(0.02);
        assert_eq!(winding_number(&poly, a), 1);
        assert_eq!(winding_number(&poly, b), 1);
        assert_eq!(winding_number(&poly, Complex64::new(5.0, 5.0)), 0);
        assert_eq!(winding_number(&poly, Complex64::new(1.0, 0.5)), 1);
    }

    #[test]
    fn tube_with_detour_route() {
        let route = route_clear(
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
            &[Complex64::new(0.0, 0.0)],
            0.15,
        );
        let tube = tube_loop(&route, 0.05);
        assert!(tube.is_closed());
        let poly = tube.polyline(0.005);
        assert_eq!(winding_number(&poly, Complex64::new(-1.0, 0.0)), 1);
        assert_eq!(winding_number(&poly, Complex64::new(1.0, 0.0)), 1);
        // the skirted obstacle stays outside
        assert_eq!(winding_number(&poly, Complex64::new(0.0, 0.0)), 0);
    }

    #[test]
    fn winding_of_circle() {
        let c = circle(Complex64::new(0.3, 0.2), 1.0);
        let poly = c.polyline(0.05);
        assert_eq!(winding_number(&poly, Complex64::new(0.3, 0.2)), 1);
        assert_eq!(winding_number(&poly, Complex64::new(3.0, 0.0)), 0);
    }

    #[test]
    fn segment_precision_eval() {
        let seg = ContourSegment::Arc {
            center: Complex64::new(0.0, 0.0),
            radius: 2.0,
            theta0: 0.0,
            theta1: std::f64::consts::FRAC_PI_2,
        };
        let model = rug::Complex::with_val(150, (0, 0));
        let t = rug::Complex::with_val(150, (0.5, 0.0));
        let p = seg.point_p(&model, &t);
        let expect = Complex64::from_polar(2.0, std::f64::consts::FRAC_PI_4);
        assert!((p.to_c64() - expect).norm() < 1e-14);
    }
}
