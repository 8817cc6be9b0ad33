//! Derivatives of analytic functions from circle averages.
//!
//! For f analytic on a disk, the m-th Taylor coefficient at the center is a
//! discrete Fourier coefficient of f on a concentric circle, exact up to
//! aliasing of order N. Doubling N until two estimates agree gives all
//! derivatives up to `max_order` with spectral accuracy.

use crate::error::{PrymError, Result};
use crate::scalar::{CScalar, RScalar};

/// Derivatives f^(m)(center), m = 0..=max_order.
pub fn cauchy_derivatives<C: CScalar>(
    f: &mut dyn FnMut(&C) -> C,
    center: &C,
    radius: f64,
    max_order: usize,
    rel_tol: f64,
) -> Result<Vec<C>> {
    let mut n = (2 * (max_order + 1)).next_power_of_two().max(16);
    let mut prev: Option<Vec<C>> = None;
    for _ in 0..6 {
        let ders = ring_derivatives(f, center, radius, max_order, n);
        if let Some(p) = &prev {
            let scale = ders
                .iter()
                .map(|d| d.abs().to_f64())
                .fold(0.0f64, f64::max)
                .max(1e-300);
            let gap = ders
                .iter()
                .zip(p.iter())
                .map(|(a, b)| (a.clone() - b).abs().to_f64())
                .fold(0.0f64, f64::max);
            if gap <= rel_tol * scale {
                return Ok(ders);
            }
        }
        prev = Some(ders);
        n *= 2;
    }
    Err(PrymError::Numerical(format!(
        "cauchy derivatives did not stabilize at N={n}"
    )))
}

fn ring_derivatives<C: CScalar>(
    f: &mut dyn FnMut(&C) -> C,
    center: &C,
    radius: f64,
    max_order: usize,
    n: usize,
) -> Vec<C> {
    // roots of unity at working precision (n is a power of two, 2k/n exact)
    let unit = |k: usize| -> C {
        let frac = 2.0 * (k % n) as f64 / n as f64;
        (center.pi_like() * center.like(frac, 0.0)).mul_i().exp()
    };
    let vals: Vec<C> = (0..n)
        .map(|k| {
            let node = center.clone() + center.like(radius, 0.0) * unit(k);
            f(&node)
        })
        .collect();
    let mut out = Vec::with_capacity(max_order + 1);
    let mut fact = 1.0f64;
    for m in 0..=max_order {
        if m > 0 {
            fact *= m as f64;
        }
        let mut acc = center.zero_like();
        for (k, v) in vals.iter().enumerate() {
            // w^(-km) = w^(n - km mod n)
            let idx = (n - (k * m) % n) % n;
            acc += v.clone() * unit(idx);
        }
        // f^(m) = m!/(N r^m) sum_k f_k w^(-km); the radius power is taken at
        // working precision (fact/n is exact in f64 for the orders used here)
        out.push(
            acc * center.like(fact / n as f64, 0.0) / center.like(radius, 0.0).powi(m as i32),
        );
    }
    out
}
