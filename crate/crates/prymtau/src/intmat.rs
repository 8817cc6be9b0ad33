//! Exact integer matrix algebra for homology lattices.
//!
//! Everything here is over Z with i128 intermediates and explicit overflow
//! checks; results certify themselves (a symplectic basis is verified by
//! recomputing its Gram matrix exactly).

use crate::error::{PrymError, Result};

pub type IVec = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl IMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IMat {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        assert!(rows.iter().all(|x| x.len() == c));
        IMat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> IMat {
        let mut out = IMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &IMat) -> Result<IMat> {
        assert_eq!(self.cols, other.rows);
        let mut out = IMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)] as i128;
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out[(i, j)] as i128 + a * other[(k, j)] as i128;
                    out[(i, j)] = i64::try_from(v)
                        .map_err(|_| PrymError::Numerical("integer overflow in matmul".into()))?;
                }
            }
        }
        Ok(out)
    }

    /// U G U^T for a square Gram matrix G.
    pub fn congruence(&self, g: &IMat) -> Result<IMat> {
        self.matmul(g)?.matmul(&self.transpose())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn neg(&self) -> IMat {
        IMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| -x).collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for IMat {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Standard symplectic Gram matrix [[0, I], [-I, 0]] of size 2m.
pub fn standard_symplectic_gram(m: usize) -> IMat {
    let mut j = IMat::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1;
        j[(m + i, i)] = -1;
    }
    j
}

// ---------------------------------------------------------------------------
// checked row operations over i128 working copies

#[derive(Debug, Clone)]
struct Work {
    n: usize,
    b: Vec<Vec<i128>>,
    u: Vec<Vec<i128>>,
}

impl Work {
    fn new(g: &IMat) -> Self {
        let n = g.rows;
        let b = (0..n)
            .map(|i| (0..n).map(|j| g[(i, j)] as i128).collect())
            .collect();
        let u = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1i128 } else { 0 }).collect())
            .collect();
        Work { n, b, u }
    }

    /// Simultaneous row+column swap (congruence by a permutation).
    fn swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.b.swap(i, j);
        for row in self.b.iter_mut() {
            row.swap(i, j);
        }
        self.u.swap(i, j);
    }

    /// Congruence row op: generator_i += c * generator_j.
    fn add_multiple(&mut self, i: usize, j: usize, c: i128) -> Result<()> {
        if c == 0 {
            return Ok(());
        }
        for k in 0..self.n {
            let v = self.b[i][k] + c * self.b[j][k];
            check128(v)?;
            self.b[i][k] = v;
        }
        for row in self.b.iter_mut() {
            let v = row[i] + c * row[j];
            check128(v)?;
            row[i] = v;
        }
        for k in 0..self.u[i].len() {
            let v = self.u[i][k] + c * self.u[j][k];
            check128(v)?;
            self.u[i][k] = v;
        }
        Ok(())
    }

    fn negate(&mut self, i: usize) {
        for k in 0..self.n {
            self.b[i][k] = -self.b[i][k];
        }
        for row in self.b.iter_mut() {
            row[i] = -row[i];
        }
        for v in self.u[i].iter_mut() {
            *v = -*v;
        }
    }
}

fn check128(v: i128) -> Result<()> {
    if v.abs() > (1i128 << 62) {
        return Err(PrymError::Numerical(
            "integer overflow in lattice reduction".into(),
        ));
    }
    Ok(())
}

fn to_imat(rows: &[Vec<i128>]) -> Result<IMat> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    let mut out = IMat::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            out[(i, j)] = i64::try_from(rows[i][j])
                .map_err(|_| PrymError::Numerical("integer overflow in lattice output".into()))?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// skew normal form

#[derive(Debug, Clone)]
pub struct SkewNormalForm {
    /// Unimodular transform: rows are the new generators as integer combos of
    /// the input generators; `u * g * u^T` is block-diagonal with 2x2 blocks
    /// [[0, d], [-d, 0]] followed by zeros.
    pub u: IMat,
    /// Elementary divisors d_1 | d_2 | ... (one per hyperbolic pair).
    pub divisors: Vec<i64>,
    /// Rank of the form (= 2 * divisors.len()).
    pub rank: usize,
}

impl SkewNormalForm {
    /// Rows of `u` paired as (e_k, f_k) = rows (2k, 2k+1).
    pub fn pair_rows(&self, k: usize) -> (IVec, IVec) {
        (
            self.u.row(2 * k).to_vec(),
            self.u.row(2 * k + 1).to_vec(),
        )
    }
}

/// Brings a skew-symmetric integer Gram matrix to hyperbolic normal form by a
/// unimodular congruence. Deterministic pivoting: smallest nonzero magnitude,
/// ties broken lexicographically.
pub fn skew_normal_form(g: &IMat) -> Result<SkewNormalForm> {
    assert_eq!(g.rows, g.cols);
    let n = g.rows;
    for i in 0..n {
        for j in 0..n {
            if g[(i, j)] != -g[(j, i)] {
                return Err(PrymError::Numerical("gram matrix not skew".into()));
            }
        }
    }
    let mut w = Work::new(g);
    let mut start = 0usize;
    let mut divisors = Vec::new();

    'outer: while start + 1 < n {
        // pivot: minimal |b_ij| over i,j >= start
        let mut best: Option<(i128, usize, usize)> = None;
        for i in start..n {
            for j in (i + 1)..n {
                let v = w.b[i][j].abs();
                if v != 0 && best.map_or(true, |(bv, bi, bj)| v < bv || (v == bv && (i, j) < (bi, bj)))
                {
                    best = Some((v, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else {
            break 'outer;
        };
        w.swap(start, i);
        let j = if j == start { i } else { j };
        w.swap(start + 1, j);
        if w.b[start][start + 1] < 0 {
            w.negate(start + 1);
        }

        // clear pairings of all later generators against the pivot pair
        let mut k = start + 2;
        while k < n {
            let d = w.b[start][start + 1];
            let bp = w.b[k][start];
            let bq = w.b[k][start + 1];
            if bp == 0 && bq == 0 {
                k += 1;
                continue;
            }
            if bp % d == 0 && bq % d == 0 {
                // full clear: k += (bp/d) * q - (bq/d) * p
                w.add_multiple(k, start + 1, bp / d)?;
                w.add_multiple(k, start, -(bq / d))?;
                k += 1;
            } else {
                // partial reduction leaves an entry smaller than d; reselect pivot
                w.add_multiple(k, start + 1, bp.div_euclid(d))?;
                w.add_multiple(k, start, -(bq.div_euclid(d)))?;
                continue 'outer;
            }
        }
        divisors.push(i64::try_from(w.b[start][start + 1]).unwrap());
        start += 2;
    }

    // remaining generators must pair to zero among themselves
    for i in start..n {
        for j in start..n {
            if w.b[i][j] != 0 {
                return Err(PrymError::Numerical(
                    "skew reduction left nonzero tail".into(),
                ));
            }
        }
    }
    let u = to_imat(&w.u)?;
    let rank = 2 * divisors.len();
    Ok(SkewNormalForm { u, divisors, rank })
}

// ---------------------------------------------------------------------------
// row echelon over Z, integer kernel, integer solves

/// Unimodular U with U A in row echelon form (pivot columns increase, zero
/// rows at the bottom). Returns (echelon, U, rank).
pub fn row_echelon(a: &IMat) -> Result<(IMat, IMat, usize)> {
    let m = a.rows;
    let n = a.cols;
    let mut h: Vec<Vec<i128>> = (0..m)
        .map(|i| (0..n).map(|j| a[(i, j)] as i128).collect())
        .collect();
    let mut u: Vec<Vec<i128>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1 } else { 0 }).collect())
        .collect();
    let mut pivot_row = 0usize;
    for col in 0..n {
        if pivot_row == m {
            break;
        }
        loop {
            let mut nonzero: Vec<usize> = (pivot_row..m).filter(|&r| h[r][col] != 0).collect();
            if nonzero.is_empty() {
                break;
            }
            if nonzero.len() == 1 {
                let r = nonzero[0];
                h.swap(pivot_row, r);
                u.swap(pivot_row, r);
                if h[pivot_row][col] < 0 {
                    for v in h[pivot_row].iter_mut() {
                        *v = -*v;
                    }
                    for v in u[pivot_row].iter_mut() {
                        *v = -*v;
                    }
                }
                pivot_row += 1;
                break;
            }
            nonzero.sort_by_key(|&r| (h[r][col].abs(), r));
            let r0 = nonzero[0];
            for &r in &nonzero[1..] {
                let q = h[r][col].div_euclid(h[r0][col]);
                for c in 0..n {
                    let v = h[r][c] - q * h[r0][c];
                    check128(v)?;
                    h[r][c] = v;
                }
                for c in 0..m {
                    let v = u[r][c] - q * u[r0][c];
                    check128(v)?;
                    u[r][c] = v;
                }
            }
        }
    }
    Ok((to_imat(&h)?, to_imat(&u)?, pivot_row))
}

/// Basis of {x in Z^n : a x = 0} as rows (the full kernel lattice).
pub fn integer_kernel(a: &IMat) -> Result<IMat> {
    let (_, u, rank) = row_echelon(&a.transpose())?;
    if rank == u.rows {
        return Ok(IMat::zeros(0, a.cols));
    }
    let rows: Vec<Vec<i64>> = (rank..u.rows).map(|r| u.row(r).to_vec()).collect();
    Ok(IMat::from_rows(rows))
}

/// Integer x with x * basis = target, if one exists.
pub fn solve_row_combo(basis: &IMat, target: &[i64]) -> Result<IVec> {
    assert_eq!(basis.cols, target.len());
    let (h, u, rank) = row_echelon(basis)?;
    let mut resid: Vec<i128> = target.iter().map(|&v| v as i128).collect();
    let mut y = vec![0i128; basis.rows];
    for r in 0..rank {
        let col = (0..h.cols)
            .find(|&c| h[(r, c)] != 0)
            .expect("echelon row with recorded rank must be nonzero");
        let p = h[(r, col)] as i128;
        if resid[col] % p != 0 {
            return Err(PrymError::RankDeficiency(
                "target not in the row lattice".into(),
            ));
        }
        let q = resid[col] / p;
        y[r] = q;
        for c in 0..h.cols {
            let v = resid[c] - q * h[(r, c)] as i128;
            check128(v)?;
            resid[c] = v;
        }
    }
    if resid.iter().any(|&v| v != 0) {
        return Err(PrymError::RankDeficiency(
            "target not in the row span".into(),
        ));
    }
    // x = y * U
    let mut x = vec![0i128; basis.rows];
    for r in 0..basis.rows {
        if y[r] == 0 {
            continue;
        }
        for c in 0..basis.rows {
            let v = x[c] + y[r] * u[(r, c)] as i128;
            check128(v)?;
            x[c] = v;
        }
    }
    x.into_iter()
        .map(|v| {
            i64::try_from(v).map_err(|_| PrymError::Numerical("overflow in combo solve".into()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// gcd helpers

pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        let s = if a < 0 { -1 } else { 1 };
        return (a.abs(), s, 0);
    }
    let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
    (g, y, x - (a.div_euclid(b)) * y)
}

/// Coefficients c with sum c_i v_i = gcd(v).
pub fn gcd_combination(v: &[i64]) -> (i64, Vec<i64>) {
    let mut g = 0i64;
    let mut coeffs = vec![0i64; v.len()];
    for (i, &x) in v.iter().enumerate() {
        if x == 0 {
            continue;
        }
        if g == 0 {
            g = x.abs();
            coeffs[i] = x.signum();
            continue;
        }
        let (ng, s, t) = ext_gcd(g, x);
        for c in coeffs.iter_mut() {
            *c *= s;
        }
        coeffs[i] = t;
        g = ng;
    }
    (g, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_normal_form_of_standard_block() {
        let g = standard_symplectic_gram(2);
        let nf = skew_normal_form(&g).unwrap();
        assert_eq!(nf.divisors, vec![1, 1]);
        assert_eq!(nf.rank, 4);
        let gram = nf.u.congruence(&g).unwrap();
        // pairs interleaved: rows (0,1) and (2,3)
        for k in 0..2 {
            assert_eq!(gram[(2 * k, 2 * k + 1)], 1);
            assert_eq!(gram[(2 * k + 1, 2 * k)], -1);
        }
    }

    #[test]
    fn skew_normal_form_with_divisor_two() {
        // pairing matrix of (a+a*, b+b*) style invariant vectors
        let g = IMat::from_rows(vec![vec![0, 2], vec![-2, 0]]);
        let nf = skew_normal_form(&g).unwrap();
        assert_eq!(nf.divisors, vec![2]);
    }

    #[test]
    fn skew_normal_form_with_radical() {
        // rank-2 form on 4 generators; two combos pair to zero with everything
        let g = IMat::from_rows(vec![
            vec![0, 1, 0, 1],
            vec![-1, 0, 0, 0],
            vec![0, 0, 0, 0],
            vec![-1, 0, 0, 0],
        ]);
        let nf = skew_normal_form(&g).unwrap();
        assert_eq!(nf.rank, 2);
        assert_eq!(nf.divisors, vec![1]);
        let gram = nf.u.congruence(&g).unwrap();
        for i in 2..4 {
            for j in 0..4 {
                assert_eq!(gram[(i, j)], 0, "radical row {i} not isotropic");
            }
        }
    }

    #[test]
    fn skew_normal_form_random_unimodular_conjugates() {
        // congruence by a known unimodular matrix keeps divisors (1,1)
        let g = standard_symplectic_gram(2);
        let t = IMat::from_rows(vec![
            vec![1, 2, 0, -1],
            vec![0, 1, 1, 0],
            vec![0, 0, 1, 3],
            vec![0, 0, 0, 1],
        ]);
        let g2 = t.congruence(&g).unwrap();
        let nf = skew_normal_form(&g2).unwrap();
        assert_eq!(nf.divisors, vec![1, 1]);
        let gram = nf.u.congruence(&g2).unwrap();
        assert_eq!(gram[(0, 1)], 1);
        assert_eq!(gram[(2, 3)], 1);
        assert_eq!(gram[(0, 2)], 0);
        assert_eq!(gram[(0, 3)], 0);
        assert_eq!(gram[(1, 2)], 0);
    }

    #[test]
    fn kernel_of_projection() {
        let a = IMat::from_rows(vec![vec![1, 0, 2], vec![0, 1, -1]]);
        let k = integer_kernel(&a).unwrap();
        assert_eq!(k.rows, 1);
        let x = k.row(0);
        // a x = 0
        assert_eq!(x[0] + 2 * x[2], 0);
        assert_eq!(x[1] - x[2], 0);
        assert_eq!(x[2].abs(), 1, "kernel generator must be primitive");
    }

    #[test]
    fn gcd_combination_works() {
        let v = vec![6, 10, 15];
        let (g, c) = gcd_combination(&v);
        assert_eq!(g, 1);
        let s: i64 = v.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert_eq!(s, 1);
    }

    #[test]
    fn ext_gcd_identity() {
        let (g, x, y) = ext_gcd(240, 46);
        assert_eq!(g, 2);
        assert_eq!(240 * x + 46 * y, 2);
    }

    #[test]
    fn row_combo_solve() {
        let basis = IMat::from_rows(vec![vec![2, 1, 0], vec![0, 3, 1], vec![1, 1, 1]]);
        let target = vec![3, 5, 2];
        let x = solve_row_combo(&basis, &target).unwrap();
        let mut got = vec![0i64; 3];
        for (r, &c) in x.iter().enumerate() {
            for j in 0..3 {
                got[j] += c * basis[(r, j)];
            }
        }
        assert_eq!(got, target);
    }

    #[test]
    fn row_combo_rejects_outside_lattice() {
        let basis = IMat::from_rows(vec![vec![2, 0], vec![0, 2]]);
        assert!(solve_row_combo(&basis, &[1, 0]).is_err());
        assert!(solve_row_combo(&basis, &[2, -4]).is_ok());
    }
}
