//! Sparse assembly storage and a banded direct solver.
//!
//! Assembled Jacobians are stored in CSR form. [`linear_solve`] reorders the
//! unknowns with reverse Cuthill-McKee, copies the matrix into band storage and
//! factors it with partial pivoting. The FE operators here have a handful of
//! non-zeros per row, so the reordered bandwidth stays small: a few entries in
//! 1-D, about two grid rows in space-time.

use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// Accepted normwise backward error of a linear solve.
pub const BACKWARD_ERROR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearSolveError {
    #[error("matrix is singular (zero pivot at elimination step {step})")]
    Singular { step: usize },
    #[error("solve is ill-conditioned: backward error {backward_error:e}")]
    IllConditioned { backward_error: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, rhs has {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
    #[error("non-finite entry in system")]
    NonFinite,
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed in
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(col, value)` pairs of a row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut b = TripletBuilder::new(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    b.add(i, j, m[(i, j)]);
                }
            }
        }
        b.build()
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity graph.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &SparseMatrix) -> Vec<usize> {
    let n = m.dim();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in m.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Largest `|i - j|` over the nonzeros of `m` under the ordering `perm[new] = old`.
pub fn bandwidth(m: &SparseMatrix, perm: &[usize]) -> usize {
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    (0..m.dim())
        .flat_map(|i| m.row(i).map(move |(j, _)| (i, j)))
        .map(|(i, j)| inv[i].abs_diff(inv[j]))
        .max()
        .unwrap_or(0)
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(current, adj);
        let depth = level.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
        if depth <= ecc && ecc > 0 {
            break;
        }
        ecc = depth;
        current = (0..adj.len())
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(current);
    }
    current
}

/// LU factors of a banded matrix with partial pivoting.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    mult: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factor(m: &SparseMatrix, perm: &[usize]) -> Result<Self, LinearSolveError> {
        let n = m.dim();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for (j, _) in m.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            mult: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in m.row(i) {
                if !v.is_finite() {
                    return Err(LinearSolveError::NonFinite);
                }
                let k = lu.idx(inv[i], inv[j]);
                lu.data[k] += v;
            }
        }
        let scale = m.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let reach = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for r in k + 1..=last {
                let v = lu.data[lu.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= f64::EPSILON * 1e-6 * scale {
                return Err(LinearSolveError::Singular { step: k });
            }
            lu.pivots[k] = p;
            if p != k {
                for j in k..=reach {
                    let (a, b) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a, b);
                }
            }
            let piv = lu.data[lu.idx(k, k)];
            let len = reach - k;
            let pivot_row = lu.idx(k, k + 1);
            for r in k + 1..=last {
                let rk = lu.idx(r, k);
                let factor = lu.data[rk] / piv;
                lu.data[rk] = 0.0;
                lu.mult[k * kl + (r - k - 1)] = factor;
                if factor != 0.0 {
                    // Row segments over columns k+1..=reach are contiguous.
                    let split = lu.idx(r, k + 1);
                    let (head, tail) = lu.data.split_at_mut(split);
                    let src = &head[pivot_row..pivot_row + len];
                    for (d, s) in tail[..len].iter_mut().zip(src) {
                        *d -= factor * s;
                    }
                }
            }
        }
        Ok(lu)
    }

    /// Solves in permuted ordering, in place.
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                b[r] -= self.mult[k * self.kl + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Normwise backward error `|Ax - b| / (|A| |x| + |b|)` in the infinity norm.
pub fn backward_error(m: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = m.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
    let denom = m.norm_inf() * inf_norm(x) + inf_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        inf_norm(&r) / denom
    }
}

/// Solves `m x = rhs` with a banded LU after bandwidth-reducing reordering,
/// plus one step of iterative refinement.
pub fn linear_solve(m: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    let n = m.dim();
    if rhs.len() != n {
        return Err(LinearSolveError::Dimension { rows: n, cols: n, rhs: rhs.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(LinearSolveError::NonFinite);
    }
    let natural: Vec<usize> = (0..n).collect();
    let rcm = reverse_cuthill_mckee(m);
    let perm = if bandwidth(m, &rcm) < bandwidth(m, &natural) { rcm } else { natural };
    let lu = BandLu::factor(m, &perm)?;
    let solve = |b: &[f64]| {
        let mut pb: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
        lu.solve_in_place(&mut pb);
        let mut x = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            x[old] = pb[new];
        }
        x
    };
    let mut x = solve(rhs);
    let ax = m.mul_vec(&x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let dx = solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    let eta = backward_error(m, &x, rhs);
    if !eta.is_finite() || eta > BACKWARD_ERROR_TOLERANCE {
        return Err(LinearSolveError::IllConditioned { backward_error: eta });
    }
    Ok(x)
}

/// Dense solve through nalgebra's LU with partial pivoting.
pub fn linear_solve_dense(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, LinearSolveError> {
    if m.nrows() != m.ncols() || m.nrows() != rhs.len() {
        return Err(LinearSolveError::Dimension {
            rows: m.nrows(),
            cols: m.ncols(),
            rhs: rhs.len(),
        });
    }
    let x = m.clone().lu().solve(rhs).ok_or(LinearSolveError::Singular { step: 0 })?;
    let r = m * &x - rhs;
    let denom = m.norm() * x.norm() + rhs.norm();
    let eta = if denom == 0.0 { 0.0 } else { r.norm() / denom };
    if !eta.is_finite() || eta > BACKWARD_ERROR_TOLERANCE {
        return Err(LinearSolveError::IllConditioned { backward_error: eta });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let m = SparseMatrix::from_dense(&DMatrix::identity(7, 7));
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        assert_eq!(linear_solve(&m, &b).unwrap(), b);
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(50, 50, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &a * a.transpose() + DMatrix::identity(50, 50) * 0.5;
        let b = DVector::from_fn(50, |_, _| rng.gen_range(-1.0..1.0));
        let oracle = spd.clone().cholesky().unwrap().solve(&b);
        let x = linear_solve(&SparseMatrix::from_dense(&spd), b.as_slice()).unwrap();
        let err = (DVector::from_vec(x) - &oracle).norm() / oracle.norm();
        assert!(err < 1e-10, "err={err}");
        let xd = linear_solve_dense(&spd, &b).unwrap();
        assert!((xd - oracle).norm() < 1e-10);
    }

    #[test]
    fn pivoting_is_needed_and_used() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = linear_solve(&SparseMatrix::from_dense(&m), b.as_slice()).unwrap();
        let r = &m * DVector::from_vec(x) - b;
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let e = linear_solve(&SparseMatrix::from_dense(&m), &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, LinearSolveError::Singular { .. }), "{e:?}");
    }

    #[test]
    fn rcm_shrinks_an_interleaved_band() {
        // Two coupled chains stored block-wise: bandwidth n/2 before reordering.
        let half = 40;
        let mut b = TripletBuilder::new(2 * half);
        for i in 0..half {
            b.add(i, i, 4.0);
            b.add(i + half, i + half, 4.0);
            b.add(i, i + half, 1.0);
            b.add(i + half, i, 1.0);
            if i + 1 < half {
                b.add(i, i + 1, -1.0);
                b.add(i + 1, i, -1.0);
                b.add(i + half, i + half + 1, -1.0);
                b.add(i + half + 1, i + half, -1.0);
            }
        }
        let m = b.build();
        let perm = reverse_cuthill_mckee(&m);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let bw = (0..m.dim())
            .flat_map(|i| m.row(i).map(move |(j, _)| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| inv[i].abs_diff(inv[j]))
            .max()
            .unwrap();
        assert!(bw <= 3, "bandwidth {bw}");
        let rhs: Vec<f64> = (0..m.dim()).map(|i| (i as f64).sin()).collect();
        let x = linear_solve(&m, &rhs).unwrap();
        assert!(backward_error(&m, &x, &rhs) < 1e-14);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 1, 1.0);
        b.add(0, 1, 2.5);
        b.add(1, 0, -1.0);
        let m = b.build();
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }
}
