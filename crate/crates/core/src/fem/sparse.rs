//! Sparse symmetric positive-definite systems: CSR storage, a direct
//! envelope Cholesky solver with reverse Cuthill-McKee ordering, and
//! Jacobi-preconditioned conjugate gradients.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

/// Systems with fewer unknowns are solved directly.
pub const DIRECT_SOLVE_LIMIT: usize = 200_000;
/// Relative residual target `|b - A x| / |b|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("SingularSystem: non-positive pivot {pivot:e} at unknown {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("NoConvergence: conjugate gradients reached {iterations} iterations with relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix {matrix}, right-hand side {rhs}")]
    DimensionMismatch { matrix: usize, rhs: usize },
}

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries. Summation follows the sorted (row, column,
    /// input position) order, so the result does not depend on how the
    /// triplets were produced as long as their order is fixed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `|b - A x| / |b|`, or `|A x|` when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Reverse Cuthill-McKee ordering: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // Start each component at an unvisited node of minimum degree.
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let mut next: Vec<usize> = a.row(i).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor stored by rows of the lower envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    /// First column of each row's envelope.
    first: Vec<usize>,
    /// Offset of each row in `values`; row `i` holds columns `first[i]..=i`.
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inverse[j]);
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let c = inverse[j];
                if c <= new {
                    values[start[new] + c - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..i {
                let (fj, sj) = (first[j], start[j]);
                let lo = fi.max(fj);
                let s = dot(&values[si + lo - fi..si + j - fi], &values[sj + lo - fj..sj + j - fj]);
                let pivot = values[sj + j - fj];
                values[si + j - fi] = (values[si + j - fi] - s) / pivot;
            }
            let row = &values[si..si + i - fi];
            let d = values[si + i - fi] - dot(row, row);
            if !(d > 0.0) {
                return Err(SolveError::NotPositiveDefinite { row: perm[i], pivot: d });
            }
            values[si + i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let s = dot(&self.values[si..si + i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / self.values[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] /= self.values[si + i - fi];
            let yi = y[i];
            for (k, l) in self.values[si..si + i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    EnvelopeCholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from `x = 0`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, usize), SolveError> {
    let n = a.n;
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iterations {
        let ap = a.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tolerance * nb {
            // Confirm against the true residual; recursion drift can hide
            // a larger one.
            if relative_residual(a, &x, b) <= tolerance {
                return Ok((x, it));
            }
            let ax = a.mul_vec(&x);
            r = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NoConvergence {
        iterations: max_iterations,
        residual: relative_residual(a, &x, b),
    })
}

/// Solves an SPD system: envelope Cholesky (with one step of iterative
/// refinement) below [`DIRECT_SOLVE_LIMIT`] unknowns, conjugate gradients
/// above.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport), SolveError> {
    if a.n != b.len() {
        return Err(SolveError::DimensionMismatch { matrix: a.n, rhs: b.len() });
    }
    if a.n < DIRECT_SOLVE_LIMIT {
        let chol = EnvelopeCholesky::factor(a)?;
        let mut x = chol.solve(b);
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        for (xi, di) in x.iter_mut().zip(chol.solve(&r)) {
            *xi += di;
        }
        let relative_residual = relative_residual(a, &x, b);
        Ok((
            x,
            SolveReport {
                solver: SolverKind::EnvelopeCholesky,
                iterations: 1,
                relative_residual,
            },
        ))
    } else {
        let (x, iterations) = conjugate_gradient(a, b, RESIDUAL_TOLERANCE, 20 * a.n)?;
        let relative_residual = relative_residual(a, &x, b);
        Ok((
            x,
            SolveReport {
                solver: SolverKind::ConjugateGradient,
                iterations,
                relative_residual,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Laplacian with Dirichlet ends, scrambled so the natural order is
    /// not banded.
    fn scrambled_laplacian(n: usize) -> CsrMatrix {
        let p: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((p[i], p[i], 2.0));
            if i + 1 < n {
                t.push((p[i], p[i + 1], -1.0));
                t.push((p[i + 1], p[i], -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0), (1, 1, 1.0)]);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![2.0, 5.0]);
    }

    #[test]
    fn single_unknown_and_identity() {
        let a = CsrMatrix::from_triplets(1, vec![(0, 0, 4.0)]);
        let (x, _) = solve_spd(&a, &[2.0]).unwrap();
        assert_eq!(x, vec![0.5]);
        let b = vec![1.0, -2.0, 3.5];
        let (x, _) = solve_spd(&CsrMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
        let (x, it) = conjugate_gradient(&CsrMatrix::identity(3), &b, 1e-14, 10).unwrap();
        assert_eq!(x, b);
        assert_eq!(it, 1);
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth() {
        let a = scrambled_laplacian(50);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        // A path graph has bandwidth one after reordering.
        assert_eq!(chol.envelope_size(), 2 * 50 - 1);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let a = scrambled_laplacian(200);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let x1 = chol.solve(&b);
        let (x2, _) = conjugate_gradient(&a, &b, 1e-13, 10_000).unwrap();
        assert!(relative_residual(&a, &x1, &b) < 1e-12);
        assert!(relative_residual(&a, &x2, &b) <= 1e-13);
        let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = x1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9 * scale);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            EnvelopeCholesky::factor(&a),
            Err(SolveError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve_spd(&CsrMatrix::identity(2), &[1.0]),
            Err(SolveError::DimensionMismatch { .. })
        ));
    }
}
