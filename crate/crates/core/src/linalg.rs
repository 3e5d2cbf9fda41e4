//! Sparse symmetric positive-definite systems: CSR storage, a banded Cholesky
//! factorization and Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if c >= n {
                    return Err(Error::Assembly(format!("column {c} out of range for size {n}")));
                }
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n, row_ptr, cols, vals })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), vals: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, v)| {
                let w = self.get(j, i);
                (v - w).abs() <= rel_tol * v.abs().max(w.abs())
            })
        })
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        norm(&ax.iter().zip(b).map(|(a, b)| b - a).collect::<Vec<_>>())
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower factor `L` of `P A Pᵀ = L Lᵀ` stored row-wise inside the band.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    band: usize,
    data: Vec<f64>,
    /// new index -> original index
    perm: Vec<usize>,
}

impl BandedCholesky {
    /// `perm[new] = old`; the permuted matrix must have half-bandwidth ≤ `band`.
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>, band: usize) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::LinearSolver("ordering length differs from matrix size".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let w = band + 1;
        let mut data = vec![0.0; n * w];
        for (i, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let j = inv[c];
                if j <= i {
                    if i - j > band {
                        return Err(Error::LinearSolver(format!("entry ({i},{j}) lies outside half-bandwidth {band}")));
                    }
                    data[i * w + j + band - i] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(band);
            for j in lo..=i {
                let ri = i * w + band - i;
                let rj = j * w + band - j;
                let dot: f64 = (lo..j).map(|k| data[ri + k] * data[rj + k]).sum();
                let s = data[ri + j] - dot;
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::LinearSolver(format!(
                            "matrix is not positive definite at pivot {i} ({s:e})"
                        )));
                    }
                    data[ri + i] = s.sqrt();
                } else {
                    data[ri + j] = s / data[rj + j];
                }
            }
        }
        Ok(Self { n, band, data, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, band, w) = (self.n, self.band, self.band + 1);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let ri = i * w + band - i;
            let lo = i.saturating_sub(band);
            let s: f64 = (lo..i).map(|k| self.data[ri + k] * y[k]).sum();
            y[i] = (y[i] - s) / self.data[ri + i];
        }
        for i in (0..n).rev() {
            let hi = (i + band).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|k| self.data[k * w + band - k + i] * y[k]).sum();
            y[i] = (y[i] - s) / self.data[i * w + band];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Direct solve with a few steps of iterative refinement.
pub fn solve_banded(a: &CsrMatrix, b: &[f64], perm: Vec<usize>, band: usize, rel_tol: f64) -> Result<Vec<f64>> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; a.dim()]);
    }
    let chol = BandedCholesky::factor(a, perm, band)?;
    let mut x = chol.solve(b);
    for _ in 0..4 {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if norm(&r) <= 1e-3 * rel_tol * bnorm {
            break;
        }
        let dx = chol.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    }
    check_residual(a, &x, b, rel_tol)?;
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diagonal();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::LinearSolver("nonpositive diagonal entry".into()));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::LinearSolver("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= 0.1 * rel_tol * bnorm {
            check_residual(a, &x, b, rel_tol)?;
            return Ok(x);
        }
        z = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver(format!("conjugate gradients did not converge in {max_iter} iterations")))
}

fn check_residual(a: &CsrMatrix, x: &[f64], b: &[f64], rel_tol: f64) -> Result<()> {
    let rel = a.residual_norm(x, b) / norm(b);
    if !(rel <= rel_tol) {
        return Err(Error::LinearSolver(format!("relative residual {rel:e} exceeds {rel_tol:e}")));
    }
    Ok(())
}
