//! Finite-difference Dirichlet Laplacian on a raster and its lowest
//! eigenpairs.
//!
//! The operator couples grid-adjacent interior nodes with `-1/h²`. Each link
//! from an interior node to an exterior one adds `1/(θh²)` to the diagonal,
//! where `θh` is the distance to the boundary crossing on that link; with
//! the staircase model `θ = 1` and the diagonal is `2N/h²`.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::RasterDomain;
use crate::{Error, Result};

/// Default seed of the start block.
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

const DENSE_LIMIT: usize = 300;
const MAX_ITERATIONS: usize = 2000;

/// Symmetric sparse matrix in compressed row form.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    h: f64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Builds the 5-point (2D) or 7-point (3D) Dirichlet Laplacian.
pub fn assemble(raster: &RasterDomain) -> SparseOperator {
    let n = raster.len();
    let h2 = 1.0 / (raster.spacing() * raster.spacing());
    let mut boundary_diag = vec![0.0; n];
    for link in raster.boundary_links() {
        boundary_diag[link.node] += h2 / link.fraction;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * (2 * raster.dim() + 1));
    let mut vals = Vec::with_capacity(cols.capacity());
    row_ptr.push(0);
    for a in 0..n {
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(7);
        let mut diag = boundary_diag[a];
        for axis in 0..raster.dim() {
            for forward in [false, true] {
                if let Some(b) = raster.neighbor(a, axis, forward) {
                    diag += h2;
                    row.push((b as u32, -h2));
                }
            }
        }
        row.push((a as u32, diag));
        row.sort_by_key(|e| e.0);
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    SparseOperator {
        dim: raster.dim(),
        h: raster.spacing(),
        row_ptr,
        cols,
        vals,
    }
}

impl SparseOperator {
    /// Number of unknowns `M`.
    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Cell measure `h^N`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().map(|&c| c as usize).zip(self.vals[range].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.row(i).all(|(j, v)| self.entry(j, i) == v))
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y
    }

    /// Discrete energy inner product `h^N · uᵀ A v`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        let av = self.apply_vec(v);
        self.cell() * u.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Discrete L² inner product `h^N · uᵀ v`.
    pub fn mass(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cell() * dot(u, v)
    }

    /// Energy over mass.
    pub fn rayleigh_quotient(&self, u: &[f64]) -> Result<f64> {
        let m = dot(u, u);
        if m == 0.0 || !m.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(dot(u, &self.apply_vec(u)) / m)
    }

    fn triplets_lower(&self) -> Vec<Triplet<usize, usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.len() {
            for (j, v) in self.row(i) {
                if j <= i {
                    t.push(Triplet::new(i, j, v));
                }
            }
        }
        t
    }
}

/// Rayleigh quotient of a node array on a raster.
pub fn rayleigh_quotient(raster: &RasterDomain, u: &[f64]) -> Result<f64> {
    assemble(raster).rayleigh_quotient(u)
}

/// The lowest eigenpairs with unit discrete L² eigenvectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub dim: usize,
    pub h: f64,
    pub eigenvalues: Vec<f64>,
    /// Node arrays with `Σ u_i² h^N = 1`; the largest entry is positive.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖Au - λu‖` in the discrete L² norm.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub block_size: usize,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

pub fn lowest_eigenpairs(op: &SparseOperator, k: usize, tol: f64) -> Result<SpectrumResult> {
    lowest_eigenpairs_seeded(op, k, tol, DEFAULT_SEED)
}

/// Block shift-invert iteration with Rayleigh–Ritz extraction, started from
/// a seeded random block of `k + 5` columns.
pub fn lowest_eigenpairs_seeded(op: &SparseOperator, k: usize, tol: f64, seed: u64) -> Result<SpectrumResult> {
    let n = op.len();
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("requested {k} eigenpairs of a {n}-node operator")));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance {tol} must be positive")));
    }
    let (values, vectors, iterations, block) = if n <= DENSE_LIMIT {
        let (v, x) = dense_eigenpairs(op, k)?;
        (v, x, 0, n)
    } else {
        subspace_iteration(op, k, tol, seed)?
    };
    let scale = op.cell().powf(-0.5);
    let mut result = SpectrumResult {
        dim: op.dim(),
        h: op.spacing(),
        eigenvalues: Vec::with_capacity(k),
        eigenvectors: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        iterations,
        block_size: block,
    };
    for (lambda, mut x) in values.into_iter().zip(vectors) {
        let ax = op.apply_vec(&x);
        let res = ax.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        let pivot = x
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, *v) } else { best });
        let sign = if pivot.1 < 0.0 { -scale } else { scale };
        x.iter_mut().for_each(|v| *v *= sign);
        result.eigenvalues.push(lambda);
        result.eigenvectors.push(x);
        result.residuals.push(res);
    }
    Ok(result)
}

fn dense_eigenpairs(op: &SparseOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.len();
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in op.row(i) {
            a[(i, j)] = v;
        }
    }
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Invalid(format!("dense eigensolver: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..k).map(|j| s[j]).collect();
    let vectors = (0..k).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((values, vectors))
}

type Pairs = (Vec<f64>, Vec<Vec<f64>>, usize, usize);

fn subspace_iteration(op: &SparseOperator, k: usize, tol: f64, seed: u64) -> Result<Pairs> {
    let n = op.len();
    let p = (k + 5).min(n);
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &op.triplets_lower())
        .map_err(|e| Error::Invalid(format!("sparse assembly: {e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Invalid(format!("sparse Cholesky: {e:?}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block = Mat::<f64>::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let mut best = vec![f64::INFINITY; k];
    for iteration in 1..=MAX_ITERATIONS {
        llt.solve_in_place(block.as_mut());
        let mut q: Vec<Vec<f64>> = (0..p).map(|j| block.col_as_slice(j).to_vec()).collect();
        orthonormalize(&mut q);
        let aq: Vec<Vec<f64>> = q.iter().map(|c| op.apply_vec(c)).collect();
        let mut h = Mat::<f64>::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let v = 0.5 * (dot(&q[i], &aq[j]) + dot(&q[j], &aq[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Invalid(format!("Ritz eigensolver: {e:?}")))?;
        let theta: Vec<f64> = (0..p).map(|j| eig.S().column_vector()[j]).collect();
        let w = eig.U();
        let mut ritz = vec![vec![0.0; n]; p];
        let mut residual = vec![0.0; k];
        for j in 0..p {
            let x = &mut ritz[j];
            let mut ax = if j < k { vec![0.0; n] } else { Vec::new() };
            for (i, (qi, aqi)) in q.iter().zip(&aq).enumerate() {
                let c = w[(i, j)];
                axpy(c, qi, x);
                if j < k {
                    axpy(c, aqi, &mut ax);
                }
            }
            if j < k {
                residual[j] = ax.iter().zip(x.iter()).map(|(a, b)| (a - theta[j] * b).powi(2)).sum::<f64>().sqrt();
            }
        }
        for (b, r) in best.iter_mut().zip(&residual) {
            *b = b.min(*r);
        }
        if residual.iter().all(|r| *r <= tol * theta[k - 1]) {
            ritz.truncate(k);
            return Ok((theta[..k].to_vec(), ritz, iteration, p));
        }
        for (j, col) in ritz.iter().enumerate() {
            block.col_as_slice_mut(j).copy_from_slice(col);
        }
    }
    Err(Error::SolverFailure {
        iterations: MAX_ITERATIONS,
        residuals: best,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

// Modified Gram–Schmidt, two passes.
fn orthonormalize(q: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for j in 0..q.len() {
            let (done, rest) = q.split_at_mut(j);
            let col = &mut rest[0];
            for prev in done.iter() {
                let c = dot(prev, col);
                axpy(-c, prev, col);
            }
            let norm = dot(col, col).sqrt();
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// Richardson extrapolation of a second-order quantity from spacings `h`
/// and `h/2`: `(4λ_fine - λ_coarse) / 3`.
pub fn extrapolate(coarse: (f64, f64), fine: (f64, f64)) -> Result<f64> {
    if (coarse.0 - 2.0 * fine.0).abs() > 1e-12 * coarse.0 {
        return Err(Error::SpacingMismatch {
            coarse: coarse.0,
            fine: fine.0,
        });
    }
    Ok((4.0 * fine.1 - coarse.1) / 3.0)
}

/// Groups sorted eigenvalues whose relative gap is below `rel`.
pub fn clusters(values: &[f64], rel: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(group) if (v - values[*group.last().unwrap()]).abs() <= rel * v.abs() => group.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}
