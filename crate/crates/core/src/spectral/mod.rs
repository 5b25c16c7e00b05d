//! Generalized Laplacian eigenpairs `L phi = lambda M phi` and the heat
//! kernel signature built from them.
//!
//! Two solvers share one contract: a dense one (whitening by `M^-1/2` and a
//! symmetric eigendecomposition) used for small meshes and as a reference,
//! and a shift-inverted block subspace iteration with Rayleigh-Ritz
//! projection for everything larger. Both return the `k` smallest pairs,
//! `M`-orthonormal and sorted ascending.

pub mod cache;
mod factor;
mod hks;

pub use factor::{reverse_cuthill_mckee, SkylineCholesky};
pub use hks::{compute_hks, heat_kernel_signature_at, standardize_channels, HksDescriptor};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::{cotangent_laplacian, face_geometry, mass_matrix, GeometryError, SparseSymMatrix};
use crate::mesh::Mesh;

/// Default number of eigenpairs.
pub const DEFAULT_EIGENPAIRS: usize = 128;
/// Default number of HKS time scales.
pub const DEFAULT_TIME_SCALES: usize = 16;
/// Largest problem the automatic solver choice sends to the dense path.
pub const DENSE_CROSSOVER: usize = 300;
/// Residual tolerance relative to `||L||_inf`.
pub const TOL_EIG: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge: residual {residual:.3e} > {tolerance:.3e} after {iterations} iterations")]
    ConvergenceFailure {
        residual: f64,
        tolerance: f64,
        iterations: usize,
    },
    #[error("spectrum has no nonzero eigenvalue")]
    AllZeroSpectrum,
    #[error("invalid eigenproblem: {0}")]
    InvalidInput(String),
    #[error("shifted operator is not positive definite (row {row}, pivot {pivot:.3e})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type SpectralResult<T> = Result<T, SpectralError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Dense for `n <= DENSE_CROSSOVER`, iterative otherwise.
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub solver: SolverKind,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            solver: SolverKind::Auto,
            seed: 0,
            tolerance: TOL_EIG,
            max_iterations: 2000,
        }
    }
}

/// The `k` smallest generalized eigenpairs; columns of `eigenvectors` are
/// `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// `max_j ||L phi_j - lambda_j M phi_j||_inf`.
    pub residual: f64,
    pub iterations: usize,
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }
}

/// Builds the cotangent Laplacian and lumped mass of `mesh` and solves for
/// `k` eigenpairs.
pub fn mesh_spectrum(mesh: &Mesh<f64>, k: usize, opts: &EigenOptions) -> SpectralResult<SpectralBasis> {
    let l = cotangent_laplacian(mesh)?;
    let m = mass_matrix(mesh, &face_geometry(mesh));
    solve_eigs(&l, &m, k, opts)
}

/// Solves `L phi = lambda M phi` for the `k` smallest eigenpairs (`k` is
/// clamped to `n`).
pub fn solve_eigs(
    l: &SparseSymMatrix<f64>,
    m: &SparseSymMatrix<f64>,
    k: usize,
    opts: &EigenOptions,
) -> SpectralResult<SpectralBasis> {
    if l.n != m.n {
        return Err(SpectralError::InvalidInput(format!(
            "dimension mismatch: L is {}, M is {}",
            l.n, m.n
        )));
    }
    if !m.is_diagonal() {
        return Err(SpectralError::InvalidInput("mass matrix must be diagonal".into()));
    }
    let mass = m.diagonal();
    if mass.iter().any(|&x| !(x > 0.0)) {
        return Err(SpectralError::InvalidInput("mass matrix must be positive".into()));
    }
    if k == 0 || l.n == 0 {
        return Err(SpectralError::InvalidInput("need k >= 1 and n >= 1".into()));
    }
    let k = k.min(l.n);
    let use_dense = match opts.solver {
        SolverKind::Dense => true,
        SolverKind::Iterative => false,
        SolverKind::Auto => l.n <= DENSE_CROSSOVER,
    };
    let basis = if use_dense {
        solve_dense(l, &mass, k)
    } else {
        solve_subspace(l, &mass, k, opts)?
    };
    let tolerance = opts.tolerance * l.inf_norm();
    if basis.residual > tolerance {
        return Err(SpectralError::ConvergenceFailure {
            residual: basis.residual,
            tolerance,
            iterations: basis.iterations,
        });
    }
    Ok(basis)
}

fn dense_of(l: &SparseSymMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(l.n, l.n, &l.to_dense())
}

/// Symmetric eigendecomposition sorted ascending. nalgebra's QR iteration
/// occasionally stops early and returns inaccurate pairs, so its result is
/// checked and replaced by cyclic Jacobi when the residual is too large.
fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let scale = h.abs().max().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(h.clone());
    let (mut values, mut vectors) = (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors);
    let residual = (&h * &vectors - &vectors * DMatrix::from_diagonal(&eig.eigenvalues)).abs().max();
    if !(residual <= 1e-10 * scale) {
        log::debug!("symmetric eigen residual {residual:.3e}, falling back to Jacobi");
        (values, vectors) = jacobi_eigen(h);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    (sorted, vectors.select_columns(&order))
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::identity(n, n);
    let total = a.norm_squared().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off <= 1e-30 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// `max_j ||L x_j - theta_j M x_j||_inf` given `LX` already formed.
fn residual_of(lx: &DMatrix<f64>, x: &DMatrix<f64>, mass: &[f64], theta: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (j, &t) in theta.iter().enumerate() {
        for i in 0..x.nrows() {
            worst = worst.max((lx[(i, j)] - t * mass[i] * x[(i, j)]).abs());
        }
    }
    worst
}

fn sparse_times(l: &SparseSymMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let col = l.matvec(x.column(c).as_slice());
        y.column_mut(c).copy_from_slice(&col);
    }
    y
}

fn solve_dense(l: &SparseSymMatrix<f64>, mass: &[f64], k: usize) -> SpectralBasis {
    let n = l.n;
    let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut c = dense_of(l);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= s[i] * s[j];
        }
    }
    let (values, vectors) = sorted_eigen(c);
    let mut phi = vectors.columns(0, k).into_owned();
    for i in 0..n {
        for j in 0..k {
            phi[(i, j)] *= s[i];
        }
    }
    let theta = values[..k].to_vec();
    let residual = residual_of(&sparse_times(l, &phi), &phi, mass, &theta);
    SpectralBasis {
        eigenvalues: theta,
        eigenvectors: phi,
        residual,
        iterations: 1,
    }
}

/// Makes the columns of `y` orthonormal in the `M` inner product (two passes
/// of modified Gram-Schmidt). Columns that collapse are replaced by fresh
/// random directions.
fn m_orthonormalize(y: &mut DMatrix<f64>, mass: &[f64], rng: &mut ChaCha8Rng) {
    let (n, p) = (y.nrows(), y.ncols());
    let mdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(mass).map(|((x, z), m)| x * m * z).sum() };
    for j in 0..p {
        for attempt in 0..3 {
            let before = {
                let c = y.column(j);
                mdot(c.as_slice(), c.as_slice()).sqrt()
            };
            for _pass in 0..2 {
                for i in 0..j {
                    let r = mdot(y.column(i).as_slice(), y.column(j).as_slice());
                    let ci = y.column(i).clone_owned();
                    y.column_mut(j).axpy(-r, &ci, 1.0);
                }
            }
            let nrm = {
                let c = y.column(j);
                mdot(c.as_slice(), c.as_slice()).sqrt()
            };
            if nrm > 1e-10 * before.max(f64::MIN_POSITIVE) && nrm > 0.0 {
                y.column_mut(j).scale_mut(1.0 / nrm);
                break;
            }
            assert!(attempt < 2, "cannot extend M-orthonormal basis");
            for i in 0..n {
                y[(i, j)] = StandardNormal.sample(rng);
            }
        }
    }
}

fn solve_subspace(
    l: &SparseSymMatrix<f64>,
    mass: &[f64],
    k: usize,
    opts: &EigenOptions,
) -> SpectralResult<SpectralBasis> {
    let n = l.n;
    let p = (k + (k / 2).max(8)).min(n);

    // Shift so L + sigma M is positive definite even with a nontrivial kernel.
    let lambda_scale = l
        .diagonal()
        .iter()
        .zip(mass)
        .map(|(d, m)| d / m)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let sigma = 1e-6 * lambda_scale;
    let shifted = SparseSymMatrix::from_triplets(
        n,
        l.entries
            .iter()
            .copied()
            .chain(mass.iter().enumerate().map(|(i, &m)| (i, i, sigma * m))),
    );
    let chol = SkylineCholesky::factor(&shifted)
        .map_err(|e| SpectralError::NotPositiveDefinite { row: e.row, pivot: e.pivot })?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let tolerance = opts.tolerance * l.inf_norm();
    let mut best = f64::INFINITY;

    for iter in 1..=opts.max_iterations.max(1) {
        // Y = (L + sigma M)^-1 M X
        let mut y = x.clone();
        for c in 0..p {
            let mut col = y.column_mut(c);
            for i in 0..n {
                col[i] *= mass[i];
            }
            chol.solve_in_place(col.as_mut_slice());
        }
        m_orthonormalize(&mut y, mass, &mut rng);

        let ly = sparse_times(l, &y);
        let mut h = y.transpose() * &ly;
        h = (&h + h.transpose()) * 0.5;
        let (theta, q) = sorted_eigen(h);
        x = &y * &q;
        let lx = ly * &q;

        let lead = x.columns(0, k).into_owned();
        let residual = residual_of(&lx.columns(0, k).into_owned(), &lead, mass, &theta[..k]);
        best = best.min(residual);
        if residual <= tolerance || p == n {
            return Ok(SpectralBasis {
                eigenvalues: theta[..k].to_vec(),
                eigenvectors: lead,
                residual,
                iterations: iter,
            });
        }
    }
    Err(SpectralError::ConvergenceFailure {
        residual: best,
        tolerance,
        iterations: opts.max_iterations,
    })
}
