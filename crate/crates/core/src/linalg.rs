//! Solver glue: Dirichlet reduction, sparse Cholesky (via faer), the
//! block-Cholesky of discontinuous pressure mass matrices, symmetric
//! eigenvalue helpers for the stability pencils, and a deflated
//! preconditioned CG for the pressure Schur complement.

use faer::prelude::*;
use faer::Side;

use crate::error::{Error, Result};
use crate::space::{FESpace, SpaceKind};
use crate::sparse::SparseMatrix;

/// Restricts faer to one thread; results are then independent of the host's
/// thread pool, which the CLI needs for byte-identical reruns.
pub fn set_sequential() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Mapping between a full dof set and its unconstrained subset.
pub struct DofReduction {
    free: Vec<usize>,
    full_len: usize,
}

impl DofReduction {
    pub fn from_space(space: &FESpace) -> Self {
        DofReduction {
            free: space.free_dofs(),
            full_len: space.dof_count(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Symmetric elimination: keeps free rows and columns.
    pub fn reduce_square(&self, m: &SparseMatrix) -> SparseMatrix {
        m.submatrix(&self.free, &self.free)
    }

    /// Keeps all rows, free columns (for the mixed operator).
    pub fn reduce_columns(&self, m: &SparseMatrix) -> SparseMatrix {
        let rows: Vec<usize> = (0..m.nrows()).collect();
        m.submatrix(&rows, &self.free)
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        debug_assert_eq!(full.len(), self.full_len);
        self.free.iter().map(|&i| full[i]).collect()
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        debug_assert_eq!(reduced.len(), self.free.len());
        let mut full = vec![0.0; self.full_len];
        for (r, &i) in self.free.iter().enumerate() {
            full[i] = reduced[r];
        }
        full
    }
}

/// Sparse symmetric positive definite factorization, computed once and
/// reused for the many solves the Schur complement needs.
pub struct SpdFactor {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(m: &SparseMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::SingularSystem(format!(
                "cannot factor a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let mat = m.to_faer()?;
        let symbolic =
            faer::sparse::linalg::solvers::SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                .map_err(|e| Error::SingularSystem(format!("symbolic factorization: {e:?}")))?;
        let llt = faer::sparse::linalg::solvers::Llt::try_new_with_symbolic(
            symbolic,
            mat.as_ref(),
            Side::Lower,
        )
        .map_err(|e| Error::SingularSystem(format!("numeric factorization: {e:?}")))?;
        Ok(SpdFactor { llt, n: m.nrows() })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: Mat<f64>) -> Mat<f64> {
        debug_assert_eq!(b.nrows(), self.n);
        self.llt.solve(&b)
    }
}

/// Cholesky factor of a discontinuous pressure mass matrix: independent
/// 3x3 blocks for P1d, a diagonal for P0.
pub enum MassFactor {
    Blocks3(Vec<[f64; 6]>),
    Diagonal(Vec<f64>),
}

impl MassFactor {
    pub fn new(mass: &SparseMatrix, kind: SpaceKind) -> Result<Self> {
        match kind {
            SpaceKind::ScalarP1Disc => {
                let nc = mass.nrows() / 3;
                let mut blocks = Vec::with_capacity(nc);
                for c in 0..nc {
                    let b = 3 * c;
                    let a11 = mass.get(b, b);
                    let a21 = mass.get(b + 1, b);
                    let a31 = mass.get(b + 2, b);
                    let a22 = mass.get(b + 1, b + 1);
                    let a32 = mass.get(b + 2, b + 1);
                    let a33 = mass.get(b + 2, b + 2);
                    if a11 <= 0.0 {
                        return Err(Error::SingularSystem(format!(
                            "mass block {c} is not positive definite"
                        )));
                    }
                    let l11 = a11.sqrt();
                    let l21 = a21 / l11;
                    let l31 = a31 / l11;
                    let d22 = a22 - l21 * l21;
                    if d22 <= 0.0 {
                        return Err(Error::SingularSystem(format!(
                            "mass block {c} is not positive definite"
                        )));
                    }
                    let l22 = d22.sqrt();
                    let l32 = (a32 - l31 * l21) / l22;
                    let d33 = a33 - l31 * l31 - l32 * l32;
                    if d33 <= 0.0 {
                        return Err(Error::SingularSystem(format!(
                            "mass block {c} is not positive definite"
                        )));
                    }
                    blocks.push([l11, l21, l22, l31, l32, d33.sqrt()]);
                }
                Ok(MassFactor::Blocks3(blocks))
            }
            SpaceKind::ScalarP0 => {
                let mut diag = Vec::with_capacity(mass.nrows());
                for i in 0..mass.nrows() {
                    let d = mass.get(i, i);
                    if d <= 0.0 {
                        return Err(Error::SingularSystem(format!(
                            "mass diagonal entry {i} is not positive"
                        )));
                    }
                    diag.push(d.sqrt());
                }
                Ok(MassFactor::Diagonal(diag))
            }
            SpaceKind::VectorP2 => Err(Error::InvalidParameter(
                "mass factor expects a pressure space".into(),
            )),
        }
    }

    /// In-place forward solve `x <- L^{-1} x`.
    pub fn solve_lower(&self, x: &mut [f64]) {
        match self {
            MassFactor::Blocks3(blocks) => {
                for (c, l) in blocks.iter().enumerate() {
                    let b = 3 * c;
                    let [l11, l21, l22, l31, l32, l33] = *l;
                    x[b] /= l11;
                    x[b + 1] = (x[b + 1] - l21 * x[b]) / l22;
                    x[b + 2] = (x[b + 2] - l31 * x[b] - l32 * x[b + 1]) / l33;
                }
            }
            MassFactor::Diagonal(d) => {
                for (xi, di) in x.iter_mut().zip(d) {
                    *xi /= di;
                }
            }
        }
    }

    /// In-place backward solve `x <- L^{-T} x`.
    pub fn solve_lower_transpose(&self, x: &mut [f64]) {
        match self {
            MassFactor::Blocks3(blocks) => {
                for (c, l) in blocks.iter().enumerate() {
                    let b = 3 * c;
                    let [l11, l21, l22, l31, l32, l33] = *l;
                    x[b + 2] /= l33;
                    x[b + 1] = (x[b + 1] - l32 * x[b + 2]) / l22;
                    x[b] = (x[b] - l21 * x[b + 1] - l31 * x[b + 2]) / l11;
                }
            }
            MassFactor::Diagonal(d) => {
                for (xi, di) in x.iter_mut().zip(d) {
                    *xi /= di;
                }
            }
        }
    }

    /// In-place full solve `x <- M^{-1} x`.
    pub fn solve(&self, x: &mut [f64]) {
        self.solve_lower(x);
        self.solve_lower_transpose(x);
    }

    /// In-place multiply `x <- L^T x`.
    pub fn apply_lower_transpose(&self, x: &mut [f64]) {
        match self {
            MassFactor::Blocks3(blocks) => {
                for (c, l) in blocks.iter().enumerate() {
                    let b = 3 * c;
                    let [l11, l21, l22, l31, l32, l33] = *l;
                    x[b] = l11 * x[b] + l21 * x[b + 1] + l31 * x[b + 2];
                    x[b + 1] = l22 * x[b + 1] + l32 * x[b + 2];
                    x[b + 2] = l33 * x[b + 2];
                }
            }
            MassFactor::Diagonal(d) => {
                for (xi, di) in x.iter_mut().zip(d) {
                    *xi *= di;
                }
            }
        }
    }
}

/// Dense Cholesky for the small symmetric positive definite systems of the
/// macro-element eigenproblem; row-major storage.
pub struct DenseChol {
    n: usize,
    l: Vec<f64>,
}

impl DenseChol {
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::SingularSystem(format!(
                            "matrix is not positive definite at pivot {i}"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(DenseChol { n, l })
    }

    pub fn solve_lower(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let mut sum = x[i];
            for k in 0..i {
                sum -= self.l[i * self.n + k] * x[k];
            }
            x[i] = sum / self.l[i * self.n + i];
        }
    }

    pub fn solve_lower_transpose(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut sum = x[i];
            for k in i + 1..self.n {
                sum -= self.l[k * self.n + i] * x[k];
            }
            x[i] = sum / self.l[i * self.n + i];
        }
    }
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn sym_eigenvalues(mat: Mat<f64>) -> Result<Vec<f64>> {
    let n = mat.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut vals = mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigSolver(format!("{e:?}")))?;
    vals.sort_by(|a: &f64, b: &f64| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Smallest eigenvalue of the pencil `S x = lambda M x`, with `M` given by
/// its block Cholesky, optionally restricted to the M-orthogonal complement
/// of constants. The restriction is realized by transforming with `L^{-1}`
/// (so the basis is M-orthonormal and the mass becomes the identity) and
/// deflating the image of the constant vector with one Householder
/// reflection.
pub fn pencil_smallest_eigenvalue(
    s: &Mat<f64>,
    mass: &MassFactor,
    deflate_constants: bool,
) -> Result<f64> {
    let m = s.nrows();
    assert_eq!(s.ncols(), m);

    // T = L^{-1} S L^{-T}, symmetrized to clean up roundoff.
    let mut t = Mat::<f64>::zeros(m, m);
    let mut buf = vec![0.0; m];
    for j in 0..m {
        for i in 0..m {
            buf[i] = s[(i, j)];
        }
        mass.solve_lower(&mut buf);
        for i in 0..m {
            t[(i, j)] = buf[i];
        }
    }
    for i in 0..m {
        for j in 0..m {
            buf[j] = t[(i, j)];
        }
        mass.solve_lower(&mut buf);
        for j in 0..m {
            t[(i, j)] = buf[j];
        }
    }
    for i in 0..m {
        for j in 0..i {
            let avg = 0.5 * (t[(i, j)] + t[(j, i)]);
            t[(i, j)] = avg;
            t[(j, i)] = avg;
        }
    }

    if !deflate_constants {
        let vals = sym_eigenvalues(t)?;
        return Ok(vals[0]);
    }

    if m < 2 {
        return Err(Error::SingularSystem(
            "mean-zero pressure space is empty".into(),
        ));
    }

    // Image of the constant pressure under L^T, normalized.
    let mut w = vec![1.0; m];
    mass.apply_lower_transpose(&mut w);
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v /= norm;
    }

    // Householder u maps w to -sign(w0) e0.
    let mut u = w;
    u[0] += u[0].signum();
    let uu: f64 = u.iter().map(|v| v * v).sum();
    let beta = 2.0 / uu;

    // T <- H T H with H = I - beta u u^T.
    let mut tu = vec![0.0; m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += t[(i, j)] * u[j];
        }
        tu[i] = acc;
    }
    let utu: f64 = u.iter().zip(&tu).map(|(a, b)| a * b).sum();
    for i in 0..m {
        for j in 0..m {
            t[(i, j)] += beta * beta * utu * u[i] * u[j] - beta * (u[i] * tu[j] + tu[i] * u[j]);
        }
    }

    // Trailing block is the operator on the mean-zero subspace.
    let reduced = Mat::from_fn(m - 1, m - 1, |i, j| t[(i + 1, j + 1)]);
    let vals = sym_eigenvalues(reduced)?;
    Ok(vals[0])
}

/// Outcome of a [`pcg`] solve.
#[derive(Clone, Copy, Debug)]
pub struct PcgStats {
    pub iterations: usize,
    /// Final relative residual in the preconditioner norm.
    pub rel_residual: f64,
}

/// Preconditioned conjugate gradients for a consistent (possibly singular)
/// symmetric positive semidefinite system. `apply` computes `S x`;
/// `precondition` applies the preconditioner in place. Convergence is
/// monitored in the preconditioner norm `sqrt(r^T P r)`; when `project_mean`
/// is set, the Euclidean kernel component of constants is removed from the
/// residual every iteration.
pub fn pcg<A, P>(
    apply: A,
    precondition: P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iterations: usize,
    project_mean: bool,
) -> Result<PcgStats>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&mut [f64]),
{
    let n = b.len();
    let project = |v: &mut [f64]| {
        if project_mean {
            let mean = v.iter().sum::<f64>() / n as f64;
            for vi in v.iter_mut() {
                *vi -= mean;
            }
        }
    };

    let mut r = b.to_vec();
    project(&mut r);
    if x.iter().any(|&v| v != 0.0) {
        let sx = apply(x);
        for i in 0..n {
            r[i] -= sx[i];
        }
        project(&mut r);
    }

    let mut z = r.clone();
    precondition(&mut z);
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let target = tol * tol * rz.max(0.0);
    if rz <= 0.0 || target == 0.0 {
        return Ok(PcgStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let rz0 = rz;

    let mut d = z.clone();
    let mut best = rz;
    let mut stalled = 0usize;
    for it in 1..=max_iterations {
        let q = apply(&d);
        let dq: f64 = d.iter().zip(&q).map(|(a, b)| a * b).sum();
        if dq <= 0.0 {
            // direction fell into the kernel; the projected residual is our answer
            return Ok(PcgStats {
                iterations: it - 1,
                rel_residual: (rz / rz0).sqrt(),
            });
        }
        let alpha = rz / dq;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        project(&mut r);
        z.copy_from_slice(&r);
        precondition(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        if rz_new <= target {
            return Ok(PcgStats {
                iterations: it,
                rel_residual: (rz_new.max(0.0) / rz0).sqrt(),
            });
        }
        if rz_new < best * 0.999 {
            best = rz_new;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 60 {
                // stagnation at the attainable floor
                return Ok(PcgStats {
                    iterations: it,
                    rel_residual: (rz_new.max(0.0) / rz0).sqrt(),
                });
            }
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    Err(Error::NonConvergence {
        residual: (rz / rz0).sqrt(),
        iterations: max_iterations,
    })
}

/// Deterministic pseudo-random unit vector (xorshift64*), used to seed the
/// inverse power iteration without pulling in an RNG dependency.
pub fn deterministic_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.max(1);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        let r = state.wrapping_mul(0x2545F4914F6CDD1D);
        v.push((r >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
    }
    v
}
