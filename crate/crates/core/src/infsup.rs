//! Inf-sup (LBB) constants, computed from the spectrum of the pressure Schur
//! complement: with `K` the Dirichlet-reduced gradient stiffness, `B` the
//! divergence operator and `M` the pressure mass matrix,
//! `beta^2` is the smallest eigenvalue of `S = B K^{-1} B^T` against `M`,
//! restricted to the mean-zero pressure subspace.

use faer::Mat;

use crate::assembly::{
    assemble_divergence, assemble_divergence_gram, assemble_gradient_stiffness, assemble_mass,
};
use crate::error::{Error, Result};
use crate::geometry::{signed_area_x2, Point2};
use crate::linalg::{
    deterministic_vector, pcg, pencil_smallest_eigenvalue, sym_eigenvalues, DenseChol,
    DofReduction, MassFactor, SpdFactor,
};
use crate::mesh::{Cell, Mesh2D};
use crate::space::{FESpace, SpaceKind};
use crate::sparse::SparseMatrix;
use crate::triangle::{analyze_triangle, split_point, SplitStrategy};

/// Velocity/pressure pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressurePair {
    /// Scott-Vogelius: continuous P2 velocity, discontinuous P1 pressure.
    SvP2P1d,
    /// Continuous P2 velocity, piecewise-constant pressure.
    P2P0,
}

impl PressurePair {
    pub fn pressure_kind(self) -> SpaceKind {
        match self {
            PressurePair::SvP2P1d => SpaceKind::ScalarP1Disc,
            PressurePair::P2P0 => SpaceKind::ScalarP0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PressurePair::SvP2P1d => "sv",
            PressurePair::P2P0 => "p2p0",
        }
    }
}

impl std::str::FromStr for PressurePair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sv" => Ok(PressurePair::SvP2P1d),
            "p2p0" => Ok(PressurePair::P2P0),
            other => Err(Error::InvalidParameter(format!(
                "unknown pair '{other}' (expected sv or p2p0)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InfSupOptions {
    /// Force the matrix-free inverse power iteration instead of the dense
    /// eigensolver.
    pub iterative: bool,
    /// Largest pressure dof count handled by the dense path.
    pub dense_limit: usize,
    /// Relative change between successive eigenvalue estimates at which the
    /// power iteration stops.
    pub power_tol: f64,
    pub max_power_iterations: usize,
}

impl Default for InfSupOptions {
    fn default() -> Self {
        InfSupOptions {
            iterative: false,
            dense_limit: 10_000,
            power_tol: 1e-10,
            max_power_iterations: 200,
        }
    }
}

/// Discrete operators of one velocity/pressure pairing on a mesh, reduced by
/// the homogeneous Dirichlet velocity constraints.
pub struct PairOperators {
    pub stiffness: SparseMatrix,
    pub divergence: SparseMatrix,
    pub mass: SparseMatrix,
    pub mass_factor: MassFactor,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
}

pub fn build_pair_operators(mesh: &Mesh2D, pair: PressurePair) -> Result<PairOperators> {
    let vel = FESpace::build(mesh, SpaceKind::VectorP2, true);
    let reduction = DofReduction::from_space(&vel);
    if reduction.n_free() == 0 {
        return Err(Error::SingularSystem(
            "no interior velocity dofs on this mesh".into(),
        ));
    }
    let prs = FESpace::build(mesh, pair.pressure_kind(), false);

    let stiffness = reduction.reduce_square(&assemble_gradient_stiffness(&vel)?);
    let divergence = reduction.reduce_columns(&assemble_divergence(&vel, &prs)?);
    let mass = assemble_mass(&prs)?;
    let mass_factor = MassFactor::new(&mass, pair.pressure_kind())?;

    Ok(PairOperators {
        stiffness,
        divergence,
        mass,
        mass_factor,
        velocity_dofs: reduction.n_free(),
        pressure_dofs: prs.dof_count(),
    })
}

impl PairOperators {
    /// Applies the Schur complement `S p = B K^{-1} B^T p`.
    pub fn apply_schur(&self, factor: &SpdFactor, p: &[f64]) -> Vec<f64> {
        let mut bt = vec![0.0; self.velocity_dofs];
        self.divergence.matvec_transpose(p, &mut bt);
        let y = factor.solve_vec(&bt);
        let mut out = vec![0.0; self.pressure_dofs];
        self.divergence.matvec(&y, &mut out);
        out
    }

    /// Forms the dense Schur complement column by column through the sparse
    /// factorization of `K`.
    pub fn dense_schur(&self, factor: &SpdFactor) -> Mat<f64> {
        let m = self.pressure_dofs;
        let n = self.velocity_dofs;
        let mut s = Mat::<f64>::zeros(m, m);
        const CHUNK: usize = 128;
        let mut col = 0;
        while col < m {
            let width = CHUNK.min(m - col);
            let mut rhs = Mat::<f64>::zeros(n, width);
            for local in 0..width {
                let (cols, vals) = self.divergence.row(col + local);
                for (&j, &v) in cols.iter().zip(vals) {
                    rhs[(j, local)] = v;
                }
            }
            let sol = factor.solve_mat(rhs);
            let mut y = vec![0.0; n];
            let mut sc = vec![0.0; m];
            for local in 0..width {
                for i in 0..n {
                    y[i] = sol[(i, local)];
                }
                self.divergence.matvec(&y, &mut sc);
                for i in 0..m {
                    s[(i, col + local)] = sc[i];
                }
            }
            col += width;
        }
        s
    }

    /// Projects a pressure vector onto the mean-zero subspace (M-orthogonal
    /// complement of constants).
    pub fn project_mean_zero(&self, p: &mut [f64]) {
        let mut mp = vec![0.0; self.pressure_dofs];
        self.mass.matvec(p, &mut mp);
        let num: f64 = mp.iter().sum();
        let ones = vec![1.0; self.pressure_dofs];
        let mut m1 = vec![0.0; self.pressure_dofs];
        self.mass.matvec(&ones, &mut m1);
        let den: f64 = m1.iter().sum();
        let mean = num / den;
        for pi in p.iter_mut() {
            *pi -= mean;
        }
    }

    pub fn m_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut mb = vec![0.0; self.pressure_dofs];
        self.mass.matvec(b, &mut mb);
        a.iter().zip(&mb).map(|(x, y)| x * y).sum()
    }
}

/// Inf-sup constant of a pairing on a mesh; dense eigensolve by default,
/// matrix-free inverse power iteration when requested or when the pressure
/// space exceeds the dense limit.
pub fn global_infsup(mesh: &Mesh2D, pair: PressurePair) -> Result<f64> {
    global_infsup_with(mesh, pair, &InfSupOptions::default())
}

pub fn global_infsup_with(mesh: &Mesh2D, pair: PressurePair, opts: &InfSupOptions) -> Result<f64> {
    let ops = build_pair_operators(mesh, pair)?;
    let factor = SpdFactor::new(&ops.stiffness)?;
    let lambda = if opts.iterative || ops.pressure_dofs > opts.dense_limit {
        smallest_schur_eigenvalue_iterative(&ops, &factor, opts)?
    } else {
        let s = ops.dense_schur(&factor);
        pencil_smallest_eigenvalue(&s, &ops.mass_factor, true)?
    };
    if !lambda.is_finite() {
        return Err(Error::EigSolver(format!("non-finite eigenvalue {lambda}")));
    }
    Ok(lambda.max(0.0).sqrt())
}

/// Inverse power iteration on the pencil `(S, M)` restricted to mean-zero
/// pressures; each step solves `S y = M x` with mass-preconditioned CG.
fn smallest_schur_eigenvalue_iterative(
    ops: &PairOperators,
    factor: &SpdFactor,
    opts: &InfSupOptions,
) -> Result<f64> {
    let m = ops.pressure_dofs;
    let mut x = deterministic_vector(m, 0x5eed_cafe);
    ops.project_mean_zero(&mut x);
    let norm = ops.m_dot(&x, &x).sqrt();
    for xi in &mut x {
        *xi /= norm;
    }

    let mut lambda_old = f64::INFINITY;
    let mut y = vec![0.0; m];
    for _ in 1..=opts.max_power_iterations {
        let mut rhs = vec![0.0; m];
        ops.mass.matvec(&x, &mut rhs);
        // warm start from the previous direction
        pcg(
            |v| ops.apply_schur(factor, v),
            |z| ops.mass_factor.solve(z),
            &rhs,
            &mut y,
            1e-12,
            40 * m + 1000,
            true,
        )?;
        ops.project_mean_zero(&mut y);
        let ymy = ops.m_dot(&y, &y);
        let ymx = ops.m_dot(&y, &x);
        if !(ymy > 0.0) {
            return Err(Error::EigSolver("power iteration collapsed".into()));
        }
        let lambda = ymx / ymy;
        let ynorm = ymy.sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ynorm;
        }
        if (lambda - lambda_old).abs() <= opts.power_tol * lambda.abs() {
            return Ok(lambda);
        }
        lambda_old = lambda;
    }
    Err(Error::NonConvergence {
        residual: f64::NAN,
        iterations: opts.max_power_iterations,
    })
}

/// Macro-element stability data: the interior velocity dofs of a single
/// Clough-Tocher split (split vertex plus three interior edge midpoints, two
/// components each) against their divergence.
#[derive(Clone, Copy, Debug)]
pub struct LocalStabilityResult {
    /// `sqrt` of the smallest eigenvalue of `G v = lambda K v` on the
    /// interior dofs, `G` the divergence Gram and `K` the stiffness.
    pub beta_local: f64,
    pub interior_dof_count: usize,
    /// Rank of `G`; equals the dof count exactly when the divergence maps
    /// the interior space onto the mean-zero pressures bijectively.
    pub divergence_rank: usize,
}

pub fn local_infsup(p: &[Point2; 3], strategy: SplitStrategy) -> Result<LocalStabilityResult> {
    let mut p = *p;
    if signed_area_x2(p[0], p[1], p[2]) < 0.0 {
        p.swap(1, 2);
    }
    let z0 = split_point(&p, strategy)?;
    let mesh = Mesh2D::new(
        vec![p[0], p[1], p[2], z0],
        vec![Cell::new(0, 1, 3), Cell::new(1, 2, 3), Cell::new(2, 0, 3)],
        None,
    )?;
    let vel = FESpace::build(&mesh, SpaceKind::VectorP2, true);
    let reduction = DofReduction::from_space(&vel);
    let n = reduction.n_free();

    let k = reduction.reduce_square(&assemble_gradient_stiffness(&vel)?);
    let g = reduction.reduce_square(&assemble_divergence_gram(&vel)?);

    let dense = |m: &SparseMatrix| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i * n + j] = v;
            }
        }
        out
    };
    let kd = dense(&k);
    let gd = dense(&g);

    let chol = DenseChol::new(&kd, n)
        .map_err(|_| Error::SingularSystem("macro-element stiffness is singular".into()))?;

    // T = L^{-1} G L^{-T}
    let mut t = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = gd[i * n + j];
        }
        chol.solve_lower(&mut col);
        for i in 0..n {
            t[i * n + j] = col[i];
        }
    }
    for i in 0..n {
        col.copy_from_slice(&t[i * n..(i + 1) * n]);
        chol.solve_lower(&mut col);
        t[i * n..(i + 1) * n].copy_from_slice(&col);
    }
    let tm = Mat::from_fn(n, n, |i, j| 0.5 * (t[i * n + j] + t[j * n + i]));
    let pencil = sym_eigenvalues(tm)?;
    let beta_local = pencil[0].max(0.0).sqrt();

    let gm = Mat::from_fn(n, n, |i, j| gd[i * n + j]);
    let gev = sym_eigenvalues(gm)?;
    let gmax = gev.last().copied().unwrap_or(0.0);
    let divergence_rank = gev.iter().filter(|&&v| v > 1e-12 * gmax).count();

    Ok(LocalStabilityResult {
        beta_local,
        interior_dof_count: n,
        divergence_rank,
    })
}

/// Composition of the macro-element and P2-P0 constants into a global bound:
/// `beta0 beta* / (beta* + beta0 + 1)`, always below both inputs.
pub fn compose_beta(beta0: f64, beta_star: f64) -> Result<f64> {
    if !(beta0 > 0.0 && beta_star > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "composition requires positive constants, got {beta0} and {beta_star}"
        )));
    }
    Ok(beta0 * beta_star / (beta_star + beta0 + 1.0))
}

/// One row of a refinement study.
#[derive(Clone, Copy, Debug)]
pub struct InfSupRow {
    pub level: usize,
    pub beta: f64,
    pub aspect: f64,
    /// `ln(beta_{k-1}/beta_k) / ln(aspect_k/aspect_{k-1})`; absent on the
    /// first row.
    pub rate: Option<f64>,
}

/// Study results for one strategy and pairing.
#[derive(Clone, Debug)]
pub struct InfSupReport {
    pub rows: Vec<InfSupRow>,
    pub pair: PressurePair,
    pub strategy: SplitStrategy,
}

/// Decay-rate table: pairs consecutive `(beta, aspect)` rows.
pub fn rate_table(betas: &[f64], aspects: &[f64]) -> Result<Vec<InfSupRow>> {
    if betas.len() != aspects.len() || betas.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "rate table needs two equal-length sequences of at least two entries, got {} and {}",
            betas.len(),
            aspects.len()
        )));
    }
    if betas.iter().chain(aspects).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(
            "rate table entries must be positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(betas.len());
    for i in 0..betas.len() {
        let rate = if i == 0 {
            None
        } else {
            Some((betas[i - 1] / betas[i]).ln() / (aspects[i] / aspects[i - 1]).ln())
        };
        rows.push(InfSupRow {
            level: i + 1,
            beta: betas[i],
            aspect: aspects[i],
            rate,
        });
    }
    Ok(rows)
}

/// Largest aspect ratio over the cells of a mesh.
pub fn max_cell_aspect(mesh: &Mesh2D) -> Result<f64> {
    let mut max = 0.0f64;
    for c in 0..mesh.cells().len() {
        let m = analyze_triangle(&mesh.cell_points(c)).map_err(|e| match e {
            Error::DegenerateTriangle { area, tol } => {
                Error::DegenerateCell { cell: c, area, tol }
            }
            other => other,
        })?;
        max = max.max(m.aspect);
    }
    Ok(max)
}

/// Hard cap on the pressure dof count of a refinement study unless iterative
/// mode is requested.
pub const STUDY_PRESSURE_DOF_GUARD: usize = 100_000;

/// Repeated Clough-Tocher refinement of an `n0 x n0` unit-square mesh,
/// recording the inf-sup constant and maximum aspect ratio at every level.
pub fn refinement_study(
    n0: usize,
    strategy: SplitStrategy,
    levels: usize,
    pair: PressurePair,
    opts: &InfSupOptions,
) -> Result<InfSupReport> {
    if levels < 1 {
        return Err(Error::InvalidParameter(
            "refinement study needs at least one level".into(),
        ));
    }
    let mut mesh = crate::mesh::generate_unit_square_mesh(n0, crate::mesh::Diagonal::RightUp)?;
    let mut betas = Vec::with_capacity(levels);
    let mut aspects = Vec::with_capacity(levels);
    for _ in 0..levels {
        mesh = crate::mesh::clough_tocher_refine(&mesh, strategy)?;
        let pressure_dofs = match pair.pressure_kind() {
            SpaceKind::ScalarP1Disc => 3 * mesh.cells().len(),
            _ => mesh.cells().len(),
        };
        if pressure_dofs > STUDY_PRESSURE_DOF_GUARD && !opts.iterative {
            return Err(Error::FeasibilityGuard {
                pressure_dofs,
                limit: STUDY_PRESSURE_DOF_GUARD,
            });
        }
        aspects.push(max_cell_aspect(&mesh)?);
        betas.push(global_infsup_with(&mesh, pair, opts)?);
    }
    let rows = if betas.len() >= 2 {
        rate_table(&betas, &aspects)?
    } else {
        vec![InfSupRow {
            level: 1,
            beta: betas[0],
            aspect: aspects[0],
            rate: None,
        }]
    };
    Ok(InfSupReport {
        rows,
        pair,
        strategy,
    })
}
