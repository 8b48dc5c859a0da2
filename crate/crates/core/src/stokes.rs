//! Stokes solves with the divergence-free pair on Clough-Tocher meshes,
//! against a manufactured boundary-layer solution: the velocity is the curl
//! of `xi = x^2 (1-x)^2 y^2 (1-y)^2 exp(-x / eps)` and the pressure is
//! `exp(-x / eps)` shifted to zero mean.
//!
//! The saddle system is solved through the pressure Schur complement:
//! sparse Cholesky of the reduced stiffness, then mass-preconditioned CG on
//! `S p = B K^{-1} F` with the constant-pressure mode deflated, then one
//! more stiffness solve for the velocity. Convergence is monitored in the
//! `M^{-1}` norm of the residual, which is exactly the L2 norm of
//! `div u_h`.

use std::path::{Path, PathBuf};

use crate::assembly::{assemble_load_vector, error_norms, scalar_l2_error};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::infsup::{build_pair_operators, max_cell_aspect, PressurePair};
use crate::linalg::{pcg, DofReduction, SpdFactor};
use crate::mesh::{clough_tocher_refine, generate_shishkin_mesh, Mesh2D};
use crate::quadrature::QuadratureRule;
use crate::space::{FEFunction, FESpace, SpaceKind};
use crate::triangle::SplitStrategy;

/// The exact solution family of the boundary-layer benchmark; all closures
/// are hand-differentiated (the forcing needs third derivatives of the
/// stream function).
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedSolution {
    pub epsilon: f64,
    pub nu: f64,
    /// Mean of `exp(-x/eps)` over the unit square: `eps (1 - exp(-1/eps))`.
    pressure_mean: f64,
}

/// `x^2 (1-x)^2` and its first three derivatives.
fn poly_factor(x: f64) -> [f64; 4] {
    let omx = 1.0 - x;
    [
        x * x * omx * omx,
        2.0 * x * omx * (1.0 - 2.0 * x),
        2.0 * (6.0 * x * x - 6.0 * x + 1.0),
        12.0 * (2.0 * x - 1.0),
    ]
}

impl ManufacturedSolution {
    pub fn new(epsilon: f64, nu: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "boundary-layer width and viscosity must be positive, got eps={epsilon}, nu={nu}"
            )));
        }
        Ok(ManufacturedSolution {
            epsilon,
            nu,
            pressure_mean: epsilon * (1.0 - (-1.0 / epsilon).exp()),
        })
    }

    /// `g = P(x) exp(-x/eps)` and derivatives up to third order.
    fn g(&self, x: f64) -> [f64; 4] {
        let p = poly_factor(x);
        let e = (-x / self.epsilon).exp();
        let ie = 1.0 / self.epsilon;
        [
            p[0] * e,
            (p[1] - p[0] * ie) * e,
            (p[2] - 2.0 * p[1] * ie + p[0] * ie * ie) * e,
            (p[3] - 3.0 * p[2] * ie + 3.0 * p[1] * ie * ie - p[0] * ie * ie * ie) * e,
        ]
    }

    pub fn stream(&self, p: Point2) -> f64 {
        self.g(p.x)[0] * poly_factor(p.y)[0]
    }

    /// `u = (d xi / dy, -d xi / dx)`; divergence-free by construction.
    pub fn velocity(&self, p: Point2) -> [f64; 2] {
        let g = self.g(p.x);
        let h = poly_factor(p.y);
        [g[0] * h[1], -g[1] * h[0]]
    }

    /// `grad[i][j] = d u_i / d x_j`.
    pub fn velocity_gradient(&self, p: Point2) -> [[f64; 2]; 2] {
        let g = self.g(p.x);
        let h = poly_factor(p.y);
        [[g[1] * h[1], g[0] * h[2]], [-g[2] * h[0], -g[1] * h[1]]]
    }

    pub fn pressure_raw(&self, p: Point2) -> f64 {
        (-p.x / self.epsilon).exp()
    }

    /// Mean-zero pressure.
    pub fn pressure(&self, p: Point2) -> f64 {
        self.pressure_raw(p) - self.pressure_mean
    }

    pub fn pressure_gradient(&self, p: Point2) -> [f64; 2] {
        [-self.pressure_raw(p) / self.epsilon, 0.0]
    }

    /// `f = -nu lap(u) + grad(p)`.
    pub fn forcing(&self, p: Point2) -> [f64; 2] {
        let g = self.g(p.x);
        let h = poly_factor(p.y);
        let lap_u1 = g[2] * h[1] + g[0] * h[3];
        let lap_u2 = -(g[3] * h[0] + g[1] * h[2]);
        let gp = self.pressure_gradient(p);
        [-self.nu * lap_u1 + gp[0], -self.nu * lap_u2 + gp[1]]
    }
}

/// Default Shishkin transition point `3 eps log10(1/eps)`.
pub fn default_tau(epsilon: f64) -> f64 {
    3.0 * epsilon * (1.0 / epsilon).log10()
}

#[derive(Clone, Debug)]
pub struct StokesOptions {
    /// Degree of the quadrature used for the load vector and error norms.
    pub quad_degree: usize,
    /// Relative CG tolerance (in the `M^{-1}` residual norm).
    pub pcg_tol: f64,
    /// Directory for triplet-text dumps of K, B, M.
    pub dump_matrices: Option<PathBuf>,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions {
            quad_degree: 10,
            pcg_tol: 1e-13,
            dump_matrices: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveReport {
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub l2_vel: f64,
    pub h1_vel: f64,
    pub l2_prs: f64,
    /// Largest `|div u_h|` over the error-rule quadrature points.
    pub linf_div: f64,
    /// H1 seminorm of the computed velocity, for scaling the divergence.
    pub h1_norm: f64,
    /// Relative residual of the full saddle system.
    pub solver_residual: f64,
    pub pcg_iterations: usize,
}

pub struct StokesSolution {
    /// Full velocity coefficient vector (Dirichlet dofs are zero).
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub report: SolveReport,
}

/// Solves the homogeneous-Dirichlet Stokes problem with the manufactured
/// forcing and reports errors against the exact fields.
pub fn solve_stokes(
    mesh: &Mesh2D,
    exact: &ManufacturedSolution,
    opts: &StokesOptions,
) -> Result<StokesSolution> {
    solve_stokes_forced(
        mesh,
        |p| exact.forcing(p),
        exact.nu,
        Some(exact),
        opts,
    )
}

/// Same solve with an arbitrary forcing; errors are reported only when an
/// exact solution is supplied.
pub fn solve_stokes_forced<F>(
    mesh: &Mesh2D,
    forcing: F,
    nu: f64,
    exact: Option<&ManufacturedSolution>,
    opts: &StokesOptions,
) -> Result<StokesSolution>
where
    F: Fn(Point2) -> [f64; 2],
{
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "viscosity must be positive, got {nu}"
        )));
    }
    let rule = QuadratureRule::with_degree(opts.quad_degree)?;
    let ops = build_pair_operators(mesh, PressurePair::SvP2P1d)?;
    let factor = SpdFactor::new(&ops.stiffness)?;

    if let Some(dir) = &opts.dump_matrices {
        dump_matrices(dir, &ops)?;
    }

    // Load vector over the free velocity dofs. The viscous block is nu*K, so
    // the whole system is scaled by nu; assembling F as-is keeps that.
    let vel = FESpace::build(mesh, SpaceKind::VectorP2, true);
    let reduction = DofReduction::from_space(&vel);
    let f_full = assemble_load_vector(&vel, &rule, &forcing)?;
    let f_red = reduction.restrict(&f_full);
    let n = f_red.len();
    let m = ops.pressure_dofs;

    // Weak form: nu (grad u, grad v) - (p, div v) = (f, v) and (div u, q) = 0,
    // i.e. the saddle system [nu K, -B^T; B, 0]. Eliminating u gives
    // B K^{-1} B^T p = -B K^{-1} F (scaled by nu).
    let kinv_f: Vec<f64> = factor.solve_vec(&f_red).iter().map(|v| v / nu).collect();
    let mut rhs_p = vec![0.0; m];
    ops.divergence.matvec(&kinv_f, &mut rhs_p);
    for v in &mut rhs_p {
        *v = -*v;
    }

    let mut pressure = vec![0.0; m];
    let stats = pcg(
        |p| ops.apply_schur(&factor, p),
        |z| ops.mass_factor.solve(z),
        &rhs_p,
        &mut pressure,
        opts.pcg_tol,
        40 * m + 2000,
        true,
    )?;
    ops.project_mean_zero(&mut pressure);

    // (nu K) u = F + B^T p.
    let mut btp = vec![0.0; n];
    ops.divergence.matvec_transpose(&pressure, &mut btp);
    let mut rhs_u = vec![0.0; n];
    for i in 0..n {
        rhs_u[i] = (f_red[i] + btp[i]) / nu;
    }
    let u_red = factor.solve_vec(&rhs_u);

    // Saddle residual on the reduced system [nu K, -B^T; B, 0].
    let mut ku = vec![0.0; n];
    ops.stiffness.matvec(&u_red, &mut ku);
    let mut r1 = 0.0f64;
    for i in 0..n {
        let r = nu * ku[i] - btp[i] - f_red[i];
        r1 += r * r;
    }
    let mut bu = vec![0.0; m];
    ops.divergence.matvec(&u_red, &mut bu);
    let r2: f64 = bu.iter().map(|v| v * v).sum();
    let load: f64 = f_red.iter().map(|v| v * v).sum::<f64>().sqrt();
    let solver_residual = if load > 0.0 {
        ((r1 + r2).sqrt()) / load
    } else {
        (r1 + r2).sqrt()
    };

    let velocity = reduction.expand(&u_red);
    let h1_norm = {
        let e: f64 = u_red
            .iter()
            .zip(&ku)
            .map(|(a, b)| a * b)
            .sum();
        e.max(0.0).sqrt()
    };

    // Error norms.
    let u_fe = FEFunction::new(&vel, velocity.clone())?;
    let norms = match exact {
        Some(sol) => error_norms(
            &u_fe,
            |p| sol.velocity(p),
            |p| sol.velocity_gradient(p),
            &rule,
        ),
        None => error_norms(&u_fe, |_| [0.0, 0.0], |_| [[0.0; 2]; 2], &rule),
    };
    let l2_prs = match exact {
        Some(sol) => {
            let prs = FESpace::build(mesh, SpaceKind::ScalarP1Disc, false);
            let p_fe = FEFunction::new(&prs, pressure.clone())?;
            scalar_l2_error(&p_fe, |p| sol.pressure(p), &rule)
        }
        None => f64::NAN,
    };

    let report = SolveReport {
        velocity_dofs: n,
        pressure_dofs: m,
        l2_vel: if exact.is_some() { norms.l2 } else { f64::NAN },
        h1_vel: if exact.is_some() { norms.h1_semi } else { f64::NAN },
        l2_prs,
        linf_div: norms.linf_div,
        h1_norm,
        solver_residual,
        pcg_iterations: stats.iterations,
    };
    Ok(StokesSolution {
        velocity,
        pressure,
        report,
    })
}

fn dump_matrices(dir: &Path, ops: &crate::infsup::PairOperators) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for (name, m) in [
        ("stiffness.txt", &ops.stiffness),
        ("divergence.txt", &ops.divergence),
        ("mass.txt", &ops.mass),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, m.to_triplet_text()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// One row of the strategy-comparison table.
#[derive(Clone, Copy, Debug)]
pub struct CompareRow {
    pub n: usize,
    pub strategy: SplitStrategy,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub l2_vel: f64,
    pub h1_vel: f64,
    pub l2_prs: f64,
    pub linf_div: f64,
    pub max_aspect: f64,
    pub h1_norm: f64,
    pub solver_residual: f64,
}

/// Runs the Shishkin benchmark for every `N` and both split strategies:
/// parent mesh, one Clough-Tocher refinement, solve, record errors and the
/// refined mesh's maximum aspect ratio.
pub fn compare_strategies(
    n_list: &[usize],
    epsilon: f64,
    tau: f64,
    nu: f64,
    strategies: &[SplitStrategy],
    opts: &StokesOptions,
) -> Result<Vec<CompareRow>> {
    let exact = ManufacturedSolution::new(epsilon, nu)?;
    let mut rows = Vec::new();
    for &n in n_list {
        let parent = generate_shishkin_mesh(n, tau)?;
        for &strategy in strategies {
            let mesh = clough_tocher_refine(&parent, strategy)?;
            let solution = solve_stokes(&mesh, &exact, opts)?;
            rows.push(CompareRow {
                n,
                strategy,
                velocity_dofs: solution.report.velocity_dofs,
                pressure_dofs: solution.report.pressure_dofs,
                l2_vel: solution.report.l2_vel,
                h1_vel: solution.report.h1_vel,
                l2_prs: solution.report.l2_prs,
                linf_div: solution.report.linf_div,
                max_aspect: max_cell_aspect(&mesh)?,
                h1_norm: solution.report.h1_norm,
                solver_residual: solution.report.solver_residual,
            });
        }
    }
    Ok(rows)
}
