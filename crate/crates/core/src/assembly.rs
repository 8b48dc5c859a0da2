//! Element integration and global operator assembly for the P2 vector /
//! discontinuous-pressure pairs, plus interpolation, evaluation, and
//! quadrature error norms.
//!
//! Assembly is sequential and bit-reproducible: cells are visited in order
//! and duplicate triplets are summed in insertion order.

use crate::error::{Error, Result};
use crate::geometry::{signed_area_x2, Point2};
use crate::mesh::Mesh2D;
use crate::quadrature::QuadratureRule;
use crate::space::{FEFunction, FESpace, SpaceKind};
use crate::sparse::{SparseMatrix, TripletAccumulator};

/// Gradients of the barycentric coordinates of a cell (constant per cell),
/// together with the unsigned area.
pub fn barycentric_gradients(p: &[Point2; 3]) -> ([Point2; 3], f64) {
    let a2 = signed_area_x2(p[0], p[1], p[2]);
    let g = [
        (p[2] - p[1]).perp() / a2,
        (p[0] - p[2]).perp() / a2,
        (p[1] - p[0]).perp() / a2,
    ];
    (g, 0.5 * a2.abs())
}

/// Values of the six P2 shape functions at a barycentric point; local order:
/// vertex functions 0..3, then the midpoint function of the edge opposite
/// each vertex.
pub fn p2_values(lam: [f64; 3]) -> [f64; 6] {
    let [l0, l1, l2] = lam;
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l0,
        4.0 * l0 * l1,
    ]
}

/// Gradients of the six P2 shape functions.
pub fn p2_gradients(lam: [f64; 3], g: &[Point2; 3]) -> [Point2; 6] {
    let [l0, l1, l2] = lam;
    [
        g[0] * (4.0 * l0 - 1.0),
        g[1] * (4.0 * l1 - 1.0),
        g[2] * (4.0 * l2 - 1.0),
        (g[1] * l2 + g[2] * l1) * 4.0,
        (g[2] * l0 + g[0] * l2) * 4.0,
        (g[0] * l1 + g[1] * l0) * 4.0,
    ]
}

fn expect_kind(space: &FESpace, kind: SpaceKind, what: &str) -> Result<()> {
    if space.kind() != kind {
        return Err(Error::InvalidParameter(format!(
            "{what} expects a {kind:?} space, got {:?}",
            space.kind()
        )));
    }
    Ok(())
}

fn expect_pressure(space: &FESpace, what: &str) -> Result<()> {
    match space.kind() {
        SpaceKind::ScalarP1Disc | SpaceKind::ScalarP0 => Ok(()),
        other => Err(Error::InvalidParameter(format!(
            "{what} expects a pressure space, got {other:?}"
        ))),
    }
}

/// Stiffness of the vector P2 space: entry `(i, j) = int grad(phi_i) : grad(phi_j)`.
/// Symmetric positive semidefinite; components do not couple.
pub fn assemble_gradient_stiffness(space: &FESpace) -> Result<SparseMatrix> {
    expect_kind(space, SpaceKind::VectorP2, "gradient stiffness")?;
    let mesh = space.mesh();
    let rule = QuadratureRule::assembly();
    let n = space.dof_count();
    let mut acc = TripletAccumulator::new(n, n);

    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (g, area) = barycentric_gradients(&p);
        let mut ke = [[0.0f64; 6]; 6];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let gr = p2_gradients(*lam, &g);
            let wq = w * area;
            for a in 0..6 {
                for b in 0..6 {
                    ke[a][b] += wq * gr[a].dot(gr[b]);
                }
            }
        }
        let dofs = space.vector_p2_cell_dofs(c);
        for a in 0..6 {
            for b in 0..6 {
                for comp in 0..2 {
                    acc.push(dofs[2 * a + comp], dofs[2 * b + comp], ke[a][b]);
                }
            }
        }
    }
    Ok(acc.into_csr(true))
}

/// Mixed divergence operator: entry `(i, j) = int div(phi_j) psi_i` with
/// pressure rows and velocity columns. Exact: the integrand has degree 2.
pub fn assemble_divergence(vel: &FESpace, prs: &FESpace) -> Result<SparseMatrix> {
    expect_kind(vel, SpaceKind::VectorP2, "divergence")?;
    expect_pressure(prs, "divergence")?;
    vel.same_mesh(prs)?;
    let mesh = vel.mesh();
    let rule = QuadratureRule::assembly();
    let per_cell = prs.pressure_dofs_per_cell();
    let mut acc = TripletAccumulator::new(prs.dof_count(), vel.dof_count());

    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (g, area) = barycentric_gradients(&p);
        let mut be = [[0.0f64; 12]; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let gr = p2_gradients(*lam, &g);
            let wq = w * area;
            for i in 0..per_cell {
                let psi = if per_cell == 3 { lam[i] } else { 1.0 };
                for a in 0..6 {
                    be[i][2 * a] += wq * psi * gr[a].x;
                    be[i][2 * a + 1] += wq * psi * gr[a].y;
                }
            }
        }
        let dofs = vel.vector_p2_cell_dofs(c);
        for i in 0..per_cell {
            let row = prs.pressure_dof(c, i);
            for (j, &dof) in dofs.iter().enumerate() {
                acc.push(row, dof, be[i][j]);
            }
        }
    }
    Ok(acc.into_csr(false))
}

/// Pressure mass matrix; block diagonal for the discontinuous spaces.
pub fn assemble_mass(prs: &FESpace) -> Result<SparseMatrix> {
    expect_pressure(prs, "mass")?;
    let mesh = prs.mesh();
    let rule = QuadratureRule::assembly();
    let per_cell = prs.pressure_dofs_per_cell();
    let n = prs.dof_count();
    let mut acc = TripletAccumulator::new(n, n);

    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (_, area) = barycentric_gradients(&p);
        let mut me = [[0.0f64; 3]; 3];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let wq = w * area;
            for i in 0..per_cell {
                let pi = if per_cell == 3 { lam[i] } else { 1.0 };
                for j in 0..per_cell {
                    let pj = if per_cell == 3 { lam[j] } else { 1.0 };
                    me[i][j] += wq * pi * pj;
                }
            }
        }
        for i in 0..per_cell {
            for j in 0..per_cell {
                acc.push(prs.pressure_dof(c, i), prs.pressure_dof(c, j), me[i][j]);
            }
        }
    }
    Ok(acc.into_csr(true))
}

/// Divergence Gram matrix on the velocity space:
/// entry `(i, j) = int div(phi_i) div(phi_j)`.
pub fn assemble_divergence_gram(vel: &FESpace) -> Result<SparseMatrix> {
    expect_kind(vel, SpaceKind::VectorP2, "divergence gram")?;
    let mesh = vel.mesh();
    let rule = QuadratureRule::assembly();
    let n = vel.dof_count();
    let mut acc = TripletAccumulator::new(n, n);

    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (g, area) = barycentric_gradients(&p);
        let mut ge = [[0.0f64; 12]; 12];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let gr = p2_gradients(*lam, &g);
            let wq = w * area;
            let mut div = [0.0f64; 12];
            for a in 0..6 {
                div[2 * a] = gr[a].x;
                div[2 * a + 1] = gr[a].y;
            }
            for i in 0..12 {
                for j in 0..12 {
                    ge[i][j] += wq * div[i] * div[j];
                }
            }
        }
        let dofs = vel.vector_p2_cell_dofs(c);
        for i in 0..12 {
            for j in 0..12 {
                acc.push(dofs[i], dofs[j], ge[i][j]);
            }
        }
    }
    Ok(acc.into_csr(true))
}

/// Load vector `int f . phi_i` for the vector P2 space, with a caller-chosen
/// rule (boundary-layer forcings want high degree).
pub fn assemble_load_vector<F>(space: &FESpace, rule: &QuadratureRule, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point2) -> [f64; 2],
{
    expect_kind(space, SpaceKind::VectorP2, "load vector")?;
    let mesh = space.mesh();
    let mut rhs = vec![0.0; space.dof_count()];
    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (_, area) = barycentric_gradients(&p);
        let dofs = space.vector_p2_cell_dofs(c);
        for (q, (lam, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = rule.physical_point(&p, q);
            let fv = f(x);
            let nv = p2_values(*lam);
            let wq = w * area;
            for a in 0..6 {
                rhs[dofs[2 * a]] += wq * nv[a] * fv[0];
                rhs[dofs[2 * a + 1]] += wq * nv[a] * fv[1];
            }
        }
    }
    Ok(rhs)
}

/// Nodal interpolation into the vector P2 space (vertex and midpoint values).
pub fn interpolate_vector<'a, 'm, F>(space: &'a FESpace<'m>, f: F) -> Result<FEFunction<'a, 'm>>
where
    F: Fn(Point2) -> [f64; 2],
{
    expect_kind(space, SpaceKind::VectorP2, "vector interpolation")?;
    let nodes = space.dof_count() / 2;
    let mut coeff = vec![0.0; space.dof_count()];
    for n in 0..nodes {
        let v = f(space.node_point(n));
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::InvalidParameter(
                "interpolated function is not finite at a node".into(),
            ));
        }
        coeff[2 * n] = v[0];
        coeff[2 * n + 1] = v[1];
    }
    FEFunction::new(space, coeff)
}

/// Nodal interpolation into a pressure space: cell-vertex values for P1d,
/// barycenter value for P0.
pub fn interpolate_scalar<'a, 'm, F>(space: &'a FESpace<'m>, f: F) -> Result<FEFunction<'a, 'm>>
where
    F: Fn(Point2) -> f64,
{
    expect_pressure(space, "scalar interpolation")?;
    let mesh = space.mesh();
    let mut coeff = vec![0.0; space.dof_count()];
    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        match space.kind() {
            SpaceKind::ScalarP1Disc => {
                for i in 0..3 {
                    coeff[space.pressure_dof(c, i)] = f(p[i]);
                }
            }
            SpaceKind::ScalarP0 => {
                coeff[space.pressure_dof(c, 0)] = f((p[0] + p[1] + p[2]) / 3.0);
            }
            SpaceKind::VectorP2 => unreachable!(),
        }
    }
    FEFunction::new(space, coeff)
}

/// Value of a vector P2 function at a barycentric point of a cell.
pub fn evaluate_vector(fe: &FEFunction, cell: usize, lam: [f64; 3]) -> [f64; 2] {
    let dofs = fe.space.vector_p2_cell_dofs(cell);
    let nv = p2_values(lam);
    let mut out = [0.0; 2];
    for a in 0..6 {
        out[0] += nv[a] * fe.coefficients[dofs[2 * a]];
        out[1] += nv[a] * fe.coefficients[dofs[2 * a + 1]];
    }
    out
}

/// Jacobian of a vector P2 function: `grad[i][j] = d u_i / d x_j`.
pub fn evaluate_vector_gradient(fe: &FEFunction, cell: usize, lam: [f64; 3]) -> [[f64; 2]; 2] {
    let p = fe.space.mesh().cell_points(cell);
    let (g, _) = barycentric_gradients(&p);
    let gr = p2_gradients(lam, &g);
    let dofs = fe.space.vector_p2_cell_dofs(cell);
    let mut out = [[0.0; 2]; 2];
    for a in 0..6 {
        let cx = fe.coefficients[dofs[2 * a]];
        let cy = fe.coefficients[dofs[2 * a + 1]];
        out[0][0] += cx * gr[a].x;
        out[0][1] += cx * gr[a].y;
        out[1][0] += cy * gr[a].x;
        out[1][1] += cy * gr[a].y;
    }
    out
}

pub fn evaluate_divergence(fe: &FEFunction, cell: usize, lam: [f64; 3]) -> f64 {
    let j = evaluate_vector_gradient(fe, cell, lam);
    j[0][0] + j[1][1]
}

/// Value of a pressure function at a barycentric point of a cell.
pub fn evaluate_scalar(fe: &FEFunction, cell: usize, lam: [f64; 3]) -> f64 {
    match fe.space.kind() {
        SpaceKind::ScalarP1Disc => (0..3)
            .map(|i| lam[i] * fe.coefficients[fe.space.pressure_dof(cell, i)])
            .sum(),
        SpaceKind::ScalarP0 => fe.coefficients[fe.space.pressure_dof(cell, 0)],
        SpaceKind::VectorP2 => unreachable!("use evaluate_vector"),
    }
}

/// Quadrature error norms of a vector P2 function against an exact field.
#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    /// Largest `|div u_h|` over all quadrature points.
    pub linf_div: f64,
}

pub fn error_norms<V, G>(
    fe: &FEFunction,
    exact: V,
    exact_gradient: G,
    rule: &QuadratureRule,
) -> ErrorNorms
where
    V: Fn(Point2) -> [f64; 2],
    G: Fn(Point2) -> [[f64; 2]; 2],
{
    let mesh = fe.space.mesh();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut linf_div: f64 = 0.0;
    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (_, area) = barycentric_gradients(&p);
        for (q, (lam, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = rule.physical_point(&p, q);
            let wq = w * area;
            let uh = evaluate_vector(fe, c, *lam);
            let ue = exact(x);
            l2 += wq * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
            let jh = evaluate_vector_gradient(fe, c, *lam);
            let je = exact_gradient(x);
            for i in 0..2 {
                for j in 0..2 {
                    h1 += wq * (jh[i][j] - je[i][j]).powi(2);
                }
            }
            linf_div = linf_div.max((jh[0][0] + jh[1][1]).abs());
        }
    }
    ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
        linf_div,
    }
}

/// Quadrature L2 norm of `fe - exact` for a pressure function.
pub fn scalar_l2_error<F>(fe: &FEFunction, exact: F, rule: &QuadratureRule) -> f64
where
    F: Fn(Point2) -> f64,
{
    let mesh = fe.space.mesh();
    let mut l2 = 0.0;
    for c in 0..mesh.cells().len() {
        let p = mesh.cell_points(c);
        let (_, area) = barycentric_gradients(&p);
        for (q, (lam, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = rule.physical_point(&p, q);
            let diff = evaluate_scalar(fe, c, *lam) - exact(x);
            l2 += w * area * diff * diff;
        }
    }
    l2.sqrt()
}

/// H1 seminorm squared of the continuous piecewise-linear hat function of
/// one mesh vertex, by quadrature over the incident cells. Serves as the
/// finite-element cross-check of the closed-form split-point hat value.
pub fn hat_h1_seminorm_sq(mesh: &Mesh2D, vertex: usize, rule: &QuadratureRule) -> f64 {
    let mut total = 0.0;
    for c in 0..mesh.cells().len() {
        let cell = &mesh.cells()[c];
        let Some(local) = cell.v.iter().position(|&v| v == vertex) else {
            continue;
        };
        let p = mesh.cell_points(c);
        let (g, area) = barycentric_gradients(&p);
        let gsq = g[local].dot(g[local]);
        for w in &rule.weights {
            total += w * area * gsq;
        }
    }
    total
}
