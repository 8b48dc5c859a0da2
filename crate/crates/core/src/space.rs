//! Degree-of-freedom management for the three discrete spaces used here:
//! continuous quadratic vectors (velocity), discontinuous linears and
//! piecewise constants (pressure).

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mesh::Mesh2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// Vector-valued continuous P2: dofs at vertices and edge midpoints,
    /// x-component before y-component at each node, vertices before edges.
    VectorP2,
    /// Discontinuous P1: three dofs per cell, nodal at the cell vertices.
    ScalarP1Disc,
    /// Piecewise constants: one dof per cell.
    ScalarP0,
}

/// A finite-element space bound to a mesh. Dof enumeration is deterministic
/// for a given mesh.
pub struct FESpace<'m> {
    mesh: &'m Mesh2D,
    kind: SpaceKind,
    edges: Vec<(usize, usize)>,
    cell_edges: Vec<[usize; 3]>,
    dirichlet: Vec<bool>,
    dof_count: usize,
}

impl<'m> FESpace<'m> {
    /// Builds the dof layout; for [`SpaceKind::VectorP2`] with
    /// `homogeneous_dirichlet` every dof whose node lies on the boundary is
    /// masked.
    pub fn build(mesh: &'m Mesh2D, kind: SpaceKind, homogeneous_dirichlet: bool) -> FESpace<'m> {
        let tables = mesh.edge_tables();
        let nv = mesh.vertices().len();
        let ne = tables.edges.len();
        let nc = mesh.cells().len();

        let dof_count = match kind {
            SpaceKind::VectorP2 => 2 * (nv + ne),
            SpaceKind::ScalarP1Disc => 3 * nc,
            SpaceKind::ScalarP0 => nc,
        };

        let mut dirichlet = vec![false; dof_count];
        if homogeneous_dirichlet && kind == SpaceKind::VectorP2 {
            let mut vertex_on_boundary = vec![false; nv];
            for (e, &(a, b)) in tables.edges.iter().enumerate() {
                if tables.incidence[e] == 1 {
                    vertex_on_boundary[a] = true;
                    vertex_on_boundary[b] = true;
                    dirichlet[2 * (nv + e)] = true;
                    dirichlet[2 * (nv + e) + 1] = true;
                }
            }
            for (v, &on) in vertex_on_boundary.iter().enumerate() {
                if on {
                    dirichlet[2 * v] = true;
                    dirichlet[2 * v + 1] = true;
                }
            }
        }

        FESpace {
            mesh,
            kind,
            edges: tables.edges,
            cell_edges: tables.cell_edges,
            dirichlet,
            dof_count,
        }
    }

    pub fn mesh(&self) -> &'m Mesh2D {
        self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Indices of unconstrained dofs, ascending.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.dof_count)
            .filter(|&i| !self.dirichlet[i])
            .collect()
    }

    /// Global dof indices of the 12 local velocity dofs of a cell, ordered
    /// (node0_x, node0_y, ..., node5_y) with nodes = 3 vertices then the 3
    /// edge midpoints opposite them.
    pub fn vector_p2_cell_dofs(&self, c: usize) -> [usize; 12] {
        debug_assert_eq!(self.kind, SpaceKind::VectorP2);
        let nv = self.mesh.vertices().len();
        let cell = &self.mesh.cells()[c];
        let mut dofs = [0usize; 12];
        for a in 0..3 {
            dofs[2 * a] = 2 * cell.v[a];
            dofs[2 * a + 1] = 2 * cell.v[a] + 1;
        }
        for k in 0..3 {
            let node = nv + self.cell_edges[c][k];
            dofs[6 + 2 * k] = 2 * node;
            dofs[6 + 2 * k + 1] = 2 * node + 1;
        }
        dofs
    }

    /// Global dof index of local pressure dof `local` on cell `c`.
    pub fn pressure_dof(&self, c: usize, local: usize) -> usize {
        match self.kind {
            SpaceKind::ScalarP1Disc => 3 * c + local,
            SpaceKind::ScalarP0 => {
                debug_assert_eq!(local, 0);
                c
            }
            SpaceKind::VectorP2 => unreachable!("not a pressure space"),
        }
    }

    pub fn pressure_dofs_per_cell(&self) -> usize {
        match self.kind {
            SpaceKind::ScalarP1Disc => 3,
            SpaceKind::ScalarP0 => 1,
            SpaceKind::VectorP2 => unreachable!("not a pressure space"),
        }
    }

    /// Physical coordinates of a P2 node (vertex or edge midpoint).
    pub fn node_point(&self, node: usize) -> Point2 {
        let nv = self.mesh.vertices().len();
        if node < nv {
            self.mesh.vertices()[node]
        } else {
            let (a, b) = self.edges[node - nv];
            (self.mesh.vertices()[a] + self.mesh.vertices()[b]) * 0.5
        }
    }

    pub fn same_mesh(&self, other: &FESpace) -> Result<()> {
        if std::ptr::eq(self.mesh, other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// Coefficients of a function in a space.
pub struct FEFunction<'a, 'm> {
    pub space: &'a FESpace<'m>,
    pub coefficients: Vec<f64>,
}

impl<'a, 'm> FEFunction<'a, 'm> {
    pub fn new(space: &'a FESpace<'m>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.dof_count() {
            return Err(Error::InvalidParameter(format!(
                "coefficient vector has length {}, space has {} dofs",
                coefficients.len(),
                space.dof_count()
            )));
        }
        Ok(FEFunction {
            space,
            coefficients,
        })
    }

    pub fn zero(space: &'a FESpace<'m>) -> Self {
        FEFunction {
            space,
            coefficients: vec![0.0; space.dof_count()],
        }
    }
}
