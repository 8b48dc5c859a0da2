//! Conforming 2D triangular meshes: construction, Clough-Tocher refinement,
//! validation, and the `svmesh` text format.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{signed_area_x2, Point2};
use crate::triangle::{split_point, SplitStrategy, DEGENERACY_TOL};

pub mod io;

/// Which way to split the squares of a tensor grid into triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    RightUp,
    /// Lower-right to upper-left.
    LeftUp,
}

impl std::str::FromStr for Diagonal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right-up" | "rightup" => Ok(Diagonal::RightUp),
            "left-up" | "leftup" => Ok(Diagonal::LeftUp),
            other => Err(Error::InvalidParameter(format!(
                "unknown diagonal '{other}' (expected right-up or left-up)"
            ))),
        }
    }
}

/// One triangle of a mesh, vertex indices in counterclockwise order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub v: [usize; 3],
}

impl Cell {
    pub fn new(a: usize, b: usize, c: usize) -> Self {
        Cell { v: [a, b, c] }
    }

    /// Local edge `k` is opposite local vertex `k`, as an index pair.
    pub fn edge(&self, k: usize) -> (usize, usize) {
        (self.v[(k + 1) % 3], self.v[(k + 2) % 3])
    }
}

/// An immutable conforming triangulation. All mutating operations return a
/// new mesh, so sharing across threads is safe.
#[derive(Clone, Debug)]
pub struct Mesh2D {
    vertices: Vec<Point2>,
    cells: Vec<Cell>,
    macro_parent: Option<Vec<usize>>,
}

impl Mesh2D {
    /// Builds a mesh from raw parts. Checks structural sanity (finite
    /// coordinates, indices in range and distinct, macro-parent length);
    /// geometric properties are checked by [`validate_mesh`].
    pub fn new(
        vertices: Vec<Point2>,
        cells: Vec<Cell>,
        macro_parent: Option<Vec<usize>>,
    ) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "vertex {i} has non-finite coordinates"
                )));
            }
        }
        let nv = vertices.len();
        for (c, cell) in cells.iter().enumerate() {
            let [a, b, d] = cell.v;
            if a >= nv || b >= nv || d >= nv {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references vertex out of range (mesh has {nv} vertices)"
                )));
            }
            if a == b || b == d || a == d {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} has repeated vertex indices"
                )));
            }
        }
        if let Some(mp) = &macro_parent {
            if mp.len() != cells.len() {
                return Err(Error::InvalidMesh(format!(
                    "macro_parent has {} entries for {} cells",
                    mp.len(),
                    cells.len()
                )));
            }
        }
        Ok(Mesh2D {
            vertices,
            cells,
            macro_parent,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// For refined meshes: the cell of the previous mesh each cell came from.
    pub fn macro_parent(&self) -> Option<&[usize]> {
        self.macro_parent.as_deref()
    }

    pub fn cell_points(&self, c: usize) -> [Point2; 3] {
        let [a, b, d] = self.cells[c].v;
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_signed_area(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        0.5 * signed_area_x2(p[0], p[1], p[2])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cells.len())
            .map(|c| self.cell_signed_area(c).abs())
            .sum()
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            min = Point2::new(min.x.min(v.x), min.y.min(v.y));
            max = Point2::new(max.x.max(v.x), max.y.max(v.y));
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            max.dist(min)
        }
    }

    /// Undirected edges in deterministic first-appearance order, plus the
    /// per-cell edge ids (`cell_edges[c][k]` is opposite local vertex `k`)
    /// and the incidence count of each edge.
    pub fn edge_tables(&self) -> EdgeTables {
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut incidence: Vec<u8> = Vec::new();
        let mut cell_edges = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let mut ce = [0usize; 3];
            for k in 0..3 {
                let (a, b) = cell.edge(k);
                let key = (a.min(b), a.max(b));
                let id = *ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    incidence.push(0);
                    edges.len() - 1
                });
                incidence[id] = incidence[id].saturating_add(1);
                ce[k] = id;
            }
            cell_edges.push(ce);
        }
        EdgeTables {
            edges,
            cell_edges,
            incidence,
        }
    }

    /// Indices of vertices lying on the boundary (endpoints of edges with a
    /// single incident cell).
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let t = self.edge_tables();
        let mut on_boundary = vec![false; self.vertices.len()];
        for (e, &(a, b)) in t.edges.iter().enumerate() {
            if t.incidence[e] == 1 {
                on_boundary[a] = true;
                on_boundary[b] = true;
            }
        }
        (0..self.vertices.len())
            .filter(|&v| on_boundary[v])
            .collect()
    }
}

/// Edge connectivity of a mesh; see [`Mesh2D::edge_tables`].
pub struct EdgeTables {
    pub edges: Vec<(usize, usize)>,
    pub cell_edges: Vec<[usize; 3]>,
    pub incidence: Vec<u8>,
}

/// Uniform `n x n` triangulation of the unit square: `(n+1)^2` vertices,
/// `2 n^2` cells, every square split along the chosen diagonal.
pub fn generate_unit_square_mesh(n: usize, diagonal: Diagonal) -> Result<Mesh2D> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "unit square subdivision must satisfy n >= 1".into(),
        ));
    }
    let coords: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    structured_grid_mesh(&coords, &coords, diagonal)
}

/// Shishkin mesh on the unit square: x-spacing `2 tau / N` inside the layer
/// `[0, tau]` and `2 (1 - tau) / N` outside, uniform in y, `2 N^2` cells.
pub fn generate_shishkin_mesh(n: usize, tau: f64) -> Result<Mesh2D> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "Shishkin mesh requires an even N >= 2, got {n}"
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Shishkin transition point must lie in (0, 1), got {tau}"
        )));
    }
    let half = n / 2;
    let xs: Vec<f64> = (0..=n)
        .map(|i| {
            if i <= half {
                i as f64 * 2.0 * tau / n as f64
            } else {
                tau + (i - half) as f64 * 2.0 * (1.0 - tau) / n as f64
            }
        })
        .collect();
    let ys: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    structured_grid_mesh(&xs, &ys, Diagonal::RightUp)
}

/// Exact maximum aspect ratio of the Shishkin parent mesh, from the thin
/// right triangles with legs `2 tau / N` and `1 / N`; independent of `N`.
pub fn shishkin_aspect(tau: f64) -> f64 {
    let s = (1.0 + 4.0 * tau * tau).sqrt();
    s * (1.0 + 2.0 * tau + s) / (4.0 * tau)
}

fn structured_grid_mesh(xs: &[f64], ys: &[f64], diagonal: Diagonal) -> Result<Mesh2D> {
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in ys {
        for &x in xs {
            vertices.push(Point2::new(x, y));
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = j * (nx + 1) + i;
            let v10 = v00 + 1;
            let v01 = v00 + nx + 1;
            let v11 = v01 + 1;
            match diagonal {
                Diagonal::RightUp => {
                    cells.push(Cell::new(v00, v10, v11));
                    cells.push(Cell::new(v00, v11, v01));
                }
                Diagonal::LeftUp => {
                    cells.push(Cell::new(v00, v10, v01));
                    cells.push(Cell::new(v10, v11, v01));
                }
            }
        }
    }
    Mesh2D::new(vertices, cells, None)
}

/// Splits every cell into three by connecting its vertices to the chosen
/// split point. Output has `3 C` cells and `V + C` vertices; parent edges are
/// never subdivided, so a conforming input stays conforming.
pub fn clough_tocher_refine(mesh: &Mesh2D, strategy: SplitStrategy) -> Result<Mesh2D> {
    let diam = mesh.diameter();
    let area_tol = DEGENERACY_TOL * diam * diam;

    let mut vertices = mesh.vertices().to_vec();
    let mut cells = Vec::with_capacity(3 * mesh.cells().len());
    let mut macro_parent = Vec::with_capacity(3 * mesh.cells().len());

    for (c, cell) in mesh.cells().iter().enumerate() {
        let p = mesh.cell_points(c);
        let area = 0.5 * signed_area_x2(p[0], p[1], p[2]);
        if !(area > area_tol) {
            return Err(Error::DegenerateCell {
                cell: c,
                area,
                tol: area_tol,
            });
        }
        let z0 = split_point(&p, strategy).map_err(|_| Error::DegenerateCell {
            cell: c,
            area,
            tol: area_tol,
        })?;
        let zi = vertices.len();
        vertices.push(z0);
        let [a, b, d] = cell.v;
        cells.push(Cell::new(a, b, zi));
        cells.push(Cell::new(b, d, zi));
        cells.push(Cell::new(d, a, zi));
        macro_parent.extend_from_slice(&[c, c, c]);
    }
    Mesh2D::new(vertices, cells, Some(macro_parent))
}

/// Outcome of [`validate_mesh`]; failures are carried, not raised.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    /// Every edge is shared by one cell (boundary) or two (interior).
    pub conforming: bool,
    /// Edges incident to three or more cells.
    pub nonmanifold_edges: Vec<(usize, usize)>,
    /// Cells with non-positive signed area.
    pub flipped_cells: Vec<usize>,
    /// Vertex pairs closer than `1e-12 * diameter`.
    pub duplicate_vertices: Vec<(usize, usize)>,
    /// When macro parents are present: every parent id has exactly 3 children.
    pub macro_parent_consistent: bool,
    pub total_area: f64,
    pub cell_count: usize,
    pub vertex_count: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.conforming
            && self.flipped_cells.is_empty()
            && self.duplicate_vertices.is_empty()
            && self.macro_parent_consistent
    }
}

pub fn validate_mesh(mesh: &Mesh2D) -> ValidationReport {
    let mut report = ValidationReport {
        total_area: mesh.total_area(),
        cell_count: mesh.cells().len(),
        vertex_count: mesh.vertices().len(),
        macro_parent_consistent: true,
        ..Default::default()
    };

    let tables = mesh.edge_tables();
    report.conforming = true;
    for (e, &count) in tables.incidence.iter().enumerate() {
        if count > 2 {
            report.conforming = false;
            report.nonmanifold_edges.push(tables.edges[e]);
        }
    }

    for c in 0..mesh.cells().len() {
        if mesh.cell_signed_area(c) <= 0.0 {
            report.flipped_cells.push(c);
        }
    }

    // Duplicate detection by sweep over x-sorted vertices.
    let tol = 1e-12 * mesh.diameter();
    let mut order: Vec<usize> = (0..mesh.vertices().len()).collect();
    order.sort_by(|&a, &b| {
        mesh.vertices()[a]
            .x
            .partial_cmp(&mesh.vertices()[b].x)
            .unwrap()
            .then(a.cmp(&b))
    });
    for (rank, &i) in order.iter().enumerate() {
        for &j in order[rank + 1..].iter() {
            if mesh.vertices()[j].x - mesh.vertices()[i].x > tol {
                break;
            }
            if mesh.vertices()[i].dist(mesh.vertices()[j]) <= tol {
                report.duplicate_vertices.push((i.min(j), i.max(j)));
            }
        }
    }

    if let Some(mp) = mesh.macro_parent() {
        let mut children: HashMap<usize, usize> = HashMap::new();
        for &parent in mp {
            *children.entry(parent).or_insert(0) += 1;
        }
        report.macro_parent_consistent = children.values().all(|&n| n == 3);
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangle::analyze_triangle;

    #[test]
    fn unit_square_counts() {
        let mesh = generate_unit_square_mesh(2, Diagonal::RightUp).unwrap();
        assert_eq!(mesh.vertices().len(), 9);
        assert_eq!(mesh.cells().len(), 8);
        assert!((mesh.total_area() - 1.0).abs() < 1e-15);
        for c in 0..8 {
            let m = analyze_triangle(&mesh.cell_points(c)).unwrap();
            assert!((m.h[0] - 0.5).abs() < 1e-15);
            assert!((m.h[1] - 0.5).abs() < 1e-15);
            assert!((m.aspect - (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-13);
        }
        let report = validate_mesh(&mesh);
        assert!(report.is_valid());
    }

    #[test]
    fn unit_square_single_cell_pair() {
        let mesh = generate_unit_square_mesh(1, Diagonal::RightUp).unwrap();
        assert_eq!(mesh.vertices().len(), 4);
        assert_eq!(mesh.cells().len(), 2);
        assert!((mesh.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn left_up_diagonal() {
        let mesh = generate_unit_square_mesh(3, Diagonal::LeftUp).unwrap();
        assert_eq!(mesh.cells().len(), 18);
        assert!(validate_mesh(&mesh).is_valid());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_unit_square_mesh(0, Diagonal::RightUp).is_err());
        assert!(generate_shishkin_mesh(3, 0.1).is_err());
        assert!(generate_shishkin_mesh(0, 0.1).is_err());
        assert!(generate_shishkin_mesh(4, 0.0).is_err());
        assert!(generate_shishkin_mesh(4, 1.0).is_err());
    }

    #[test]
    fn shishkin_grid_points() {
        let mesh = generate_shishkin_mesh(4, 0.06).unwrap();
        let expect = [0.0, 0.03, 0.06, 0.53, 1.0];
        for (i, &x) in expect.iter().enumerate() {
            assert!((mesh.vertices()[i].x - x).abs() < 1e-15, "x[{i}]");
        }
        assert_eq!(mesh.cells().len(), 32);
        assert!(validate_mesh(&mesh).is_valid());
    }

    #[test]
    fn shishkin_cell_count() {
        let mesh = generate_shishkin_mesh(8, 0.3).unwrap();
        assert_eq!(mesh.cells().len(), 128);
    }

    #[test]
    fn shishkin_max_aspect_matches_formula() {
        let tau = 0.06;
        let mesh = generate_shishkin_mesh(4, tau).unwrap();
        let measured = (0..mesh.cells().len())
            .map(|c| analyze_triangle(&mesh.cell_points(c)).unwrap().aspect)
            .fold(0.0_f64, f64::max);
        let formula = shishkin_aspect(tau);
        assert!((measured - formula).abs() < 1e-9 * formula);
        assert!((formula - 8.93).abs() < 5e-3);
        // the two published forms of the formula agree
        let s = (1.0 + 4.0 * tau * tau).sqrt();
        let alt = s / (1.0 + 2.0 * tau - s);
        assert!((formula - alt).abs() < 1e-12 * formula);
    }

    #[test]
    fn refinement_counts_and_area() {
        let mesh = generate_unit_square_mesh(2, Diagonal::RightUp).unwrap();
        let mut m = mesh;
        for level in 1..=2 {
            m = clough_tocher_refine(&m, SplitStrategy::Barycenter).unwrap();
            assert_eq!(m.cells().len(), 8 * 3usize.pow(level));
            assert!((m.total_area() - 1.0).abs() < 1e-14);
            assert!(validate_mesh(&m).is_valid());
        }
        assert_eq!(m.cells().len(), 72);
        assert_eq!(m.vertices().len(), 9 + 8 + 24);
    }

    #[test]
    fn refinement_child_areas() {
        let mesh = generate_unit_square_mesh(2, Diagonal::RightUp).unwrap();

        let bary = clough_tocher_refine(&mesh, SplitStrategy::Barycenter).unwrap();
        for c in 0..bary.cells().len() {
            let parent = bary.macro_parent().unwrap()[c];
            let pa = mesh.cell_signed_area(parent);
            let ca = bary.cell_signed_area(c);
            assert!((ca - pa / 3.0).abs() < 1e-13 * pa);
        }

        let inc = clough_tocher_refine(&mesh, SplitStrategy::Incenter).unwrap();
        for parent in 0..mesh.cells().len() {
            let p = mesh.cell_points(parent);
            let pm = analyze_triangle(&p).unwrap();
            let children: Vec<usize> = (0..inc.cells().len())
                .filter(|&c| inc.macro_parent().unwrap()[c] == parent)
                .collect();
            assert_eq!(children.len(), 3);
            let mut areas: Vec<f64> = children
                .iter()
                .map(|&c| inc.cell_signed_area(c))
                .collect();
            areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // child sharing edge e_i has area |T| h_i / |dT|
            for (i, &a) in areas.iter().enumerate() {
                let expect = pm.area * pm.h[i] / pm.perimeter;
                assert!((a - expect).abs() < 1e-13 * pm.area);
            }
        }
    }

    #[test]
    fn equilateral_refinements_coincide() {
        let s = 3.0_f64.sqrt() / 2.0;
        let mesh = Mesh2D::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.5, s),
            ],
            vec![Cell::new(0, 1, 2)],
            None,
        )
        .unwrap();
        let a = clough_tocher_refine(&mesh, SplitStrategy::Barycenter).unwrap();
        let b = clough_tocher_refine(&mesh, SplitStrategy::Incenter).unwrap();
        for (va, vb) in a.vertices().iter().zip(b.vertices()) {
            assert!(va.dist(*vb) < 1e-14);
        }
    }

    #[test]
    fn refine_rejects_degenerate_cell() {
        let mesh = Mesh2D::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(2.0, 1e-18),
            ],
            vec![Cell::new(0, 1, 2)],
            None,
        )
        .unwrap();
        let err = clough_tocher_refine(&mesh, SplitStrategy::Incenter).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 0, .. }));
    }

    #[test]
    fn validation_flags_flipped_cell() {
        let mesh = Mesh2D::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            vec![Cell::new(0, 1, 2), Cell::new(0, 3, 2)], // second is clockwise
            None,
        )
        .unwrap();
        let report = validate_mesh(&mesh);
        assert_eq!(report.flipped_cells, vec![1]);
        assert!(!report.is_valid());
    }

    #[test]
    fn validation_flags_duplicates_and_nonmanifold() {
        let mesh = Mesh2D::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.5, -0.5),
                Point2::new(1e-15, 0.0), // duplicate of vertex 0
            ],
            vec![
                Cell::new(0, 1, 2),
                Cell::new(1, 3, 2),
                Cell::new(0, 1, 4),
                Cell::new(1, 0, 5), // third cell on edge (0,1)
            ],
            None,
        )
        .unwrap();
        let report = validate_mesh(&mesh);
        assert!(!report.conforming);
        assert!(report.nonmanifold_edges.contains(&(0, 1)));
        assert!(report.duplicate_vertices.contains(&(0, 5)));
    }

    #[test]
    fn boundary_vertices_unit_square() {
        let mesh = generate_unit_square_mesh(2, Diagonal::RightUp).unwrap();
        let boundary = mesh.boundary_vertices();
        assert_eq!(boundary.len(), 8); // all but the center vertex
        assert!(!boundary.contains(&4));
    }
}
