//! A laboratory for the lowest-order divergence-free Scott-Vogelius pair on
//! anisotropic triangulations.
//!
//! The crate builds Clough-Tocher refinements of 2D meshes using either the
//! barycenter or the incenter as split point, quantifies the geometry of the
//! split (aspect ratios, large-angle behavior, reference-map bounds),
//! computes global and macro-element inf-sup constants from the pressure
//! Schur complement, and solves a boundary-layer Stokes benchmark with
//! exactly divergence-free velocities.
//!
//! Modules follow the pipeline: [`mesh`] makes and refines triangulations,
//! [`triangle`] measures them, [`space`]/[`assembly`] discretize,
//! [`infsup`] and [`stokes`] run the two experiment families, and the
//! `svlab` binary exposes everything as subcommands.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod infsup;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod stokes;
pub mod triangle;

pub use error::{Error, Result};
pub use geometry::Point2;
pub use mesh::{
    clough_tocher_refine, generate_shishkin_mesh, generate_unit_square_mesh, validate_mesh, Cell,
    Diagonal, Mesh2D, ValidationReport,
};
pub use triangle::{
    analyze_triangle, check_lac, hat_seminorm_sq, lemma_bounds_report, reference_map, split_metrics,
    split_point, BoundsReport, ReferenceMap, SplitMetrics, SplitStrategy, TriangleMetrics,
};
