//! Fractal surface kit: construction, evaluation, and analysis of
//! self-referential interpolation surfaces on rectangular nets.
//!
//! The library builds surfaces as fixed points of contractive map families
//! over a grid of knots. Two constructions are shipped: the perturbation of
//! an arbitrary continuous function through a bounded linear operator and a
//! vertical scale (`alpha`), and the bilinear construction driven by knot
//! data plus a scaling lattice, which admits a closed-form box-counting
//! dimension. Around them sit numerical analysis tools (norm bounds, a
//! series inverse, box counting, approximation ladders), a small expression
//! language for configs, and CSV/PGM/OBJ exporters.

pub mod alpha;
pub mod analysis;
pub mod approx;
pub mod bilinear;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod expr;
pub mod field;
pub mod ifs;
pub mod net;
pub mod report;

pub use alpha::{
    apply_inverse_neumann, bernstein_operator, build_alpha_surface, composition_operator,
    multiplication_operator, operator_norm_bounds, AlphaSurface, NormBounds, PerturbOperator,
    ScaleFunction, SolverConfig,
};
pub use bilinear::{
    build_bilinear_fis, corner_bilinear, gamma_constant, theoretical_box_dimension, BilinearData,
    BilinearSurface, DimensionVerdict, PiecewiseBilinear,
};
pub use error::{Error, Result};
pub use field::{BivFn, Rect, SampledField};
pub use ifs::{
    fixed_point_solve, orbit_evaluate, rb_apply, verify_corner_conditions,
    verify_matching_conditions, KnotLattice, SurfaceOrbit, VerticalMapFamily,
};
pub use net::{build_affine_maps, tau, AffineMaps, Axis, Boundary, Net};
