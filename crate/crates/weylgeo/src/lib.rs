//! Numerical Weyl geometry on conformal product charts.
//!
//! A chart here is a box in R^{n1} x R^{n2} carrying two symmetric positive
//! blocks g1(x_1..x_{n1}) and g2(x_{n1+1}..x_n) and a warp function f, with
//! the gauge metric g = e^{2u}(g1 + e^{2f} g2) for a chosen gauge u
//! (default 0). The crate computes the unique torsion-free connection that
//! preserves the conformal class and both factor distributions, and
//! everything downstream of it:
//!
//! - [`chart`]: chart/gauge types, Lee form, connection symbols, Faraday
//!   form, JSON loading; warps may be symbolic expressions or interpolated
//!   grids.
//! - [`curvature`]: full curvature tensor, its pair-symmetry defect
//!   identity, Ricci via frame traces, and the action on mixed two-forms.
//! - [`holonomy`]: parallel transport, curvature generators, Lie bracket
//!   closure, and classification of the resulting algebra.
//! - [`einstein`]: the structural Ricci decomposition, Einstein residuals,
//!   the warp PDE on 2+2 splits, and sample-set scan reports.
//! - [`toda`]: finite-difference SOR solver for the warp PDE with grid
//!   file round-tripping and convergence-order measurement.
//! - [`tensor`], [`expr`], [`interp`], [`sampling`]: pointwise tensor
//!   values with conformal weights, the expression language, cubic grid
//!   interpolation, and seeded sampling.
//!
//! Conventions that everything relies on: coordinates are split factor-1
//! first; the Lee form of the default gauge is theta = -d_1 f on the first
//! factor block and 0 on the second; curvature is R(X,Y) = [D_X, D_Y] -
//! D_{[X,Y]} with R_{ijkl} = g(R(e_i,e_j)e_k, e_l); conformal weights count
//! powers of the rescaling e^{2u} (the gauge metric has weight 2, lowering
//! adds 2, raising subtracts 2).

pub mod chart;
pub mod curvature;
pub mod einstein;
pub mod error;
pub mod expr;
pub mod holonomy;
pub mod interp;
pub mod sampling;
pub mod tensor;
pub mod toda;

pub use chart::{
    adapted_lee_form_at, faraday_at, gauge_metric_at, metric_compatibility_residual,
    weyl_christoffels_at, ConformalProductChart, GaugeChoice, LeeFormAtPoint, WarpField,
    WeylChristoffels,
};
pub use curvature::{
    curvature_action_on_form, ricci_weyl_at, ricci_weyl_at_with_frame, symmetry_failure_residual,
    weyl_curvature_at, CurvatureAtPoint, RicciAtPoint, RicciFrame,
};
pub use einstein::{
    einstein_residual_at, einstein_residual_in_gauge, einstein_scan, measured_phi_at, no_go_scan,
    ricci_decomposition_at, ricci_decomposition_parts, symmetrized_faraday_at, toda_residual,
    EinsteinReport, RicciDecomposition, SymmetrizedFaraday,
};
pub use error::{Error, Result};
pub use expr::ScalarField;
pub use holonomy::{
    bracket_closure, classify_holonomy, curvature_generators, framed_curvature_generators,
    holonomy_algebra_at, parallel_transport, parallel_transport_with, square_loop,
    HolonomyAnalysis, HolonomyClass, HolonomyLabel, LieAlgebraBasis, TransportOptions,
};
pub use interp::CubicGridField;
pub use sampling::{rng, uniform_points};
pub use tensor::{
    form_inner, two_form_commutator, wedge_as_endo, Direction, EndoAtPoint, MetricAtPoint,
    PointTensor, Slot, TwoFormAtPoint,
};
pub use toda::{
    observed_order, read_grid, toda_solve, write_grid, ConvergenceReport, SolveOptions,
    SolveOutcome, SweepMode, TodaGrid,
};
