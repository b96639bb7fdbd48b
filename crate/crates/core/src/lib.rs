//! Nonlocal correlation boxes and their XOR distillation.
//!
//! - [`boxes`]: the `P(ab|xy)` table, correlators, CHSH value, marginals and
//!   classification.
//! - [`quantum`]: boxes from spin measurements on a singlet, the planar
//!   measurement family, and the arcsine attainability criterion.
//! - [`distill`]: the XOR wiring and its action on the `(η, γ)` family.
//! - [`optimize`]: grid and boundary searches for the largest distillation
//!   gain among attainable boxes.
//! - [`simulate`]: counting-statistics emulation with error bars.

pub mod boxes;
pub mod distill;
pub mod error;
pub mod optimize;
pub mod quantum;
pub mod simulate;

pub use boxes::{
    BoxClass, CondProbTable, EtaGammaParams, Marginals, DEFAULT_TOL, LOCAL_BOUND, TSIRELSON_BOUND,
};
pub use distill::{distill_map, gain, iterate_distill, xor_wire, DistillStep};
pub use error::{Error, Result};
pub use optimize::{
    boundary_search, consistency_report, grid_search, BoundaryOptimum, ConsistencyReport,
    GridOptimum, Region, SearchSettings,
};
pub use quantum::{
    eta_gamma_from_phi, planar_frame, singlet_box, tlm_feasible, tlm_slack, tsirelson_check,
    CorrelationVector, MeasurementFrame, PlanarAngle, Visibility,
};
pub use simulate::{
    bootstrap_chsh, chsh_estimate, estimate_box, report_table, run_experiment, sample_counts,
    CountTable, Estimate, EstimateMethod, ExperimentReport, NoiseModel,
};
