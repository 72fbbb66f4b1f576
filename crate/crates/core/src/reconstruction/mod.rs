//! Guided and joint bimodal reconstruction under the coupled co-sparsity prior.

mod measurement;
mod metrics;
mod solve;

pub use measurement::{decimation_offset, gaussian_kernel, MeasurementKind, MeasurementOperator};
pub use metrics::{evaluate_metrics, nearest_neighbor_upsample, to_8bit_scale, Metrics};
pub use solve::{
    precompute_guide_coeffs, reconstruct_guided, reconstruct_joint, validate_schedule, GuidedObjective,
    Init, JointObjective, JointProblem, JointReconstruction, Reconstruction, ReconstructionProblem,
    StageReport, DEFAULT_LAMBDA_SCHEDULE, DEFAULT_STAGE_ITERATIONS,
};
