//! Bimodal registration over planar matrix Lie groups.

mod group;
mod register;
mod warp;

pub use group::{exp_map, AlgebraElement, Group, GroupElement, MetricWeights};
pub use register::{
    descend, register, registration_gradient, registration_objective, LevelGradient, LevelObjective,
    LevelReport, Registration, RegistrationProblem, Residual, DEFAULT_PYRAMID_LEVELS,
};
pub use warp::{gaussian_pyramid, image_gradient, pyramid_down, warp, warp_about, Region, Warped};
