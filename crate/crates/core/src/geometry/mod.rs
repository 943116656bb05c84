//! Embedded manifolds, targets and sample generation.

mod manifold;
mod sampling;
mod target;

pub use manifold::{
    embed, geodesic_distance, AmbientPoint, Manifold, ManifoldSpec, DEFAULT_SCALE,
    ON_MANIFOLD_TOL,
};
pub use sampling::{
    draw_sample_set, label_inputs, read_dataset, sample_inputs, write_dataset, InputDistribution,
    NoiseSpec, SampleSet,
};
pub use target::{validate_lipschitz, LipschitzReport, TargetFunction, TargetKind};
