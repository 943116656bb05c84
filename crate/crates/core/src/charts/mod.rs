//! Atlas construction, chart maps and the grid resolution `q*`.

mod atlas;
mod chart;
mod fit;

pub use atlas::{
    assign_chart_to_cube, build_atlas, estimate_embedding_constant, grid_resolution,
    sampled_embedding_ratio, Atlas, AtlasOptions, BackendKind, DeltaPolicy,
};
pub use chart::{
    chart_map, distortion_constants, Chart, ChartBackend, ChartImage, ChartNet, Sigma2Unit,
};
pub use fit::{fit_chart_net, fit_sigma2_net, FitOptions};

/// `q* = ceil(2 C0 sqrt(D) / min delta)` for a built atlas.
pub fn select_grid_resolution(atlas: &Atlas) -> u32 {
    grid_resolution(atlas.c0(), atlas.ambient_dim(), atlas.min_delta())
}
