//! Regions, compact sets and their distance oracles, tube measures,
//! covering numbers and Lipschitz charts.

mod chart;
mod covering;
mod index;
mod region;
mod set;
mod tube;

pub use chart::{
    curve_views, default_anchors, graph_value, lipschitz_chart_check, local_graph, ChartParams,
    ChartReport, CurveView,
};
pub use covering::{assouad_estimate, covering_number, default_scale_pairs, greedy_net_size};
pub use index::KdTree;
pub use region::{sample_in_ball, Region};
pub use set::{
    cantor_centers, frame_from_direction, segment_dist, validate_frame, Chart, ChartProfile, Set,
    SetDescr,
};
pub use tube::{
    admissibility_constant, log_space, tube_measure, AdmissibilityEstimate, McEstimate,
    ProbeSchedule, WorstProbe,
};

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
