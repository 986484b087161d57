//! Shipped scenarios.

use crate::error::Result;

use super::{CompareSpec, Scenario};

pub const FILES: &[(&str, &str)] = &[
    ("disk_segment_cloud_power", include_str!("../../corpus/disk_segment_cloud_power.json")),
    ("ball_segment_two_poles_eta", include_str!("../../corpus/ball_segment_two_poles_eta.json")),
    ("sawtooth_log_modulus", include_str!("../../corpus/sawtooth_log_modulus.json")),
    ("box_segment_logpower", include_str!("../../corpus/box_segment_logpower.json")),
    ("cantor_dust_power", include_str!("../../corpus/cantor_dust_power.json")),
    ("cube_sawtooth_mixed", include_str!("../../corpus/cube_sawtooth_mixed.json")),
    ("neg_corrupted_bound", include_str!("../../corpus/neg_corrupted_bound.json")),
    ("neg_inflated_tau", include_str!("../../corpus/neg_inflated_tau.json")),
];

pub fn scenarios() -> Result<Vec<Scenario>> {
    FILES.iter().map(|(_, text)| Scenario::from_json(text)).collect()
}

pub fn by_name(name: &str) -> Result<Option<Scenario>> {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text))
        .transpose()
}

pub const COMPARE_FILES: &[(&str, &str)] = &[
    ("disk_point_power", include_str!("../../corpus/compare/disk_point_power.json")),
    ("disk_point_constant", include_str!("../../corpus/compare/disk_point_constant.json")),
];

pub fn compare_by_name(name: &str) -> Result<Option<CompareSpec>> {
    COMPARE_FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| CompareSpec::from_json(text))
        .transpose()
}
