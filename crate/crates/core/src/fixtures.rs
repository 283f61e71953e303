//! Bundled example triangulations.

pub const FIG8: &str = include_str!("../data/4_1.json");
