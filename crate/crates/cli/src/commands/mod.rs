pub mod centroids;
pub mod eval;
pub mod pmg;
pub mod sweep;
pub mod synth;
pub mod update;
