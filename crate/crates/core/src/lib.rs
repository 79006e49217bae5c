pub mod active;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod features;
pub mod model;
pub mod preprocess;
pub mod seed;
pub mod synth;
