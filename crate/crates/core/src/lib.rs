pub mod geometry;
pub mod localization;
pub mod model;
pub mod msa;
pub mod rng;
pub mod spectral;
pub mod stats;
