pub mod error;
pub mod geometry;
pub mod netcore;
pub mod seed;
pub mod charts;
pub mod estimator;
pub mod oracle;
pub mod harness;
