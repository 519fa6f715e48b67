pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod protocol;
pub mod scenario;
