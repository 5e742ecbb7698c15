pub mod circuit;
pub mod data;
pub mod evaluation;
pub mod metrics;
pub mod neural;
pub mod odenet;
pub mod signal;
pub mod solvers;
pub mod training;
