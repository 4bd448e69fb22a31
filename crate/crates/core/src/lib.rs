pub mod exec;
pub mod frontend;
pub mod harness;
pub mod ir;
pub mod symex;
pub mod solver;
pub mod coverage;
pub mod engine;
pub mod config;
pub mod pipeline;
pub mod report;
