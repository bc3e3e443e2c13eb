pub mod backend;
pub mod config;
pub mod constraints;
pub mod dataset;
pub mod level;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
pub mod synth;

#[cfg(test)]
pub(crate) mod fixtures;
