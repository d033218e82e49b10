//! Functional and analytical simulation of mixed-signal compute-in-memory
//! accelerators for CNN and transformer inference.

pub mod analog;
pub mod cimkernel;
pub mod cli;
pub mod config;
pub mod digitmap;
pub mod dse;
pub mod hwperf;
pub mod netgraph;
pub mod quant;
pub mod tensorio;
