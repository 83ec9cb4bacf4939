pub mod barriertop;
pub mod birkhoff;
pub mod eiconal;
pub mod error;
mod fft;
pub mod geomflow;
pub mod lattice;
pub mod models;
pub mod scenario;
pub mod speccompare;
pub mod symbolkit;
pub mod torusquant;

pub use error::{Error, Result};
