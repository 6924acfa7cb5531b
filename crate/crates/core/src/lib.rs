pub mod cli;
pub mod data;
pub mod defense;
pub mod encode;
pub mod error;
pub mod ess;
pub mod experiment;
pub mod noise;
pub mod poison;
pub mod pqc;
pub mod qnn;
pub mod seed;
pub mod simcore;

pub use error::{Error, Result};
