pub mod autodiff;
pub mod cli;
pub mod controller;
pub mod error;
pub mod filter;
pub mod quantum;
pub mod rollout;
pub mod sde;
pub mod training;

pub use error::{Error, Result};
