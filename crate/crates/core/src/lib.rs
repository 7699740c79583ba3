pub mod basis;
pub mod birman_schwinger;
pub mod config;
pub mod error;
pub mod lieb_thirring;
pub mod linalg;
pub mod output;
pub mod par;
pub mod pipeline;
pub mod profile;
pub mod quadrature;
pub mod special;
pub mod spectrum;
pub mod toeplitz;

pub use error::{Error, Result};
