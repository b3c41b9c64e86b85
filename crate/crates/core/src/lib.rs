pub mod error;
pub mod dirichlet;
pub mod dynamics;
pub mod exec;
pub mod field;
pub mod greens;
pub mod nufft;
pub mod pic;
pub mod scenarios;
pub mod shapes;
pub mod special;

pub use error::{Error, Result};
