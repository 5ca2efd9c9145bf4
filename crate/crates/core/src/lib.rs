pub mod analysis;
pub mod datagen;
pub mod error;
pub mod estimands;
pub mod harness;
pub mod inference;
pub mod lasso;
pub mod linalg;
pub mod normal;
pub mod report;
pub mod selection;
pub mod tuning;

pub use error::{Error, Result};
