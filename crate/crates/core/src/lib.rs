pub mod cli;
pub mod coding;
pub mod entropy;
pub mod error;
pub mod largedev;
pub mod numeric;
pub mod packing;
pub mod report;
pub mod shapes;

pub use error::{Error, Result};
pub use shapes::{parse_shape, supermajorizes, Shape};
