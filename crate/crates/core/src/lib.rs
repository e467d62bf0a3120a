pub mod analysis;
pub mod error;
pub mod experiments;
pub mod generate;
pub mod io;
pub mod lp;
pub mod model;
pub mod multi_item;
pub mod registry;
pub mod reproduce;
pub mod single_item;

pub use error::{Error, Result};
