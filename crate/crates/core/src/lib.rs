pub mod cli;
pub mod config;
pub mod error;
pub mod floquet;
pub mod henon_heiles;
pub mod kicked_top;
pub mod linalg;
pub mod rotor;
pub mod scan;
pub mod semiclassical;
pub mod series;
pub mod spin;
pub mod stats;

pub use error::{Error, Result};
