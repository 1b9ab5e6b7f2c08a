pub mod approximation;
pub mod cli;
pub mod dupire;
pub mod error;
pub mod fbsde_mc;
pub mod generators;
pub mod slab_pde;
pub mod timegrid_paths;

pub use error::{Error, Result};
