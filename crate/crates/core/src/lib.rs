pub mod drive;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod mcwf;
pub mod observables;
pub mod rabi;
pub mod series;

pub use error::{Error, Result};
