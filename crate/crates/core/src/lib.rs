pub mod du;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod initial;
pub mod monitor;
pub mod norms;
pub mod ops;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Space, SpectralField3};
pub use grid::Grid3;
