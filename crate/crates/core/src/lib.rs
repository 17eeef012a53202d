pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod grf;
pub mod nlsolve;
pub mod operators;
pub mod pipeline;
pub mod sparse;
pub mod spectral;

pub use error::{PgdmError, Result};
