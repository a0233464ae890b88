pub mod beamforming;
pub mod channel;
pub mod convex;
pub mod detection;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod params;
pub mod selection;
pub mod siso;

pub use error::{Error, Result};
