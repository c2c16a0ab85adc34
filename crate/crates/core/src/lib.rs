//! LR-FHSS physical layer: transmitter, channel models and a SIC receiver.

pub mod channel;
pub mod coding;
pub mod dsp;
pub mod error;
pub mod params;
pub mod receiver;
pub mod rx;
pub mod sic;
pub mod tx;
pub mod types;

pub use error::{Error, Result};
pub use params::{DataRate, PhyParams};
pub use types::*;
