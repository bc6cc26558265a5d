pub mod amplitudes;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod mre;
pub mod numerics;
pub mod observables;
pub mod oracle;
pub mod potentials;
pub mod scenarios;
pub mod wavepacket;

pub use error::{Error, Result};
