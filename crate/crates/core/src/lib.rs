//! Operational planning and analysis for a wind-integrated offshore oil and gas platform.

pub mod cli;
pub mod dispatch;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod network;
pub mod oracle;
pub mod par;
pub mod physics;
pub mod profiles;

pub use error::{Error, Result};
