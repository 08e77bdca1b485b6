//! Command drivers and file formats for the flow laboratory: JSON configs
//! and bodies, CSV diagnostics, SVG curve snapshots, and the run manifest.

pub mod config;
pub mod outputs;
pub mod runcmd;
pub mod sweep;
pub mod verify;

pub use config::parse_config;
pub use runcmd::{cmd_polar, cmd_run};
pub use sweep::cmd_sweep;
pub use verify::cmd_verify;
