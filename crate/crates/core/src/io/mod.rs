//! Configuration, field snapshots and tabular output.

pub mod config;
pub mod snapshot;

pub use config::{parse_config, load_config, ConfigError, RunConfig};
pub use snapshot::{load_field, read_field, save_field, write_field, SnapshotError, FORMAT_VERSION};
