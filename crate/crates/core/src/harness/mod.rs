//! Configuration, persistence, logging and experiment drivers.

mod checkpoint;
mod config;
mod figure;
mod run;
mod runlog;

pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use config::{load_config, Mode, RunConfig};
pub use figure::{write_merged_curves, CurveRow};
pub use run::{bundle_spec, load_base, run_training, RunSummary};
pub use runlog::{
    speedup_report, EpisodeRow, RunLog, Speedup, UpdateLog, EPISODE_SCHEMA, SUCCESS_WINDOW, UPDATE_SCHEMA,
};
