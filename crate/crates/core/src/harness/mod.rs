//! Training sessions, multi-session experiments and their outputs.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod session;
pub mod stats;
pub mod value_iteration;

pub use config::{RunConfig, ServiceConfig};
pub use experiment::{accuracy_sweep, run_experiment, Aggregate, ExperimentResult, Summary};
pub use metrics::{export_metrics, load_metrics, MetricsRow, CSV_HEADER};
pub use session::{run_session, EpisodeRecord, Session, SessionResult, StepReport};
pub use value_iteration::{value_iteration, ValueSolution};
