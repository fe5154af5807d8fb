//! Experiment orchestration: strict JSON configuration, ε-sweeps of the
//! linear and semilinear controllers, CSV and run-log output, and
//! least-squares fits of the cost growth.

mod config;
mod fit;
mod selftest;
mod sweep;

pub use config::{
    load_config, ControllerConfig, ExperimentConfig, HomotopyConfig, NonlinearityConfig, OutputConfig, Profile,
    ProblemConfig, SweepConfig, CONFIG_HELP,
};
pub use fit::{fit_cost_curve, write_plot_data, FitModel, FitReport, ModelFit, EMPIRICAL_LABEL, LOGLOG_DELTA};
pub use selftest::{run_selftest, Check};
pub use sweep::{
    csv_string, linear_leg, read_csv, run_linear, run_semilinear, worker_count, write_csv, write_report,
    write_resolved_config, SweepKind, SweepReport, SweepRow, WrittenFiles, CSV_HEADER, THREADS_ENV,
};
