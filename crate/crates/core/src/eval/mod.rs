//! Experiment harness: synthetic flights, image interference, RMSE and
//! recall over candidate-count sweeps, CSV and SVG reports.

mod flight;
mod interference;
mod metrics;
mod report;

pub use flight::{generate_flight, FlightSample, FlightSpec, HeadingMode};
pub use interference::{gray_image, perturb_image, Flare, InterferenceSpec};
pub use metrics::{
    metrics_for, metrics_from_records, run_experiment, MetricsRow, MetricsTable, QueryRecord,
};
pub use report::{
    altitude_svg, export_report, plot_n, read_metrics_csv, read_queries_csv, trajectory_svg,
    ALTITUDE_FILE, METRICS_FILE, QUERIES_FILE, TRAJECTORY_FILE,
};

/// The candidate counts of the reference sweep.
pub const DEFAULT_SWEEP: [usize; 6] = [50, 30, 20, 10, 3, 1];
