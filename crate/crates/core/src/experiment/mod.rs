//! Experiment orchestration: peak detection, configuration, runs and verification.

pub mod config;
pub mod peaks;
pub mod runs;
pub mod verify;

pub use config::{RunConfig, ScheduleSettings, VerifyLevel};
pub use peaks::{find_peaks, find_peaks_in, Peak, PeakReport, DEFAULT_THRESHOLD};
pub use runs::{run_figure1, sweep_v2, CurvePair, Figure1, SweepRow};
pub use verify::{verify, Check, PovmDenominator, VerifyReport};
