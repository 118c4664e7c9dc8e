//! Integrity-checked DS-TWR rounds, Monte Carlo campaigns, datasets, sweeps
//! and reports.

pub mod campaign;
pub mod config;
pub mod dataset;
pub mod pipeline;
pub mod report;
pub mod round;
pub mod sweep;

pub use campaign::{aggregate, run_campaign, simulate_campaign, CampaignOutput, ErrorHistogram, MetricsReport};
pub use config::{DetectorConfig, DetectorSide, HistogramConfig, ModelConfig, ScenarioConfig, StsRefresh};
pub use dataset::{generate_dataset, CirPair, Dataset};
pub use pipeline::{calibrate, detector_for, prepare_detector, train_model};
pub use round::{evaluate, simulate_round, trial_rng, Detector, RoundDecision, RoundObservation, RoundRecord, Truth};
pub use sweep::{sweep, SweepParameter, SweepRow};
