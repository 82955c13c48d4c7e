//! Experiment harness: configuration, runners that write data files,
//! cross-seed aggregation and the built-in acceptance checks.

mod aggregate;
mod config;
mod experiments;
mod verify;

pub use aggregate::{aggregate, solved_episode, AggregateSummary, CurveRow, RunSummary};
pub use config::{
    parse_floats, parse_log_grid, parse_seeds, preset_names, AgentKind, AnalysisSection, AnsatzSection,
    DatasetSource, EnvSection, EvaluateSection, ExperimentConfig, ExperimentKind, SurfaceSection, SweepSection,
};
pub use experiments::{
    analysis_target, cross_noise_eval, log_log_slope, make_agent, make_env, policy_surface, run, select_sweep_base,
    shot_scaling, synthetic_allocation, train_seed, CrossNoiseRow, HessianSummary, RunManifest, ShotScalingRow, Split,
    SweepBase, SyntheticEstimator, CARTPOLE_FEATURES, STREAM_ANALYSIS, STREAM_EVAL, STREAM_INIT, STREAM_TRAIN,
};
pub use verify::{compare_reruns, determinism_configs, verify, CriterionReport, FAST_CRITERIA};
