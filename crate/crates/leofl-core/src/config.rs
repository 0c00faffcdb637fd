//! Scenario configuration: a strict-schema JSON document in which every
//! unstated constant has an explicit default, so that serializing the parsed
//! config back out yields the fully resolved set of knobs a run actually used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::ClassifyThresholds;
use crate::error::{Error, Result};
use crate::fl::{SyncParticipation, TaskKind, TaskSpec};
use crate::orbit::{GroundStation, WalkerSpec};

/// Orchestration strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Synchronous rounds, every client uploads directly to the PS.
    FedavgSync,
    /// Synchronous rounds with in-ring aggregation: one partial aggregate
    /// per cluster reaches the PS.
    FedavgIslAggregation,
    /// Asynchronous, staleness-discounted mixing on every arrival.
    Fedasync,
    /// Asynchronous incremental weighted averaging; clients cycle
    /// continuously and are never idle.
    Fedsat,
    /// Fedsat plus the look-ahead rule that delays a download when the whole
    /// next cycle fits into the next contact window.
    FedsatSched,
}

pub const ALL_STRATEGIES: [Strategy; 5] = [
    Strategy::FedavgSync,
    Strategy::FedavgIslAggregation,
    Strategy::Fedasync,
    Strategy::Fedsat,
    Strategy::FedsatSched,
];

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::FedavgSync => "fedavg-sync",
            Strategy::FedavgIslAggregation => "fedavg-isl-aggregation",
            Strategy::Fedasync => "fedasync",
            Strategy::Fedsat => "fedsat",
            Strategy::FedsatSched => "fedsat-sched",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_STRATEGIES
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy '{s}' (expected one of: {})",
                    ALL_STRATEGIES.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// Where the parameter server lives: at one of the named ground stations, or
/// on a dedicated satellite outside the constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsPlacement {
    GroundStation {
        station: String,
    },
    Satellite {
        altitude_km: f64,
        inclination_deg: f64,
        #[serde(default)]
        raan_deg: f64,
        #[serde(default)]
        initial_phase_deg: f64,
    },
}

/// Inter-satellite link availability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IslConfig {
    /// Intra-plane ring links between orbit neighbors.
    pub enabled: bool,
    /// Links between clusters; no orchestration strategy uses them, the flag
    /// only drives scenario classification.
    pub inter_cluster: bool,
    /// Line-of-sight clearance altitude for satellite-to-satellite links.
    pub grazing_altitude_km: f64,
}

impl Default for IslConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            inter_cluster: false,
            grazing_altitude_km: 0.0,
        }
    }
}

/// Timing model: fixed compute time, per-link-class rates, and an optional
/// wire-size override (0 is allowed and makes transfers instantaneous, which
/// degenerate test scenarios use).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayConfig {
    pub compute_s: f64,
    pub isl_rate_bps: f64,
    pub gs_rate_bps: f64,
    pub ps_rate_bps: f64,
    /// Model wire size in bits; when absent, derived from the task dimension
    /// (8 bytes per parameter + 1 KiB header).
    pub model_size_bits: Option<u64>,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            compute_s: 60.0,
            isl_rate_bps: 20.0e6,
            gs_rate_bps: 5.0e6,
            ps_rate_bps: 20.0e6,
            model_size_bits: None,
        }
    }
}

/// Knobs for the synchronous strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    pub participation: SyncParticipation,
    /// Greedy participation only schedules units whose projected return lies
    /// within this bound of the round start.
    pub round_bound_s: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            participation: SyncParticipation::Greedy,
            round_bound_s: 7200.0,
        }
    }
}

/// Knobs for the staleness-weighted asynchronous strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FedasyncConfig {
    pub alpha: f64,
    pub staleness_exponent: f64,
}

impl Default for FedasyncConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            staleness_exponent: 0.5,
        }
    }
}

/// How updates travel inside a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RingMode {
    /// Merge at every hop; each node sends one model-sized message.
    Aggregate,
    /// Baseline: forward every update to the sink separately.
    Unicast,
}

/// What the PS does when a cluster's aggregate has not arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingClusterPolicy {
    /// Hold the round open until every scheduled cluster delivers.
    Wait,
    /// Close the round once the timeout passes; late aggregates are dropped.
    ProceedWithout,
}

/// Knobs for the in-ring aggregation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    /// The chosen sink must be visible to the PS for this long past its
    /// predicted assembly time.
    pub sink_margin_s: f64,
    pub ring_mode: RingMode,
    pub missing_policy: MissingClusterPolicy,
    /// Timeout for `proceed-without`, measured from the first delivered
    /// aggregate of the round; later deliveries are dropped.
    pub missing_timeout_s: f64,
    /// Multiplier applied to the compute time used in sink prediction;
    /// values other than 1 deliberately mispredict to exercise the
    /// hold-at-sink fallback.
    pub compute_prediction_factor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            sink_margin_s: 60.0,
            ring_mode: RingMode::Aggregate,
            missing_policy: MissingClusterPolicy::Wait,
            missing_timeout_s: 3600.0,
            compute_prediction_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub sync: SyncConfig,
    pub fedasync: FedasyncConfig,
    pub cluster: ClusterConfig,
}

/// One scenario: geometry, links, timing, task, and run parameters. Parsing
/// rejects unknown keys and fills every omitted field with its documented
/// default, so the parsed value is the complete record of the run setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub walker: WalkerSpec,
    /// Constellation state epoch.
    #[serde(default)]
    pub epoch_s: f64,
    /// When the Greenwich meridian crosses inertial +x; shifts every ground
    /// track without touching the orbits.
    #[serde(default)]
    pub rotation_epoch_s: f64,
    #[serde(default)]
    pub ground_stations: Vec<GroundStation>,
    pub parameter_server: PsPlacement,
    #[serde(default)]
    pub isl: IslConfig,
    #[serde(default)]
    pub delays: DelayConfig,
    #[serde(default = "TaskSpec::default_spec")]
    pub task: TaskSpec,
    #[serde(default)]
    pub strategy: StrategyConfig,
    /// Strategies this scenario is meant to run; empty means every strategy
    /// compatible with the scenario.
    #[serde(default)]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_horizon_s")]
    pub horizon_s: f64,
    /// Visibility sampling step for contact-window computation.
    #[serde(default = "default_step_s")]
    pub step_s: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub classification: ClassifyThresholds,
    #[serde(default = "default_eval_interval_s")]
    pub eval_interval_s: f64,
    /// Accuracy level the summary's time-to-target column reports.
    #[serde(default = "default_target_accuracy")]
    pub target_accuracy: f64,
    /// Dwell the time-to-target column requires: the target must be held for
    /// this many seconds of the evaluation grid (or through the end of the
    /// run) before it counts as reached. Zero reduces to the first crossing;
    /// the default filters out momentary spikes of oscillating
    /// asynchronous strategies.
    #[serde(default = "default_target_hold_s")]
    pub target_hold_s: f64,
    /// Degenerate network for engine identities: every pair is permanently
    /// connected and propagation is zero.
    #[serde(default)]
    pub persistent_connectivity: bool,
}

fn default_horizon_s() -> f64 {
    86_400.0
}

fn default_step_s() -> f64 {
    10.0
}

fn default_seed() -> u64 {
    1
}

fn default_eval_interval_s() -> f64 {
    600.0
}

fn default_target_accuracy() -> f64 {
    0.8
}

fn default_target_hold_s() -> f64 {
    3600.0
}

impl TaskSpec {
    /// Task used when a scenario does not define one (contact-analysis
    /// configs never train).
    pub fn default_spec() -> Self {
        Self {
            kind: TaskKind::Quadratic,
            dimension: 8,
            batch_size: 100,
            learning_rate: 0.1,
            local_steps: 1,
            partition: crate::fl::PartitionScheme::Iid,
            train_samples: 4000,
            test_samples: 1000,
            noise_std: 1.0,
            class_separation: 3.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            Error::Json(err) => Error::Config(format!("{}: {err}", path.display())),
            other => other,
        })
    }

    // Bounds are written as `!(x >= y)` so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("scenario: name must not be empty".into()));
        }
        self.walker.validate()?;
        for gs in &self.ground_stations {
            gs.validate()?;
        }
        for (i, a) in self.ground_stations.iter().enumerate() {
            if self.ground_stations[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Config(format!(
                    "scenario: duplicate ground station name '{}'",
                    a.name
                )));
            }
        }
        match &self.parameter_server {
            PsPlacement::GroundStation { station } => {
                if !self.ground_stations.iter().any(|g| &g.name == station) {
                    return Err(Error::Config(format!(
                        "parameter_server: no ground station named '{station}'"
                    )));
                }
            }
            PsPlacement::Satellite { altitude_km, .. } => {
                if !(*altitude_km > 0.0) {
                    return Err(Error::Config(
                        "parameter_server: satellite altitude must be positive".into(),
                    ));
                }
            }
        }
        self.task.validate()?;
        let d = &self.delays;
        if !(d.compute_s >= 0.0) {
            return Err(Error::Config("delays: compute_s must be >= 0".into()));
        }
        for (label, rate) in [
            ("isl_rate_bps", d.isl_rate_bps),
            ("gs_rate_bps", d.gs_rate_bps),
            ("ps_rate_bps", d.ps_rate_bps),
        ] {
            if !(rate > 0.0) {
                return Err(Error::Config(format!("delays: {label} must be positive")));
            }
        }
        let s = &self.strategy;
        if !(s.fedasync.alpha > 0.0 && s.fedasync.alpha <= 1.0) {
            return Err(Error::Config("fedasync: alpha must be in (0, 1]".into()));
        }
        if !(s.fedasync.staleness_exponent >= 0.0) {
            return Err(Error::Config(
                "fedasync: staleness_exponent must be >= 0".into(),
            ));
        }
        if !(s.sync.round_bound_s > 0.0) {
            return Err(Error::Config("sync: round_bound_s must be positive".into()));
        }
        if !(s.cluster.sink_margin_s >= 0.0) {
            return Err(Error::Config("cluster: sink_margin_s must be >= 0".into()));
        }
        if !(s.cluster.compute_prediction_factor > 0.0) {
            return Err(Error::Config(
                "cluster: compute_prediction_factor must be positive".into(),
            ));
        }
        if !(self.horizon_s >= 0.0) {
            return Err(Error::Config("scenario: horizon_s must be >= 0".into()));
        }
        if !(self.step_s > 0.0) {
            return Err(Error::Config("scenario: step_s must be positive".into()));
        }
        if !(self.eval_interval_s > 0.0) {
            return Err(Error::Config(
                "scenario: eval_interval_s must be positive".into(),
            ));
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return Err(Error::Config(
                "scenario: target_accuracy must be in (0, 1]".into(),
            ));
        }
        if !(self.target_hold_s >= 0.0) {
            return Err(Error::Config("scenario: target_hold_s must be >= 0".into()));
        }
        let th = &self.classification;
        if !(th.min_duty_cycle > 0.0 && th.min_duty_cycle <= 1.0) {
            return Err(Error::Config(
                "classification: min_duty_cycle must be in (0, 1]".into(),
            ));
        }
        if !(th.max_gap_s > 0.0) {
            return Err(Error::Config(
                "classification: max_gap_s must be positive".into(),
            ));
        }
        for (i, k) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(k) {
                return Err(Error::Config(format!(
                    "scenario: strategy '{k}' listed twice"
                )));
            }
        }
        Ok(())
    }

    /// Wire size of one model message under this config.
    pub fn model_size_bits(&self) -> u64 {
        self.delays
            .model_size_bits
            .unwrap_or_else(|| self.task.model_size_bits())
    }

    /// Whether `strategy` can run on this scenario at all.
    pub fn check_strategy(&self, strategy: Strategy) -> Result<()> {
        if self.isl.inter_cluster {
            return Err(Error::Config(format!(
                "strategy {strategy}: inter-cluster links are enabled but no \
                 orchestration strategy routes across clusters"
            )));
        }
        if strategy == Strategy::FedavgIslAggregation && !self.isl.enabled {
            return Err(Error::Config(
                "strategy fedavg-isl-aggregation: scenario has no inter-satellite links".into(),
            ));
        }
        Ok(())
    }

    /// The strategies a simulation sweep should run: the configured list, or
    /// every compatible strategy when the list is empty.
    pub fn effective_strategies(&self) -> Vec<Strategy> {
        if self.strategies.is_empty() {
            ALL_STRATEGIES
                .into_iter()
                .filter(|k| self.check_strategy(*k).is_ok())
                .collect()
        } else {
            self.strategies.clone()
        }
    }
}
