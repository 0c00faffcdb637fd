//! Deterministic simulation of federated learning over low-Earth-orbit
//! constellations: Walker-pattern orbit generation, contact-window
//! computation against ground stations or an orbiting parameter server,
//! scenario classification, and a discrete-event engine running five
//! orchestration strategies over desk-scale learning tasks.

pub mod config;
pub mod consts;
pub mod contact;
pub mod error;
pub mod fl;
pub mod orbit;
pub mod ring;
pub mod scenario;
pub mod sim;

pub use config::{
    ClusterConfig, DelayConfig, FedasyncConfig, IslConfig, MissingClusterPolicy, PsPlacement,
    RingMode, ScenarioConfig, Strategy, StrategyConfig, SyncConfig, ALL_STRATEGIES,
};
pub use contact::{
    classify, cluster_windows, compute_windows, orient, write_gantt_csv, write_windows_csv,
    ClassificationReport, ClassifyThresholds, Cluster, ClusterStats, ContactWindow, GanttRow,
    Interval, NodeId, PairSpec, ScenarioClass, TemporalContactGraph,
};
pub use error::{Error, Result};
pub use fl::{
    evaluate, fedasync_apply, fedavg_aggregate, fedsat_apply, generate_data, local_train,
    partition_data, predictive_schedule, project_unit, schedule_sync_round, ClientUpdate,
    ContactDecision, LocalDataset, ModelVector, PartitionScheme, SyncParticipation, SyncSchedule,
    TaskKind, TaskSpec, UnitProjection,
};
pub use orbit::{
    generate_walker, ground_station_eci, propagate, visible, Constellation, EciPosition,
    GroundStation, LinkGeometry, OrbitElements, WalkerPattern, WalkerSpec,
};
pub use ring::{
    aggregate_and_forward, build_tree, completion_at_sink, deliver_to_ps, select_sink,
    unicast_transmissions, PartialAggregate, RoutePlan, SinkChoice,
};
pub use scenario::Scenario;
pub use sim::{
    account, run, write_metrics_csv, write_trace_csv, CommSummary, MetricsRow, RunManifest,
    RunOutput, TraceRow,
};
