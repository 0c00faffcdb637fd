//! Federated-learning building blocks: model state, parameter-server update
//! rules, training tasks and contact-aware scheduling.

pub mod model;
pub mod sched;
pub mod task;

pub use model::{fedasync_apply, fedavg_aggregate, fedsat_apply, ClientUpdate, ModelVector};
pub use sched::{
    predictive_schedule, project_unit, schedule_sync_round, ContactDecision, SyncParticipation,
    SyncSchedule, UnitProjection,
};
pub use task::{
    evaluate, generate_data, gradient_at, local_train, loss_at, partition_data, LocalDataset,
    PartitionScheme, TaskKind, TaskSpec,
};
