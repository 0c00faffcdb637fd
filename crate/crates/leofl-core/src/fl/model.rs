//! Model state and the parameter-server update rules.
//!
//! Three aggregation styles are implemented on plain parameter vectors:
//! synchronous weighted averaging of a full round, the same average applied
//! incrementally one update at a time, and staleness-damped asynchronous
//! mixing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global model: flat parameter vector plus a version counter that increases
/// by one on every parameter-server apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVector {
    pub params: Vec<f64>,
    pub version: u64,
}

impl ModelVector {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            params: vec![0.0; dimension],
            version: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    /// Index of the first non-finite parameter, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.params.iter().position(|p| !p.is_finite())
    }
}

/// One client's contribution: the parameter delta it computed, the global
/// version it started from, and how many local samples back it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client: u32,
    pub delta: Vec<f64>,
    pub base_version: u64,
    pub sample_count: u64,
}

/// Synchronous FedAvg: `new = base + sum_k (n_k / sum_j n_j) * delta_k`,
/// version advanced by one. Every update must have been computed against
/// `base` itself; a mismatch means the round lost synchronization.
pub fn fedavg_aggregate(base: &ModelVector, updates: &[ClientUpdate]) -> Result<ModelVector> {
    if updates.is_empty() {
        return Err(Error::Config(
            "fedavg: aggregation over zero updates".into(),
        ));
    }
    let total: u64 = updates.iter().map(|u| u.sample_count).sum();
    if total == 0 {
        return Err(Error::Config(
            "fedavg: all updates carry zero samples".into(),
        ));
    }
    let mut params = base.params.clone();
    for u in updates {
        if u.base_version != base.version {
            return Err(Error::Synchronization {
                client: format!("client {}", u.client),
                expected: base.version,
                got: u.base_version,
            });
        }
        debug_assert_eq!(u.delta.len(), params.len());
        let w = u.sample_count as f64 / total as f64;
        for (p, d) in params.iter_mut().zip(&u.delta) {
            *p += w * d;
        }
    }
    Ok(ModelVector {
        params,
        version: base.version + 1,
    })
}

/// Incremental FedAvg: applies a single update scaled by its share of the
/// population sample count, so N clients delivering once move the model by
/// exactly the FedAvg round average. Clients keep training between applies;
/// the version advances on every arrival.
pub fn fedsat_apply(global: &mut ModelVector, update: &ClientUpdate, total_samples: u64) {
    debug_assert!(total_samples >= update.sample_count && total_samples > 0);
    let w = update.sample_count as f64 / total_samples as f64;
    for (p, d) in global.params.iter_mut().zip(&update.delta) {
        *p += w * d;
    }
    global.version += 1;
}

/// Staleness-damped asynchronous mixing. The update's staleness is the number
/// of versions the global model advanced since the client fetched `base`;
/// the mixing weight decays as `alpha * (1 + staleness)^(-exponent)` and the
/// global model moves towards the client's local model `base + delta`.
///
/// Returns the staleness for tracing.
pub fn fedasync_apply(
    global: &mut ModelVector,
    update: &ClientUpdate,
    base_params: &[f64],
    alpha: f64,
    staleness_exponent: f64,
) -> u64 {
    debug_assert!(update.base_version <= global.version);
    debug_assert_eq!(base_params.len(), global.params.len());
    let staleness = global.version - update.base_version;
    let a = alpha * (1.0 + staleness as f64).powf(-staleness_exponent);
    for ((p, d), b) in global.params.iter_mut().zip(&update.delta).zip(base_params) {
        *p = (1.0 - a) * *p + a * (b + d);
    }
    global.version += 1;
    staleness
}
