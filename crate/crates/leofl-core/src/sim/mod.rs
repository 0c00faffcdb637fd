//! Deterministic discrete-event simulation of a full federated-learning run
//! over the scenario's contact structure.
//!
//! The orchestration strategies share one substrate: transfers are planned
//! against the precomputed contact windows (a transfer either fits a window
//! completely or is aborted at window close and retried in the next one),
//! model versions form a timestamped log, and communication is tallied per
//! link class. Metrics rows are sampled from those logs on a fixed
//! evaluation grid, so identical inputs reproduce identical output bytes.

mod ring_round;
mod stream;
mod sync;

use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, Strategy};
use crate::consts::SPEED_OF_LIGHT_KM_S;
use crate::contact::{orient, ContactWindow, NodeId};
use crate::error::{Error, Result};
use crate::fl::{
    evaluate, generate_data, local_train, partition_data, ClientUpdate, LocalDataset, ModelVector,
};
use crate::orbit::distance_km;
use crate::scenario::Scenario;

/// One sampled metrics row; cumulative counters are as of `sim_time_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub sim_time_s: f64,
    pub version: u64,
    /// Global-model loss over the pooled training data.
    pub loss: f64,
    /// Accuracy over the held-out test set (NaN for regression tasks).
    pub accuracy: f64,
    pub bits_gs: u64,
    pub bits_ring: u64,
    pub bits_ps: u64,
    pub ps_msgs: u64,
}

/// One event-trace row. `detail` holds deterministic `key=value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    pub kind: &'static str,
    pub subject: String,
    pub detail: String,
}

/// Communication accounting of a completed run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommSummary {
    pub bits_gs: u64,
    pub bits_ring: u64,
    pub bits_ps: u64,
    /// Model-sized messages received at the parameter server.
    pub ps_msgs: u64,
    /// `(version, messages consumed to produce it)` per global update.
    pub per_round_in_degree: Vec<(u64, u32)>,
    /// Version lag of every applied update, in application order.
    pub staleness: Vec<u64>,
}

/// Everything a simulation run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub strategy: Strategy,
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    pub trace: Vec<TraceRow>,
    pub final_model: ModelVector,
    pub summary: CommSummary,
    pub warnings: Vec<String>,
}

impl RunOutput {
    /// Earliest sampled time from which test accuracy stays at or above
    /// `target` for `hold_s` seconds (or through the end of the run when
    /// less than `hold_s` remains). A sampled dip below the target resets
    /// the candidate, so a model that merely oscillates across the target
    /// between evaluations does not count as having reached it;
    /// `hold_s = 0` reduces to the first crossing.
    pub fn time_to_target(&self, target: f64, hold_s: f64) -> Option<f64> {
        let last_t = self.metrics.last().map(|r| r.sim_time_s)?;
        let mut start: Option<f64> = None;
        for r in &self.metrics {
            if r.accuracy >= target {
                let s = *start.get_or_insert(r.sim_time_s);
                if r.sim_time_s >= (s + hold_s).min(last_t) {
                    return Some(s);
                }
            } else {
                start = None;
            }
        }
        None
    }
}

/// Reproduction record written next to each metrics file: the fully
/// materialized configuration plus the run coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub model_size_bits: u64,
    pub scenario: ScenarioConfig,
}

impl RunManifest {
    pub fn new(scenario: &ScenarioConfig, strategy: Strategy, seed: u64) -> Self {
        Self {
            tool: "leofl".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            strategy,
            seed,
            model_size_bits: scenario.model_size_bits(),
            scenario: scenario.clone(),
        }
    }
}

/// Link classes used for rate selection and accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LinkClass {
    Gs,
    Ring,
    Ps,
}

impl LinkClass {
    fn name(self) -> &'static str {
        match self {
            LinkClass::Gs => "gs",
            LinkClass::Ring => "ring",
            LinkClass::Ps => "ps",
        }
    }
}

/// Resolved timing model: fixed compute time, one rate per link class, a
/// fixed wire size, and light-speed propagation (zeroed in the degenerate
/// persistent-connectivity mode).
#[derive(Debug, Clone, Copy)]
pub(crate) struct DelayModel {
    pub compute_s: f64,
    pub bits: u64,
    pub isl_rate_bps: f64,
    pub gs_rate_bps: f64,
    pub ps_rate_bps: f64,
    pub persistent: bool,
}

impl DelayModel {
    fn rate(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::Gs => self.gs_rate_bps,
            LinkClass::Ring => self.isl_rate_bps,
            LinkClass::Ps => self.ps_rate_bps,
        }
    }

    /// Transfer duration given the endpoint distance at transfer start.
    pub fn transfer_s(&self, class: LinkClass, distance_km: f64) -> f64 {
        let prop = if self.persistent {
            0.0
        } else {
            distance_km / SPEED_OF_LIGHT_KM_S
        };
        self.bits as f64 / self.rate(class) + prop
    }

    /// Serialization-only duration, used for scheduling projections where
    /// the exact start (and thus distance) is not yet known; propagation
    /// is milliseconds against window scales of minutes.
    pub fn nominal_transfer_s(&self, class: LinkClass) -> f64 {
        self.bits as f64 / self.rate(class)
    }
}

/// A planned transfer: occupies `[start_s, done_s]` inside one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Transfer {
    pub start_s: f64,
    pub done_s: f64,
}

/// Plans a transfer against a window list: the first window (ending at or
/// after `not_before`) that holds the full duration wins; windows too short
/// produce an abort record `(attempt_start, window_close)` and the next
/// window is tried. `duration_at` maps a start time to the transfer duration
/// (propagation varies with geometry).
pub(crate) fn windowed_transfer(
    windows: &[ContactWindow],
    not_before: f64,
    duration_at: impl Fn(f64) -> f64,
) -> (Vec<(f64, f64)>, Option<Transfer>) {
    let mut aborts = Vec::new();
    for w in windows {
        if w.end_s < not_before {
            continue;
        }
        let start = not_before.max(w.start_s);
        let duration = duration_at(start);
        if start + duration <= w.end_s {
            return (
                aborts,
                Some(Transfer {
                    start_s: start,
                    done_s: start + duration,
                }),
            );
        }
        if start < w.end_s {
            aborts.push((start, w.end_s));
        }
    }
    (aborts, None)
}

struct VersionEntry {
    time_s: f64,
    params: Vec<f64>,
}

/// Shared run state: scenario bindings, task data, the version log, and the
/// communication ledgers every strategy writes through.
pub(crate) struct Engine<'a> {
    pub sc: &'a Scenario,
    pub strategy: Strategy,
    pub seed: u64,
    pub dm: DelayModel,
    pub data: Vec<LocalDataset>,
    pub counts: Vec<u64>,
    pub total_samples: u64,
    train_pool: LocalDataset,
    test_set: LocalDataset,
    pub global: ModelVector,
    versions: Vec<VersionEntry>,
    bit_events: Vec<(f64, LinkClass, u64)>,
    ps_msg_times: Vec<f64>,
    pub trace: Vec<TraceRow>,
    per_round_in_degree: Vec<(u64, u32)>,
    staleness: Vec<u64>,
    seq: u64,
}

impl<'a> Engine<'a> {
    pub fn new(sc: &'a Scenario, strategy: Strategy, seed: u64) -> Result<Self> {
        let cfg = &sc.config;
        let (train_pool, test_set) = generate_data(&cfg.task, seed);
        let n = sc.num_satellites();
        let data = partition_data(&train_pool, cfg.task.partition, n, Some(&cfg.walker), seed)?;
        let counts: Vec<u64> = data.iter().map(|d| d.len() as u64).collect();
        let total_samples = counts.iter().sum();
        let dm = DelayModel {
            compute_s: cfg.delays.compute_s,
            bits: cfg.model_size_bits(),
            isl_rate_bps: cfg.delays.isl_rate_bps,
            gs_rate_bps: cfg.delays.gs_rate_bps,
            ps_rate_bps: cfg.delays.ps_rate_bps,
            persistent: cfg.persistent_connectivity,
        };
        let global = ModelVector::zeros(cfg.task.dimension);
        let versions = vec![VersionEntry {
            time_s: 0.0,
            params: global.params.clone(),
        }];
        Ok(Self {
            sc,
            strategy,
            seed,
            dm,
            data,
            counts,
            total_samples,
            train_pool,
            test_set,
            global,
            versions,
            bit_events: Vec::new(),
            ps_msg_times: Vec::new(),
            trace: Vec::new(),
            per_round_in_degree: Vec::new(),
            staleness: Vec::new(),
            seq: 0,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.sc.config.horizon_s
    }

    pub fn trace(
        &mut self,
        time_s: f64,
        kind: &'static str,
        subject: impl Into<String>,
        detail: String,
    ) {
        self.seq += 1;
        self.trace.push(TraceRow {
            time_s,
            kind,
            subject: subject.into(),
            detail,
        });
    }

    /// Mixes run seed, client and a per-cycle nonce into an independent
    /// training stream (splitmix finalizer).
    pub fn train_seed(&self, client: u32, nonce: u64) -> u64 {
        let mut x = self
            .seed
            .wrapping_add((client as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(nonce.wrapping_mul(0xD1B5_4A32_D192_ED03));
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^ (x >> 31)
    }

    /// Local training of one client against a base model snapshot.
    pub fn local_update(
        &self,
        client: u32,
        base: &[f64],
        base_version: u64,
        nonce: u64,
    ) -> Result<ClientUpdate> {
        let delta = local_train(
            base,
            &self.data[client as usize],
            &self.sc.config.task,
            self.train_seed(client, nonce),
        )?;
        Ok(ClientUpdate {
            client,
            delta,
            base_version,
            sample_count: self.counts[client as usize],
        })
    }

    /// Model parameters of a given version (the version log is dense).
    pub fn params_of_version(&self, version: u64) -> &[f64] {
        &self.versions[version as usize].params
    }

    /// Installs the next global model at time `t` with its provenance.
    pub fn commit_global(
        &mut self,
        t: f64,
        new: ModelVector,
        in_degree: u32,
        staleness: &[u64],
    ) -> Result<()> {
        debug_assert_eq!(
            new.version,
            self.global.version + 1,
            "versions are sequential"
        );
        if new.first_non_finite().is_some() {
            return Err(Error::NonFiniteModel {
                event_seq: self.seq,
            });
        }
        self.trace(
            t,
            "ps-apply",
            "ps",
            format!("version={} in_degree={in_degree}", new.version),
        );
        self.per_round_in_degree.push((new.version, in_degree));
        self.staleness.extend_from_slice(staleness);
        self.versions.push(VersionEntry {
            time_s: t,
            params: new.params.clone(),
        });
        self.global = new;
        Ok(())
    }

    pub fn link_class(&self, a: NodeId, b: NodeId) -> LinkClass {
        match (a, b) {
            (NodeId::Ground(_), _) | (_, NodeId::Ground(_)) => LinkClass::Gs,
            _ => LinkClass::Ps,
        }
    }

    fn distance_at(&self, a: NodeId, b: NodeId, t: f64) -> f64 {
        distance_km(&self.sc.position(a, t), &self.sc.position(b, t))
    }

    /// Plans a windowed transfer without committing it (no trace, no bits):
    /// prediction-side twin of `plan_transfer`, guaranteed to agree with it.
    pub fn quote_transfer(&self, from: NodeId, to: NodeId, not_before: f64) -> Option<Transfer> {
        let (a, b) = orient(from, to);
        let class = self.link_class(a, b);
        let windows = self.sc.graph.pair_windows(a, b);
        let duration_at = |start: f64| {
            let d = if self.dm.persistent {
                0.0
            } else {
                self.distance_at(a, b, start)
            };
            self.dm.transfer_s(class, d)
        };
        windowed_transfer(windows, not_before, duration_at).1
    }

    /// Executes a windowed transfer: traces the attempt, any window-close
    /// aborts (each retried at the next window), and the completion; books
    /// the bits at completion time. `ps_msg` marks deliveries that count
    /// against the parameter server's message load.
    pub fn plan_transfer(
        &mut self,
        from: NodeId,
        to: NodeId,
        not_before: f64,
        purpose: &'static str,
        ps_msg: bool,
    ) -> Option<Transfer> {
        let (a, b) = orient(from, to);
        let class = self.link_class(a, b);
        let windows = self.sc.graph.pair_windows(a, b);
        let duration_at = |start: f64| {
            let d = if self.dm.persistent {
                0.0
            } else {
                self.distance_at(a, b, start)
            };
            self.dm.transfer_s(class, d)
        };
        let (aborts, planned) = windowed_transfer(windows, not_before, duration_at);

        let subject = format!("{from}->{to}");
        let bits = self.dm.bits;
        for (attempt, close) in aborts {
            self.trace(
                attempt,
                "transfer-start",
                subject.clone(),
                format!("purpose={purpose} bits={bits}"),
            );
            self.trace(
                close,
                "transfer-abort",
                subject.clone(),
                format!("purpose={purpose} reason=window-close"),
            );
        }
        match planned {
            Some(tr) => {
                self.trace(
                    tr.start_s,
                    "transfer-start",
                    subject.clone(),
                    format!("purpose={purpose} bits={bits}"),
                );
                self.trace(
                    tr.done_s,
                    "transfer-done",
                    subject,
                    format!(
                        "purpose={purpose} bits={bits} class={} ps_msg={}",
                        class.name(),
                        u8::from(ps_msg)
                    ),
                );
                self.bit_events.push((tr.done_s, class, bits));
                if ps_msg {
                    self.ps_msg_times.push(tr.done_s);
                }
                Some(tr)
            }
            None => {
                self.trace(
                    not_before,
                    "drop",
                    subject,
                    format!("purpose={purpose} reason=no-window-before-horizon"),
                );
                None
            }
        }
    }

    /// Books one always-on ring-link transfer completing at `done_s`.
    pub fn record_ring_transfer(&mut self, from: u32, to: u32, done_s: f64, purpose: &'static str) {
        let bits = self.dm.bits;
        self.trace(
            done_s,
            "transfer-done",
            format!("sat{from}->sat{to}"),
            format!("purpose={purpose} bits={bits} class=ring ps_msg=0"),
        );
        self.bit_events.push((done_s, LinkClass::Ring, bits));
    }

    /// Books a model-sized arrival at the (satellite) parameter server over
    /// an always-on prediction-exact path; used by ring strategies that
    /// already know the arrival time.
    pub fn ring_hop_s(&self, cluster_idx: usize) -> f64 {
        let d = if self.dm.persistent {
            0.0
        } else {
            self.sc.ring_hop_km[cluster_idx]
        };
        self.dm.transfer_s(LinkClass::Ring, d)
    }

    /// Samples the metrics grid from the logs and wraps up.
    pub fn finish(mut self) -> RunOutput {
        self.trace.sort_by(|p, q| p.time_s.total_cmp(&q.time_s));
        self.bit_events.sort_by(|p, q| p.0.total_cmp(&q.0));
        self.ps_msg_times.sort_by(|p, q| p.total_cmp(q));
        debug_assert!(
            self.versions.windows(2).all(|w| w[0].time_s <= w[1].time_s),
            "version log must be time-ordered"
        );

        let horizon = self.horizon();
        let interval = self.sc.config.eval_interval_s;
        let kind = self.sc.config.task.kind;
        let mut metrics = Vec::new();
        let (mut vi, mut bi, mut mi) = (0usize, 0usize, 0usize);
        let (mut gs, mut ring, mut ps) = (0u64, 0u64, 0u64);
        let mut k = 0u64;
        loop {
            let t = k as f64 * interval;
            if t > horizon {
                break;
            }
            while vi + 1 < self.versions.len() && self.versions[vi + 1].time_s <= t {
                vi += 1;
            }
            while bi < self.bit_events.len() && self.bit_events[bi].0 <= t {
                match self.bit_events[bi].1 {
                    LinkClass::Gs => gs += self.bit_events[bi].2,
                    LinkClass::Ring => ring += self.bit_events[bi].2,
                    LinkClass::Ps => ps += self.bit_events[bi].2,
                }
                bi += 1;
            }
            while mi < self.ps_msg_times.len() && self.ps_msg_times[mi] <= t {
                mi += 1;
            }
            let params = &self.versions[vi].params;
            let (loss, _) = evaluate(kind, params, &self.train_pool);
            let (_, accuracy) = evaluate(kind, params, &self.test_set);
            metrics.push(MetricsRow {
                sim_time_s: t,
                version: vi as u64,
                loss,
                accuracy,
                bits_gs: gs,
                bits_ring: ring,
                bits_ps: ps,
                ps_msgs: mi as u64,
            });
            k += 1;
        }

        let mut summary = CommSummary {
            per_round_in_degree: self.per_round_in_degree,
            staleness: self.staleness,
            ..CommSummary::default()
        };
        for (_, class, bits) in &self.bit_events {
            match class {
                LinkClass::Gs => summary.bits_gs += bits,
                LinkClass::Ring => summary.bits_ring += bits,
                LinkClass::Ps => summary.bits_ps += bits,
            }
        }
        summary.ps_msgs = self.ps_msg_times.len() as u64;

        RunOutput {
            strategy: self.strategy,
            seed: self.seed,
            metrics,
            trace: self.trace,
            final_model: self.global,
            summary,
            warnings: self.sc.warnings.clone(),
        }
    }
}

/// Runs one strategy over an assembled scenario. A zero horizon is the
/// degenerate empty run: no events, no metrics.
pub fn run(sc: &Scenario, strategy: Strategy, seed: u64) -> Result<RunOutput> {
    sc.config.check_strategy(strategy)?;
    if sc.config.horizon_s == 0.0 {
        return Ok(RunOutput {
            strategy,
            seed,
            metrics: Vec::new(),
            trace: Vec::new(),
            final_model: ModelVector::zeros(sc.config.task.dimension),
            summary: CommSummary::default(),
            warnings: sc.warnings.clone(),
        });
    }
    let mut engine = Engine::new(sc, strategy, seed)?;
    match strategy {
        Strategy::FedavgSync => sync::run_sync(&mut engine)?,
        Strategy::FedavgIslAggregation => ring_round::run_isl(&mut engine)?,
        Strategy::Fedsat | Strategy::FedsatSched | Strategy::Fedasync => {
            stream::run_stream(&mut engine)?
        }
    }
    Ok(engine.finish())
}

/// Rebuilds the communication summary from an event trace (totals by link
/// class and per-round PS in-degree); staleness is an engine-side record and
/// is not reconstructed.
pub fn account(trace: &[TraceRow]) -> CommSummary {
    fn field<'d>(detail: &'d str, key: &str) -> Option<&'d str> {
        detail
            .split_ascii_whitespace()
            .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }

    let mut s = CommSummary::default();
    for row in trace {
        match row.kind {
            "transfer-done" => {
                let bits: u64 = field(&row.detail, "bits")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0);
                match field(&row.detail, "class") {
                    Some("gs") => s.bits_gs += bits,
                    Some("ring") => s.bits_ring += bits,
                    Some("ps") => s.bits_ps += bits,
                    _ => {}
                }
                if field(&row.detail, "ps_msg") == Some("1") {
                    s.ps_msgs += 1;
                }
            }
            "ps-apply" => {
                let version = field(&row.detail, "version").and_then(|v| v.parse().ok());
                let in_degree = field(&row.detail, "in_degree").and_then(|v| v.parse().ok());
                if let (Some(v), Some(d)) = (version, in_degree) {
                    s.per_round_in_degree.push((v, d));
                }
            }
            _ => {}
        }
    }
    s
}

/// Writes metrics as RFC 4180 CSV with the fixed eight-column header.
pub fn write_metrics_csv<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sim_time_s",
        "version",
        "loss",
        "accuracy",
        "bits_gs",
        "bits_ring",
        "bits_ps",
        "ps_msgs",
    ])
    .map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.sim_time_s.to_string(),
            r.version.to_string(),
            r.loss.to_string(),
            r.accuracy.to_string(),
            r.bits_gs.to_string(),
            r.bits_ring.to_string(),
            r.bits_ps.to_string(),
            r.ps_msgs.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the event trace as CSV (`time_s,kind,subject,detail`).
pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "kind", "subject", "detail"])
        .map_err(csv_io)?;
    for r in rows {
        w.write_record([r.time_s.to_string().as_str(), r.kind, &r.subject, &r.detail])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
