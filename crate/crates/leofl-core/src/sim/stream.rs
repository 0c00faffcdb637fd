//! Streaming orchestration: every satellite runs its own
//! download-train-upload cycle against its contact timeline and the
//! parameter server applies each update the moment it arrives. Covers the
//! in-window cycling strategy, its predictive-scheduling variant, and
//! staleness-weighted asynchronous averaging.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Engine;
use crate::config::Strategy;
use crate::contact::NodeId;
use crate::error::Result;
use crate::fl::{fedasync_apply, fedsat_apply, predictive_schedule, ClientUpdate, ContactDecision};

enum EvKind {
    /// The planned download begins; the model is snapshot at this instant.
    DownloadStart {
        client: u32,
        done_s: f64,
    },
    ComputeDone {
        client: u32,
    },
    UploadArrive {
        client: u32,
        update: ClientUpdate,
    },
}

struct QEvent {
    t: f64,
    seq: u64,
    kind: EvKind,
}

impl PartialEq for QEvent {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.seq == other.seq
    }
}
impl Eq for QEvent {}
impl PartialOrd for QEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert so the earliest (time, then
        // insertion order) comes out first.
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn push(heap: &mut BinaryHeap<QEvent>, seq: &mut u64, t: f64, kind: EvKind) {
    *seq += 1;
    heap.push(QEvent { t, seq: *seq, kind });
}

struct ClientState {
    base_params: Vec<f64>,
    base_version: u64,
    cycles: u64,
    last_arrival_s: f64,
}

pub(crate) fn run_stream(e: &mut Engine) -> Result<()> {
    let n = e.sc.num_satellites();
    let ps = e.sc.ps;
    let horizon = e.horizon();
    let compute = e.dm.compute_s;
    let strategy = e.strategy;

    let mut heap: BinaryHeap<QEvent> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut clients: Vec<ClientState> = (0..n)
        .map(|_| ClientState {
            base_params: Vec::new(),
            base_version: 0,
            cycles: 0,
            last_arrival_s: -1.0,
        })
        .collect();

    for c in 0..n as u32 {
        if let Some(tr) = e.plan_transfer(ps, NodeId::Sat(c), 0.0, "download", false) {
            push(
                &mut heap,
                &mut seq,
                tr.start_s,
                EvKind::DownloadStart {
                    client: c,
                    done_s: tr.done_s,
                },
            );
        }
    }

    while let Some(ev) = heap.pop() {
        if ev.t > horizon {
            // Work in flight past the horizon is drained, not executed.
            let (client, stage) = match &ev.kind {
                EvKind::DownloadStart { client, .. } => (*client, "download"),
                EvKind::ComputeDone { client } => (*client, "compute"),
                EvKind::UploadArrive { client, .. } => (*client, "upload"),
            };
            e.trace(
                horizon,
                "drop",
                format!("sat{client}"),
                format!("reason=horizon stage={stage} at={}", ev.t),
            );
            continue;
        }
        match ev.kind {
            EvKind::DownloadStart { client, done_s } => {
                let st = &mut clients[client as usize];
                st.base_params = e.global.params.clone();
                st.base_version = e.global.version;
                push(
                    &mut heap,
                    &mut seq,
                    done_s + compute,
                    EvKind::ComputeDone { client },
                );
            }
            EvKind::ComputeDone { client } => {
                let (base, base_version, nonce) = {
                    let st = &clients[client as usize];
                    (st.base_params.clone(), st.base_version, st.cycles)
                };
                let update = e.local_update(client, &base, base_version, nonce)?;
                clients[client as usize].cycles += 1;
                e.trace(
                    ev.t,
                    "compute-done",
                    format!("sat{client}"),
                    format!("base_version={base_version} cycle={nonce}"),
                );
                if let Some(tr) = e.plan_transfer(NodeId::Sat(client), ps, ev.t, "upload", true) {
                    push(
                        &mut heap,
                        &mut seq,
                        tr.done_s,
                        EvKind::UploadArrive { client, update },
                    );
                }
                // A failed plan already traced the drop; the client halts
                // because its windows have run out.
            }
            EvKind::UploadArrive { client, update } => {
                apply_update(e, ev.t, update)?;
                let last = clients[client as usize].last_arrival_s;
                if ev.t <= last {
                    // Degenerate zero-delay configurations would cycle
                    // forever at one instant; halt the client after one
                    // repeat arrival.
                    e.trace(
                        ev.t,
                        "drop",
                        format!("sat{client}"),
                        "reason=zero-length-cycle".into(),
                    );
                    continue;
                }
                clients[client as usize].last_arrival_s = ev.t;
                let from = match strategy {
                    Strategy::FedsatSched => next_cycle_start(e, client, ev.t),
                    _ => ev.t,
                };
                if let Some(tr) = e.plan_transfer(ps, NodeId::Sat(client), from, "download", false)
                {
                    push(
                        &mut heap,
                        &mut seq,
                        tr.start_s,
                        EvKind::DownloadStart {
                            client,
                            done_s: tr.done_s,
                        },
                    );
                }
            }
        }
    }
    Ok(())
}

fn apply_update(e: &mut Engine, t: f64, update: ClientUpdate) -> Result<()> {
    match e.strategy {
        Strategy::Fedsat | Strategy::FedsatSched => {
            let staleness = e.global.version - update.base_version;
            let mut next = e.global.clone();
            fedsat_apply(&mut next, &update, e.total_samples);
            e.commit_global(t, next, 1, &[staleness])
        }
        Strategy::Fedasync => {
            let alpha = e.sc.config.strategy.fedasync.alpha;
            let exponent = e.sc.config.strategy.fedasync.staleness_exponent;
            let base = e.params_of_version(update.base_version).to_vec();
            let mut next = e.global.clone();
            let staleness = fedasync_apply(&mut next, &update, &base, alpha, exponent);
            e.commit_global(t, next, 1, &[staleness])
        }
        _ => unreachable!("streaming loop only runs streaming strategies"),
    }
}

/// Predictive variant's decision after finishing an upload at `now`: keep
/// cycling while another full cycle fits the current window, otherwise idle
/// through the offline phase exactly when the next window can host a whole
/// cycle on its own.
fn next_cycle_start(e: &mut Engine, client: u32, now: f64) -> f64 {
    let ps = e.sc.ps;
    let sat = NodeId::Sat(client);
    let class = e.link_class(sat, ps);
    let nominal = e.dm.nominal_transfer_s(class);
    let cycle = nominal + e.dm.compute_s + nominal;
    let intervals = e.sc.ps_intervals(client);

    if let Some(w) = intervals.iter().find(|w| w.start_s <= now && now < w.end_s) {
        if now + cycle <= w.end_s {
            e.trace(
                now,
                "contact-decision",
                format!("sat{client}"),
                "choice=cycle-in-window".into(),
            );
            return now;
        }
    }
    let next = intervals.iter().find(|w| w.start_s > now).copied();
    match predictive_schedule(next, nominal, e.dm.compute_s, nominal) {
        ContactDecision::IdleUntilNext => {
            let at = next.expect("idle decision implies a next window").start_s;
            e.trace(
                now,
                "contact-decision",
                format!("sat{client}"),
                format!("choice=idle-until-next at={at}"),
            );
            at
        }
        ContactDecision::DownloadNow => {
            e.trace(
                now,
                "contact-decision",
                format!("sat{client}"),
                "choice=download-now".into(),
            );
            now
        }
    }
}
