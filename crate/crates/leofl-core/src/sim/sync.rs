//! Round-synchronous orchestration: the parameter server plans one round at
//! a time from the contact windows, pushes the current model to every
//! scheduled satellite, waits for all their updates and aggregates once.

use super::Engine;
use crate::contact::{Interval, NodeId};
use crate::error::{Error, Result};
use crate::fl::{fedavg_aggregate, schedule_sync_round, ClientUpdate, SyncParticipation};

/// Earliest window opening strictly after `t` across all units.
fn next_opening(windows: &[Vec<Interval>], t: f64) -> Option<f64> {
    windows
        .iter()
        .flatten()
        .map(|w| w.start_s)
        .filter(|&s| s > t)
        .min_by(f64::total_cmp)
}

pub(crate) fn run_sync(e: &mut Engine) -> Result<()> {
    let n = e.sc.num_satellites() as u32;
    let ps = e.sc.ps;
    let windows: Vec<Vec<Interval>> = (0..n).map(|s| e.sc.ps_intervals(s)).collect();
    let class = e.link_class(NodeId::Sat(0), ps);
    let nominal = e.dm.nominal_transfer_s(class);
    let compute = e.dm.compute_s;
    let participation = e.sc.config.strategy.sync.participation;
    let round_bound = e.sc.config.strategy.sync.round_bound_s;
    let horizon = e.horizon();

    let mut t = 0.0;
    loop {
        let sched = match schedule_sync_round(
            t,
            &windows,
            nominal,
            compute,
            nominal,
            participation,
            round_bound,
        ) {
            Ok(s) => s,
            Err(Error::HorizonExhausted { .. }) => {
                e.trace(
                    t,
                    "round-exhausted",
                    "ps",
                    "reason=no-unit-can-cycle".into(),
                );
                break;
            }
            Err(err) => return Err(err),
        };

        if sched.scheduled.is_empty() {
            // Nobody returns promptly from here; try again at the next
            // window opening.
            match next_opening(&windows, t) {
                Some(next) => {
                    e.trace(
                        t,
                        "round-skip",
                        "ps",
                        format!("reason=no-prompt-unit next={next}"),
                    );
                    t = next;
                    continue;
                }
                None => {
                    e.trace(
                        t,
                        "round-exhausted",
                        "ps",
                        "reason=no-window-opens-again".into(),
                    );
                    break;
                }
            }
        }

        let version = e.global.version;
        let base = e.global.params.clone();
        e.trace(
            t,
            "round-start",
            "ps",
            format!(
                "version={} scheduled={}",
                version + 1,
                sched.scheduled.len()
            ),
        );

        let mut updates: Vec<ClientUpdate> = Vec::new();
        let mut t_end = t;
        let mut incomplete = false;
        for &unit in &sched.scheduled {
            let sat = NodeId::Sat(unit as u32);
            let Some(down) = e.plan_transfer(ps, sat, t, "download", false) else {
                incomplete = true;
                continue;
            };
            let ready = down.done_s + compute;
            if ready > horizon {
                e.trace(
                    down.done_s,
                    "drop",
                    format!("sat{unit}"),
                    format!("reason=compute-exceeds-horizon ready={ready}"),
                );
                incomplete = true;
                continue;
            }
            let update = e.local_update(unit as u32, &base, version, version)?;
            e.trace(
                ready,
                "compute-done",
                format!("sat{unit}"),
                format!("base_version={version}"),
            );
            let Some(up) = e.plan_transfer(sat, ps, ready, "upload", true) else {
                incomplete = true;
                continue;
            };
            t_end = t_end.max(up.done_s);
            updates.push(update);
        }

        if incomplete && participation == SyncParticipation::Full {
            // Full participation cannot aggregate a partial set: the
            // received copies are discarded and the strategy stops.
            e.trace(
                t_end,
                "round-incomplete",
                "ps",
                format!("version={} received={}", version + 1, updates.len()),
            );
            break;
        }
        if updates.is_empty() {
            match next_opening(&windows, t) {
                Some(next) => {
                    e.trace(
                        t,
                        "round-skip",
                        "ps",
                        format!("reason=no-update-returned next={next}"),
                    );
                    t = next;
                    continue;
                }
                None => {
                    e.trace(
                        t,
                        "round-exhausted",
                        "ps",
                        "reason=no-window-opens-again".into(),
                    );
                    break;
                }
            }
        }

        let in_degree = updates.len() as u32;
        let staleness = vec![0u64; updates.len()];
        let new = fedavg_aggregate(&e.global, &updates)?;
        e.commit_global(t_end, new, in_degree, &staleness)?;
        if t_end <= t {
            // Zero-length rounds (all delays zero) would loop forever at
            // the same instant; one committed round is enough evidence.
            e.trace(
                t_end,
                "round-stall",
                "ps",
                "reason=zero-length-round".into(),
            );
            break;
        }
        t = t_end;
    }
    Ok(())
}
