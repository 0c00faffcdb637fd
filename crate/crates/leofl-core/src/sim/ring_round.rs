//! Ring-assisted rounds: per cluster, the model enters at one member and
//! floods the ring, every member trains, the updates fold along a two-arm
//! tree into a chosen sink, and the sink alone uploads to the parameter
//! server. A unicast baseline forwards every update hop by hop instead of
//! merging in-network.

use super::Engine;
use crate::config::{MissingClusterPolicy, RingMode};
use crate::contact::{Cluster, Interval, NodeId};
use crate::error::Result;
use crate::fl::{fedavg_aggregate, ClientUpdate};
use crate::ring::{
    aggregate_and_forward, build_tree, completion_at_sink, deliver_to_ps, select_sink,
    PartialAggregate, RoutePlan,
};

/// What one cluster delivered this round, with its arrival time at the
/// server.
enum Contribution {
    Aggregate(PartialAggregate),
    Individual(Vec<ClientUpdate>),
}

/// Folding order: farthest from the sink first, position breaking ties, so
/// every child is complete before its parent folds.
fn fold_order(plan: &RoutePlan) -> Vec<usize> {
    let mut order: Vec<usize> = (0..plan.parent.len()).collect();
    order.sort_by(|&a, &b| plan.hops[b].cmp(&plan.hops[a]).then(a.cmp(&b)));
    order
}

/// Per-node send-completion times of the aggregation fold: a node forwards
/// once its own update and all child partials are in hand.
fn fold_send_times(plan: &RoutePlan, ready: &[f64], hop_s: f64) -> Vec<f64> {
    let mut send = ready.to_vec();
    for &pos in &fold_order(plan) {
        if let Some(p) = plan.parent[pos] {
            let arrive = send[pos] + hop_s;
            if arrive > send[p] {
                send[p] = arrive;
            }
        }
    }
    send
}

pub(crate) fn run_isl(e: &mut Engine) -> Result<()> {
    let clusters = e.sc.clusters.clone();
    let ring_mode = e.sc.config.strategy.cluster.ring_mode;
    let missing_policy = e.sc.config.strategy.cluster.missing_policy;
    let missing_timeout = e.sc.config.strategy.cluster.missing_timeout_s;
    let ps_intervals: Vec<Vec<Interval>> = (0..e.sc.num_satellites() as u32)
        .map(|s| e.sc.ps_intervals(s))
        .collect();

    let next_opening = |t: f64| -> Option<f64> {
        ps_intervals
            .iter()
            .flatten()
            .map(|w| w.start_s)
            .filter(|&s| s > t)
            .min_by(f64::total_cmp)
    };

    let mut t = 0.0;
    loop {
        let version = e.global.version;
        let base = e.global.params.clone();
        e.trace(
            t,
            "round-start",
            "ps",
            format!("version={} clusters={}", version + 1, clusters.len()),
        );

        let mut results: Vec<(u32, f64, Contribution)> = Vec::new();
        let mut skipped = 0usize;
        for (ci, cluster) in clusters.iter().enumerate() {
            match run_cluster(e, ci, cluster, t, version, &base, &ps_intervals)? {
                Some((arrive, c)) => results.push((cluster.id, arrive, c)),
                None => skipped += 1,
            }
        }

        if results.is_empty() {
            match next_opening(t) {
                Some(next) => {
                    e.trace(
                        t,
                        "round-skip",
                        "ps",
                        format!("reason=no-cluster-delivered next={next}"),
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

        if skipped > 0 && missing_policy == MissingClusterPolicy::Wait {
            // Waiting on a cluster that can never deliver: the delivered
            // copies are discarded and the strategy stops.
            for (id, arrive, _) in &results {
                e.trace(
                    *arrive,
                    "drop",
                    format!("cluster{id}"),
                    "reason=round-incomplete".into(),
                );
            }
            e.trace(
                t,
                "round-incomplete",
                "ps",
                format!(
                    "version={} delivered={} missing={skipped}",
                    version + 1,
                    results.len()
                ),
            );
            break;
        }

        let included: Vec<&(u32, f64, Contribution)> = match missing_policy {
            MissingClusterPolicy::Wait => results.iter().collect(),
            MissingClusterPolicy::ProceedWithout => {
                let earliest = results
                    .iter()
                    .map(|(_, a, _)| *a)
                    .min_by(f64::total_cmp)
                    .expect("results is non-empty");
                let deadline = earliest + missing_timeout;
                for (id, arrive, _) in &results {
                    if *arrive > deadline {
                        e.trace(
                            *arrive,
                            "drop",
                            format!("cluster{id}"),
                            format!("reason=missed-deadline deadline={deadline}"),
                        );
                    }
                }
                results.iter().filter(|(_, a, _)| *a <= deadline).collect()
            }
        };

        let t_end = included
            .iter()
            .map(|(_, a, _)| *a)
            .max_by(f64::total_cmp)
            .expect("included is non-empty");
        let (new, in_degree) = match ring_mode {
            RingMode::Aggregate => {
                let parts: Vec<PartialAggregate> = included
                    .iter()
                    .filter_map(|(_, _, c)| match c {
                        Contribution::Aggregate(p) => Some(p.clone()),
                        Contribution::Individual(_) => None,
                    })
                    .collect();
                let degree = parts.len() as u32;
                (deliver_to_ps(&e.global, &parts)?, degree)
            }
            RingMode::Unicast => {
                let singles: Vec<ClientUpdate> = included
                    .iter()
                    .flat_map(|(_, _, c)| match c {
                        Contribution::Individual(u) => u.clone(),
                        Contribution::Aggregate(_) => Vec::new(),
                    })
                    .collect();
                let degree = singles.len() as u32;
                (fedavg_aggregate(&e.global, &singles)?, degree)
            }
        };
        let staleness = vec![0u64; in_degree as usize];
        e.commit_global(t_end, new, in_degree, &staleness)?;
        if t_end <= t {
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

/// Runs one cluster's part of a round starting at `t`. The whole pipeline is
/// quoted first; if nothing could reach the server before the horizon the
/// cluster is skipped without any booked traffic. Returns the arrival time
/// at the server and the delivered contribution.
fn run_cluster(
    e: &mut Engine,
    ci: usize,
    cluster: &Cluster,
    t: f64,
    version: u64,
    base: &[f64],
    ps_intervals: &[Vec<Interval>],
) -> Result<Option<(f64, Contribution)>> {
    let ps = e.sc.ps;
    let n = cluster.members.len();
    let hop = e.ring_hop_s(ci);
    let compute = e.dm.compute_s;
    let horizon = e.horizon();
    let margin = e.sc.config.strategy.cluster.sink_margin_s;
    let prediction_factor = e.sc.config.strategy.cluster.compute_prediction_factor;
    let ring_mode = e.sc.config.strategy.cluster.ring_mode;
    let label = format!("cluster{}", cluster.id);

    // Entry member: whoever can finish downloading the model first.
    let mut entry: Option<(usize, crate::sim::Transfer)> = None;
    for (pos, &m) in cluster.members.iter().enumerate() {
        if let Some(tr) = e.quote_transfer(ps, NodeId::Sat(m), t) {
            let better = match &entry {
                Some((_, best)) => tr.done_s < best.done_s,
                None => true,
            };
            if better {
                entry = Some((pos, tr));
            }
        }
    }
    let Some((entry_pos, entry_tr)) = entry else {
        e.trace(t, "cluster-skip", label, "reason=no-entry-window".into());
        return Ok(None);
    };

    // Quoted timeline: flood from the entry, local compute, fold to a sink.
    let flood = build_tree(n, entry_pos);
    let arrival: Vec<f64> = (0..n)
        .map(|p| entry_tr.done_s + flood.hops[p] as f64 * hop)
        .collect();
    let ready: Vec<f64> = arrival.iter().map(|a| a + compute).collect();
    let predicted: Vec<f64> = arrival
        .iter()
        .map(|a| a + compute * prediction_factor)
        .collect();
    let windows: Vec<Vec<Interval>> = cluster
        .members
        .iter()
        .map(|&m| ps_intervals[m as usize].clone())
        .collect();
    let choice = select_sink(&predicted, hop, &windows, margin);
    let sink_pos = choice.sink_pos;
    let sink_sat = NodeId::Sat(cluster.members[sink_pos]);
    let agg = build_tree(n, sink_pos);
    let send = fold_send_times(&agg, &ready, hop);
    let t_star = send[sink_pos];
    debug_assert_eq!(t_star, completion_at_sink(&ready, sink_pos, hop));

    // Deliverability check before anything is booked.
    let deliverable = match ring_mode {
        RingMode::Aggregate => e.quote_transfer(sink_sat, ps, t_star).is_some(),
        RingMode::Unicast => (0..n).any(|pos| {
            let at_sink = ready[pos] + agg.hops[pos] as f64 * hop;
            at_sink <= horizon && e.quote_transfer(sink_sat, ps, at_sink).is_some()
        }),
    };
    if !deliverable {
        e.trace(
            t,
            "cluster-skip",
            label,
            "reason=no-delivery-before-horizon".into(),
        );
        return Ok(None);
    }

    // Book the pipeline. Model distribution: server to entry, then flood.
    let booked = e
        .plan_transfer(
            ps,
            NodeId::Sat(cluster.members[entry_pos]),
            t,
            "download",
            false,
        )
        .expect("booking repeats the successful quote");
    debug_assert_eq!(booked, entry_tr);
    for &pos in &fold_order(&flood) {
        if let Some(p) = flood.parent[pos] {
            // Flood edges run opposite to the tree: parent hands to child.
            e.record_ring_transfer(
                cluster.members[p],
                cluster.members[pos],
                arrival[pos],
                "flood",
            );
        }
    }

    // Local training on the shared snapshot.
    let mut updates: Vec<ClientUpdate> = Vec::with_capacity(n);
    for (pos, &m) in cluster.members.iter().enumerate() {
        let update = e.local_update(m, base, version, version)?;
        e.trace(
            ready[pos],
            "compute-done",
            format!("sat{m}"),
            format!("base_version={version}"),
        );
        updates.push(update);
    }

    e.trace(
        t_star,
        "sink-select",
        label,
        format!(
            "sink=sat{} predicted={} actual={t_star} fallback={}",
            cluster.members[sink_pos], choice.ready_s, choice.fallback
        ),
    );

    match ring_mode {
        RingMode::Aggregate => {
            // Fold along the tree, recording each forwarded partial.
            let mut folded: Vec<Option<PartialAggregate>> = vec![None; n];
            for &pos in &fold_order(&agg) {
                let received: Vec<PartialAggregate> = agg
                    .children_of(pos)
                    .into_iter()
                    .map(|c| folded[c].clone().expect("children fold before parents"))
                    .collect();
                folded[pos] = Some(aggregate_and_forward(Some(&updates[pos]), &received)?);
                if let Some(p) = agg.parent[pos] {
                    e.record_ring_transfer(
                        cluster.members[pos],
                        cluster.members[p],
                        send[pos] + hop,
                        "aggregate",
                    );
                }
            }
            let part = folded[sink_pos].clone().expect("sink folds last");
            let up = e
                .plan_transfer(sink_sat, ps, t_star, "aggregate-upload", true)
                .expect("deliverability was quoted");
            Ok(Some((up.done_s, Contribution::Aggregate(part))))
        }
        RingMode::Unicast => {
            // Every update walks to the sink on its own and is relayed to
            // the server individually.
            let mut delivered: Vec<(ClientUpdate, f64)> = Vec::new();
            for pos in 0..n {
                let mut cur = pos;
                let mut at = ready[pos];
                let mut lost = false;
                while let Some(p) = agg.parent[cur] {
                    at += hop;
                    if at > horizon {
                        e.trace(
                            horizon,
                            "drop",
                            format!("sat{}", cluster.members[cur]),
                            format!("reason=horizon stage=relay at={at}"),
                        );
                        lost = true;
                        break;
                    }
                    e.record_ring_transfer(cluster.members[cur], cluster.members[p], at, "relay");
                    cur = p;
                }
                if lost {
                    continue;
                }
                if let Some(up) = e.plan_transfer(sink_sat, ps, at, "relay-upload", true) {
                    delivered.push((updates[pos].clone(), up.done_s));
                }
            }
            if delivered.is_empty() {
                e.trace(
                    t,
                    "cluster-skip",
                    format!("cluster{}", cluster.id),
                    "reason=no-delivery-before-horizon".into(),
                );
                return Ok(None);
            }
            let arrive = delivered
                .iter()
                .map(|(_, a)| *a)
                .max_by(f64::total_cmp)
                .expect("delivered is non-empty");
            let singles = delivered.into_iter().map(|(u, _)| u).collect();
            Ok(Some((arrive, Contribution::Individual(singles))))
        }
    }
}
