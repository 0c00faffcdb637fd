//! In-network aggregation on intra-orbit rings: pick a sink satellite that
//! will be well-placed when the updates are done, route every member's update
//! towards it along the ring, and merge updates at every hop so each link
//! carries exactly one model-sized message.

use serde::{Deserialize, Serialize};

use crate::contact::Interval;
use crate::error::{Error, Result};
use crate::fl::{ClientUpdate, ModelVector};

/// Routing tree on a ring: every node forwards towards the sink along its
/// shorter arc.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub sink_pos: usize,
    /// Parent ring position per node; `None` for the sink itself.
    pub parent: Vec<Option<usize>>,
    /// Hop count to the sink per node.
    pub hops: Vec<usize>,
}

impl RoutePlan {
    /// Number of tree edges; every non-sink node sends exactly once.
    pub fn transmissions(&self) -> usize {
        self.parent.iter().flatten().count()
    }

    /// Children of a node, ascending by position.
    pub fn children_of(&self, pos: usize) -> Vec<usize> {
        (0..self.parent.len())
            .filter(|&m| self.parent[m] == Some(pos))
            .collect()
    }
}

/// Shortest-path tree from every ring position towards `sink_pos`. A node at
/// exactly half the ring (even sizes) could go either way; it attaches
/// through its lower-indexed neighbor.
pub fn build_tree(ring_size: usize, sink_pos: usize) -> RoutePlan {
    assert!(ring_size >= 1 && sink_pos < ring_size);
    let n = ring_size;
    let mut parent = vec![None; n];
    let mut hops = vec![0; n];
    for m in 0..n {
        if m == sink_pos {
            continue;
        }
        let fwd = (sink_pos + n - m) % n; // hops walking +1
        let back = n - fwd; // hops walking -1
        hops[m] = fwd.min(back);
        let next = (m + 1) % n;
        let prev = (m + n - 1) % n;
        parent[m] = Some(if fwd < back {
            next
        } else if back < fwd {
            prev
        } else {
            // Antipodal tie: lower-indexed neighbor.
            next.min(prev)
        });
    }
    RoutePlan {
        sink_pos,
        parent,
        hops,
    }
}

/// A partially aggregated update travelling down the tree: the sample-count
/// weighted sum of deltas, the total weight, and exactly which clients have
/// been folded in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialAggregate {
    pub weighted_sum: Vec<f64>,
    pub weight_sum: u64,
    /// Covered client ids, ascending.
    pub covered: Vec<u32>,
    pub base_version: u64,
}

impl PartialAggregate {
    pub fn from_update(u: &ClientUpdate) -> Self {
        Self {
            weighted_sum: u.delta.iter().map(|d| d * u.sample_count as f64).collect(),
            weight_sum: u.sample_count,
            covered: vec![u.client],
            base_version: u.base_version,
        }
    }
}

/// Merges a node's own update with the partial aggregates received from its
/// children into the single message it forwards. Catching a client covered
/// twice here is what makes in-network averaging trustworthy.
pub fn aggregate_and_forward(
    own: Option<&ClientUpdate>,
    received: &[PartialAggregate],
) -> Result<PartialAggregate> {
    let mut parts: Vec<PartialAggregate> = Vec::with_capacity(received.len() + 1);
    if let Some(u) = own {
        parts.push(PartialAggregate::from_update(u));
    }
    parts.extend(received.iter().cloned());
    let Some(first) = parts.first() else {
        return Err(Error::Config("aggregate: nothing to forward".into()));
    };

    let mut out = PartialAggregate {
        weighted_sum: vec![0.0; first.weighted_sum.len()],
        weight_sum: 0,
        covered: Vec::new(),
        base_version: first.base_version,
    };
    for p in &parts {
        if p.base_version != out.base_version {
            return Err(Error::Synchronization {
                client: format!("partial covering {:?}", p.covered),
                expected: out.base_version,
                got: p.base_version,
            });
        }
        for c in &p.covered {
            if out.covered.contains(c) {
                return Err(Error::DoubleCounting {
                    client: format!("client {c}"),
                });
            }
        }
        out.covered.extend_from_slice(&p.covered);
        out.weight_sum += p.weight_sum;
        for (acc, v) in out.weighted_sum.iter_mut().zip(&p.weighted_sum) {
            *acc += v;
        }
    }
    out.covered.sort_unstable();
    Ok(out)
}

/// Applies the collected cluster aggregates at the parameter server:
/// `new = base + sum(weighted_sum) / sum(weight_sum)`, one version step.
/// The aggregates must cover disjoint clients and share the round's base
/// version.
pub fn deliver_to_ps(base: &ModelVector, partials: &[PartialAggregate]) -> Result<ModelVector> {
    if partials.is_empty() {
        return Err(Error::Config("deliver: no aggregates to apply".into()));
    }
    let mut seen: Vec<u32> = Vec::new();
    let mut weight = 0u64;
    let mut sum = vec![0.0; base.params.len()];
    for p in partials {
        if p.base_version != base.version {
            return Err(Error::Synchronization {
                client: format!("aggregate covering {:?}", p.covered),
                expected: base.version,
                got: p.base_version,
            });
        }
        for c in &p.covered {
            if seen.contains(c) {
                return Err(Error::DoubleCounting {
                    client: format!("client {c}"),
                });
            }
            seen.push(*c);
        }
        weight += p.weight_sum;
        for (acc, v) in sum.iter_mut().zip(&p.weighted_sum) {
            *acc += v;
        }
    }
    if weight == 0 {
        return Err(Error::Config(
            "deliver: aggregates carry zero weight".into(),
        ));
    }
    let params = base
        .params
        .iter()
        .zip(&sum)
        .map(|(p, s)| p + s / weight as f64)
        .collect();
    Ok(ModelVector {
        params,
        version: base.version + 1,
    })
}

/// When the last update reaches `sink_pos`, assuming every node forwards as
/// soon as its own update and all child aggregates are in, with a fixed
/// per-hop transfer time (ring spacing is rigid, so hop time is constant).
pub fn completion_at_sink(ready_s: &[f64], sink_pos: usize, hop_s: f64) -> f64 {
    let n = ready_s.len();
    let plan = build_tree(n, sink_pos);
    // Process farthest-first so every child's departure is known.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| plan.hops[b].cmp(&plan.hops[a]).then(a.cmp(&b)));
    let mut arrival_bound = vec![0.0_f64; n]; // latest child aggregate arrival
    let mut done = vec![0.0_f64; n];
    for &m in &order {
        done[m] = ready_s[m].max(arrival_bound[m]);
        if let Some(p) = plan.parent[m] {
            arrival_bound[p] = arrival_bound[p].max(done[m] + hop_s);
        }
    }
    done[sink_pos]
}

/// Sink choice for one cluster round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkChoice {
    pub sink_pos: usize,
    /// Predicted time the full cluster aggregate is assembled at the sink.
    pub ready_s: f64,
    /// Set when no candidate is visible through its assembly time and the
    /// aggregate will be held at the sink for a later window.
    pub fallback: bool,
}

/// Picks the member to collect at: the candidate with the earliest predicted
/// assembly time among those the parameter server can see over
/// `[ready, ready + margin]`; position breaks ties. When nobody qualifies the
/// aggregate must wait at some sink, so the choice minimizes the waiting
/// delivery start instead and is flagged.
pub fn select_sink(
    ready_s: &[f64],
    hop_s: f64,
    ps_windows: &[Vec<Interval>],
    margin_s: f64,
) -> SinkChoice {
    assert_eq!(ready_s.len(), ps_windows.len());
    let n = ready_s.len();
    let mut best: Option<SinkChoice> = None;
    let mut best_wait: Option<(f64, usize, f64)> = None; // (delivery start, pos, ready)
    for (pos, windows) in ps_windows.iter().enumerate() {
        let t_star = completion_at_sink(ready_s, pos, hop_s);
        let covered = windows
            .iter()
            .any(|w| w.start_s <= t_star && w.end_s >= t_star + margin_s);
        if covered {
            let better = match &best {
                Some(b) => t_star < b.ready_s,
                None => true,
            };
            if better {
                best = Some(SinkChoice {
                    sink_pos: pos,
                    ready_s: t_star,
                    fallback: false,
                });
            }
        } else if best.is_none() {
            // Earliest moment a delivery could start if we waited here.
            if let Some(w) = windows.iter().find(|w| w.end_s > t_star) {
                let start = t_star.max(w.start_s);
                let better = match best_wait {
                    Some((s, _, _)) => start < s,
                    None => true,
                };
                if better {
                    best_wait = Some((start, pos, t_star));
                }
            }
        }
    }
    if let Some(choice) = best {
        return choice;
    }
    if let Some((_, pos, ready)) = best_wait {
        return SinkChoice {
            sink_pos: pos,
            ready_s: ready,
            fallback: true,
        };
    }
    // Nothing is ever visible again; hold at the position that finishes first.
    let mut pos = 0;
    let mut ready = f64::INFINITY;
    for p in 0..n {
        let t = completion_at_sink(ready_s, p, hop_s);
        if t < ready {
            ready = t;
            pos = p;
        }
    }
    SinkChoice {
        sink_pos: pos,
        ready_s: ready,
        fallback: true,
    }
}

/// Transmission count if every update were forwarded to the sink separately
/// (no in-network merging), walking each hop, for comparison against the
/// aggregating tree's `ring size - 1`.
pub fn unicast_transmissions(ring_size: usize, sink_pos: usize) -> usize {
    let plan = build_tree(ring_size, sink_pos);
    let mut total = 0;
    for m in 0..ring_size {
        let mut at = m;
        while let Some(p) = plan.parent[at] {
            total += 1;
            at = p;
        }
    }
    total
}
