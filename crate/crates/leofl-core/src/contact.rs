//! Temporal contact graph: which node pairs can communicate, and when.
//!
//! Windows are found by sampling the line-of-sight test on a fixed grid and
//! refining every boundary by bisection. Connectivity shorter than the sample
//! step can be missed if it never straddles a grid point; that is an accepted
//! limitation of the sampling approach.
//!
//! Satellites of one orbital plane form a static ring (the intra-orbit ISLs
//! are always on and are not part of the windowed graph); a diagnostic flags
//! rings whose neighbors lack geometric line of sight.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::consts::EARTH_RADIUS_KM;
use crate::error::{Error, Result};
use crate::orbit::{propagate, visible, Constellation, EciPosition, LinkGeometry};

/// Width to which window boundaries are narrowed by bisection, seconds.
/// Tight enough that a refined boundary is correct to within 0.1 s.
const REFINE_WIDTH_S: f64 = 0.05;

/// Node of the contact graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    /// Satellite by constellation index (the parameter server satellite, when
    /// present, gets the first index past the constellation).
    Sat(u32),
    /// Ground station by list index.
    Ground(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Sat(i) => write!(f, "sat{i}"),
            NodeId::Ground(i) => write!(f, "gs{i}"),
        }
    }
}

/// Half-open time span `[start_s, end_s)` during which a pair is connected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactWindow {
    pub a: NodeId,
    pub b: NodeId,
    pub start_s: f64,
    pub end_s: f64,
}

impl ContactWindow {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s < self.end_s
    }
}

/// Plain time interval, used for merged (per-cluster) connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A windowed pair plus the geometry rule it is tested with. For ground links
/// `a` must be the ground station.
#[derive(Debug, Clone, Copy)]
pub struct PairSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub geometry: LinkGeometry,
}

/// Static intra-orbit ring: the satellites of one plane in ring order.
/// Cluster ids are plane indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: u32,
    pub members: Vec<u32>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Ring neighbors of the member at ring position `pos`.
    pub fn neighbors(&self, pos: usize) -> (u32, u32) {
        let n = self.members.len();
        (self.members[(pos + n - 1) % n], self.members[(pos + 1) % n])
    }

    /// Hop count between two ring positions along the shorter arc.
    pub fn ring_distance(&self, from_pos: usize, to_pos: usize) -> usize {
        let n = self.members.len();
        let fwd = (to_pos + n - from_pos) % n;
        fwd.min(n - fwd)
    }
}

/// All contact windows of a scenario over a fixed horizon, pair-major and
/// time-ascending, with an index for per-pair lookup.
#[derive(Debug, Clone)]
pub struct TemporalContactGraph {
    pub windows: Vec<ContactWindow>,
    pub horizon_s: f64,
    pub step_s: f64,
    index: BTreeMap<(NodeId, NodeId), (usize, usize)>,
}

impl TemporalContactGraph {
    pub fn new(mut windows: Vec<ContactWindow>, horizon_s: f64, step_s: f64) -> Self {
        for w in &mut windows {
            let (a, b) = orient(w.a, w.b);
            (w.a, w.b) = (a, b);
        }
        windows.sort_by(|p, q| {
            (p.a, p.b)
                .cmp(&(q.a, q.b))
                .then(p.start_s.total_cmp(&q.start_s))
        });
        let mut index = BTreeMap::new();
        let mut run_start = 0;
        for i in 0..windows.len() {
            let here = (windows[i].a, windows[i].b);
            if i + 1 >= windows.len() || (windows[i + 1].a, windows[i + 1].b) != here {
                index.insert(here, (run_start, i + 1));
                run_start = i + 1;
            }
        }
        Self {
            windows,
            horizon_s,
            step_s,
            index,
        }
    }

    /// Windows of one pair, time-ascending; endpoint order does not matter.
    pub fn pair_windows(&self, a: NodeId, b: NodeId) -> &[ContactWindow] {
        match self.index.get(&orient(a, b)) {
            Some(&(lo, hi)) => &self.windows[lo..hi],
            None => &[],
        }
    }

    /// Earliest window of the pair still relevant at time `t`: the first
    /// window whose end lies after `t` (the current window when `t` is inside
    /// one). `None` once the pair has no connectivity left before the horizon.
    pub fn next_window_after(&self, a: NodeId, b: NodeId, t_s: f64) -> Option<&ContactWindow> {
        self.pair_windows(a, b).iter().find(|w| w.end_s > t_s)
    }
}

/// Computes every pair's contact windows over `[0, horizon_s]`.
///
/// Visibility is sampled every `step_s` seconds; each transition is narrowed
/// by bisection and the boundary is placed on the visible side, so visibility
/// holds at both refined endpoints. A horizon shorter than one step is
/// degenerate and yields no windows.
// The step bound is written as `!(x > 0)` so a NaN step is rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn compute_windows<F>(
    pairs: &[PairSpec],
    position: F,
    horizon_s: f64,
    step_s: f64,
) -> Result<Vec<ContactWindow>>
where
    F: Fn(NodeId, f64) -> EciPosition,
{
    if !(step_s > 0.0) || !horizon_s.is_finite() || horizon_s < 0.0 {
        return Err(Error::Config(format!(
            "contact sampling needs positive step and horizon (step {step_s}, horizon {horizon_s})"
        )));
    }
    if horizon_s < step_s {
        return Ok(Vec::new());
    }

    let mut out = Vec::new();
    for pair in pairs {
        let vis_at = |t: f64| {
            let pa = position(pair.a, t);
            let pb = position(pair.b, t);
            visible(&pa, &pb, pair.geometry)
        };

        // Sample grid: multiples of step, plus the horizon itself.
        let mut grid: Vec<f64> = Vec::new();
        let mut k = 0u64;
        loop {
            let t = k as f64 * step_s;
            if t > horizon_s {
                break;
            }
            grid.push(t);
            k += 1;
        }
        if *grid.last().unwrap() < horizon_s {
            grid.push(horizon_s);
        }

        let mut open: Option<f64> = None;
        let mut prev_t = grid[0];
        let mut prev_vis = vis_at(prev_t);
        if prev_vis {
            open = Some(0.0);
        }
        for &t in &grid[1..] {
            let now_vis = vis_at(t);
            if now_vis && !prev_vis {
                open = Some(refine_rising(&vis_at, prev_t, t));
            } else if !now_vis && prev_vis {
                let end = refine_falling(&vis_at, prev_t, t);
                push_window(&mut out, pair, open.take(), end);
            }
            prev_t = t;
            prev_vis = now_vis;
        }
        if prev_vis {
            push_window(&mut out, pair, open.take(), horizon_s);
        }
    }

    out.sort_by(|p, q| {
        (p.a, p.b)
            .cmp(&(q.a, q.b))
            .then(p.start_s.total_cmp(&q.start_s))
    });
    Ok(out)
}

fn push_window(out: &mut Vec<ContactWindow>, pair: &PairSpec, start: Option<f64>, end: f64) {
    if let Some(start) = start {
        if end > start {
            out.push(ContactWindow {
                a: pair.a,
                b: pair.b,
                start_s: start,
                end_s: end,
            });
        }
    }
}

/// Bisects an invisible-to-visible transition; returns a visible instant
/// within `REFINE_WIDTH_S` of the true boundary.
fn refine_rising<F: Fn(f64) -> bool>(vis: &F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > REFINE_WIDTH_S {
        let mid = 0.5 * (lo + hi);
        if vis(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Bisects a visible-to-invisible transition; returns a visible instant
/// within `REFINE_WIDTH_S` of the true boundary.
fn refine_falling<F: Fn(f64) -> bool>(vis: &F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > REFINE_WIDTH_S {
        let mid = 0.5 * (lo + hi);
        if vis(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Union of the cluster members' windows towards `ps`, merged into disjoint
/// intervals: when any member can reach the parameter server, the ring as a
/// whole can.
pub fn cluster_windows(
    graph: &TemporalContactGraph,
    cluster: &Cluster,
    ps: NodeId,
    member_node: impl Fn(u32) -> NodeId,
) -> Vec<Interval> {
    let mut spans: Vec<Interval> = Vec::new();
    for &m in &cluster.members {
        let node = member_node(m);
        let (a, b) = orient(node, ps);
        for w in graph.pair_windows(a, b) {
            spans.push(Interval {
                start_s: w.start_s,
                end_s: w.end_s,
            });
        }
    }
    merge_intervals(&mut spans);
    spans
}

/// Orders a pair the way the graph stores it: ground stations always sit in
/// the first slot (they anchor the elevation test), otherwise ascending.
pub fn orient(x: NodeId, y: NodeId) -> (NodeId, NodeId) {
    match (x, y) {
        (NodeId::Ground(_), _) => (x, y),
        (_, NodeId::Ground(_)) => (y, x),
        _ => (x.min(y), x.max(y)),
    }
}

fn merge_intervals(spans: &mut Vec<Interval>) {
    spans.sort_by(|p, q| p.start_s.total_cmp(&q.start_s));
    let mut merged: Vec<Interval> = Vec::with_capacity(spans.len());
    for s in spans.iter() {
        match merged.last_mut() {
            Some(last) if s.start_s <= last.end_s => {
                last.end_s = last.end_s.max(s.end_s);
            }
            _ => merged.push(*s),
        }
    }
    *spans = merged;
}

/// Connectivity class of a scenario towards its parameter server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioClass {
    /// Long offline stretches; synchronous rounds straddle hours.
    Sporadic,
    /// Every cluster is almost always reachable.
    NearPersistent,
    /// Scenario declares inter-cluster ISLs; reported as its own class
    /// (no routing strategy across clusters is implemented).
    InterCluster,
}

impl fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioClass::Sporadic => write!(f, "sporadic"),
            ScenarioClass::NearPersistent => write!(f, "near-persistent"),
            ScenarioClass::InterCluster => write!(f, "inter-cluster"),
        }
    }
}

/// Per-cluster connectivity statistics towards the parameter server.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster_id: u32,
    /// Fraction of the horizon with at least one member connected.
    pub duty_cycle: f64,
    /// Longest stretch without connectivity, horizon edges included.
    pub max_gap_s: f64,
    pub window_count: usize,
}

/// Classification thresholds; a scenario is near-persistent only when every
/// cluster passes both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyThresholds {
    pub min_duty_cycle: f64,
    pub max_gap_s: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            min_duty_cycle: 0.90,
            max_gap_s: 600.0,
        }
    }
}

/// Classifier output: the label plus the evidence it was derived from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub class: ScenarioClass,
    pub thresholds: ClassifyThresholds,
    pub clusters: Vec<ClusterStats>,
    pub notes: Vec<String>,
}

/// Labels the scenario from per-cluster connectivity statistics.
///
/// Declared inter-cluster links take reporting precedence; otherwise the
/// scenario is near-persistent exactly when every cluster meets both
/// thresholds, and sporadic in all remaining cases. Horizons under a day see
/// too little of the orbital geometry to be trustworthy, which is noted.
pub fn classify(
    graph: &TemporalContactGraph,
    clusters: &[Cluster],
    ps: NodeId,
    thresholds: ClassifyThresholds,
    inter_cluster_links: bool,
    member_node: impl Fn(u32) -> NodeId,
) -> Result<ClassificationReport> {
    if clusters.is_empty() {
        return Err(Error::Config(
            "classification needs at least one cluster".into(),
        ));
    }
    let mut notes = Vec::new();
    if graph.horizon_s < 86_400.0 {
        notes.push(format!(
            "horizon {:.0} s is below one day; statistics may not cover the full geometry",
            graph.horizon_s
        ));
    }

    let mut stats = Vec::with_capacity(clusters.len());
    let mut all_pass = true;
    for cluster in clusters {
        let spans = cluster_windows(graph, cluster, ps, &member_node);
        let covered: f64 = spans.iter().map(Interval::duration_s).sum();
        let mut max_gap: f64 = 0.0;
        let mut cursor = 0.0;
        for s in &spans {
            max_gap = max_gap.max(s.start_s - cursor);
            cursor = s.end_s;
        }
        max_gap = max_gap.max(graph.horizon_s - cursor);
        let duty = covered / graph.horizon_s;
        if duty < thresholds.min_duty_cycle || max_gap > thresholds.max_gap_s {
            all_pass = false;
        }
        stats.push(ClusterStats {
            cluster_id: cluster.id,
            duty_cycle: duty,
            max_gap_s: max_gap,
            window_count: spans.len(),
        });
    }

    let class = if inter_cluster_links {
        notes.push(
            "inter-cluster ISLs declared: reported as its own class, no routing strategy is implemented"
                .into(),
        );
        ScenarioClass::InterCluster
    } else if all_pass {
        ScenarioClass::NearPersistent
    } else {
        ScenarioClass::Sporadic
    };
    Ok(ClassificationReport {
        class,
        thresholds,
        clusters: stats,
        notes,
    })
}

/// Checks every ring's adjacent pairs for geometric line of sight at the
/// epoch (in-plane spacing is constant, so one instant decides). Returns one
/// message per blocked ring; the ring ISLs stay on regardless.
pub fn ring_blockage_diagnostic(
    constellation: &Constellation,
    clusters: &[Cluster],
    grazing_altitude_km: f64,
    epoch_s: f64,
) -> Vec<String> {
    let mut notes = Vec::new();
    for cluster in clusters {
        if cluster.members.len() < 2 {
            continue;
        }
        let a = propagate(
            &constellation.satellites[cluster.members[0] as usize],
            epoch_s,
        );
        let b = propagate(
            &constellation.satellites[cluster.members[1] as usize],
            epoch_s,
        );
        if !visible(
            &a,
            &b,
            LinkGeometry::Space {
                grazing_altitude_km,
            },
        ) {
            let r = constellation.satellites[cluster.members[0] as usize].semi_major_axis_km;
            let n = cluster.members.len() as f64;
            let dip = r * (std::f64::consts::PI / n).cos() - EARTH_RADIUS_KM;
            notes.push(format!(
                "ring {}: adjacent members lack line of sight (chord dips {:.1} km below the visibility sphere); ring links kept static by design",
                cluster.id, -dip
            ));
        }
    }
    notes
}

/// Writes windows as RFC 4180 CSV with columns `node_a,node_b,start_s,end_s`.
pub fn write_windows_csv<W: std::io::Write>(windows: &[ContactWindow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_a", "node_b", "start_s", "end_s"])
        .map_err(csv_io)?;
    for win in windows {
        w.write_record([
            win.a.to_string(),
            win.b.to_string(),
            win.start_s.to_string(),
            win.end_s.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the connectivity Gantt export.
#[derive(Debug, Clone)]
pub struct GanttRow {
    pub label: String,
    pub kind: &'static str,
    pub intervals: Vec<Interval>,
}

/// Writes per-member and per-cluster connectivity as CSV with columns
/// `row,kind,intervals`; intervals are `start:end` pairs joined by `;`.
pub fn write_gantt_csv<W: std::io::Write>(rows: &[GanttRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "kind", "intervals"])
        .map_err(csv_io)?;
    for row in rows {
        let joined = row
            .intervals
            .iter()
            .map(|s| format!("{}:{}", s.start_s, s.end_s))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([row.label.as_str(), row.kind, joined.as_str()])
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{generate_walker, WalkerPattern, WalkerSpec};

    /// Two satellites on the same circular track, one fixed and one sweeping
    /// at 0.1 deg/s: line of sight exists while their central angle is below
    /// gamma_max = 2*acos(R_E / r), giving analytically known boundaries.
    fn sweeping_pair_position(node: NodeId, t: f64) -> EciPosition {
        let r = 6871.0;
        match node {
            NodeId::Sat(0) => EciPosition {
                x_km: r,
                y_km: 0.0,
                z_km: 0.0,
                t_s: t,
            },
            NodeId::Sat(_) => {
                let theta = (0.1 * t).to_radians();
                EciPosition {
                    x_km: r * theta.cos(),
                    y_km: r * theta.sin(),
                    z_km: 0.0,
                    t_s: t,
                }
            }
            NodeId::Ground(_) => unreachable!(),
        }
    }

    fn sweeping_pair() -> Vec<PairSpec> {
        vec![PairSpec {
            a: NodeId::Sat(0),
            b: NodeId::Sat(1),
            geometry: LinkGeometry::Space {
                grazing_altitude_km: 0.0,
            },
        }]
    }

    /// Largest central angle, degrees, at which two satellites at radius r
    /// still see each other over a sphere of radius R_E.
    fn max_visible_angle_deg(r: f64) -> f64 {
        2.0 * (EARTH_RADIUS_KM / r).acos().to_degrees()
    }

    #[test]
    fn windows_match_analytic_boundaries() {
        let gamma = max_visible_angle_deg(6871.0); // about 44.06 deg
        let horizon = 3600.0 * 2.0;
        let windows =
            compute_windows(&sweeping_pair(), sweeping_pair_position, horizon, 10.0).unwrap();
        // Visible while 0.1*t mod 360 is within [0, gamma] or [360-gamma, 360):
        // window 1 = [0, 10*gamma], window 2 = [3600 - 10*gamma, 3600 + 10*gamma],
        // window 3 = [7200 - 10*gamma, 7200].
        assert_eq!(windows.len(), 3);
        let b = 10.0 * gamma;
        let expect = [(0.0, b), (3600.0 - b, 3600.0 + b), (7200.0 - b, 7200.0)];
        for (w, (s, e)) in windows.iter().zip(expect) {
            assert!((w.start_s - s).abs() <= 0.1, "start {} vs {}", w.start_s, s);
            assert!((w.end_s - e).abs() <= 0.1, "end {} vs {}", w.end_s, e);
        }
    }

    #[test]
    fn refined_boundaries_sit_on_the_visible_side() {
        let windows =
            compute_windows(&sweeping_pair(), sweeping_pair_position, 7200.0, 10.0).unwrap();
        let vis = |t: f64| {
            let a = sweeping_pair_position(NodeId::Sat(0), t);
            let b = sweeping_pair_position(NodeId::Sat(1), t);
            visible(
                &a,
                &b,
                LinkGeometry::Space {
                    grazing_altitude_km: 0.0,
                },
            )
        };
        for w in &windows {
            if w.start_s > 0.0 {
                assert!(vis(w.start_s + 0.05));
                assert!(!vis(w.start_s - 0.05));
            }
            if w.end_s < 7200.0 {
                assert!(vis(w.end_s - 0.05));
                assert!(!vis(w.end_s + 0.05));
            }
        }
    }

    #[test]
    fn windows_agree_with_one_second_scan() {
        let refined =
            compute_windows(&sweeping_pair(), sweeping_pair_position, 7200.0, 10.0).unwrap();
        let scanned =
            compute_windows(&sweeping_pair(), sweeping_pair_position, 7200.0, 1.0).unwrap();
        assert_eq!(refined.len(), scanned.len());
        for (r, s) in refined.iter().zip(&scanned) {
            assert!((r.start_s - s.start_s).abs() <= 1.0);
            assert!((r.end_s - s.end_s).abs() <= 1.0);
        }
    }

    #[test]
    fn horizon_shorter_than_step_yields_nothing() {
        let windows = compute_windows(&sweeping_pair(), sweeping_pair_position, 5.0, 10.0).unwrap();
        assert!(windows.is_empty());
    }

    #[test]
    fn always_visible_pair_spans_the_whole_horizon() {
        let hold = |node: NodeId, t: f64| {
            // Two stations 45 degrees apart at 2000 km altitude: the line
            // between them clears the surface (closest approach
            // 8371*cos(22.5 deg) = 7733 km) at all times.
            let r = 8371.0;
            let half = std::f64::consts::FRAC_PI_8;
            match node {
                NodeId::Sat(0) => EciPosition {
                    x_km: r * half.cos(),
                    y_km: -r * half.sin(),
                    z_km: 0.0,
                    t_s: t,
                },
                _ => EciPosition {
                    x_km: r * half.cos(),
                    y_km: r * half.sin(),
                    z_km: 0.0,
                    t_s: t,
                },
            }
        };
        let pairs = vec![PairSpec {
            a: NodeId::Sat(0),
            b: NodeId::Sat(1),
            geometry: LinkGeometry::Space {
                grazing_altitude_km: 0.0,
            },
        }];
        let windows = compute_windows(&pairs, hold, 1000.0, 10.0).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].start_s, 0.0);
        assert_eq!(windows[0].end_s, 1000.0);
    }

    #[test]
    fn pair_lookup_and_ordering() {
        let mk = |a: u32, b: u32, s: f64| ContactWindow {
            a: NodeId::Sat(a),
            b: NodeId::Sat(b),
            start_s: s,
            end_s: s + 1.0,
        };
        // Deliberately shuffled input.
        let graph = TemporalContactGraph::new(
            vec![mk(1, 2, 50.0), mk(0, 1, 30.0), mk(1, 2, 5.0), mk(0, 1, 0.0)],
            100.0,
            10.0,
        );
        let starts: Vec<f64> = graph.windows.iter().map(|w| w.start_s).collect();
        assert_eq!(starts, vec![0.0, 30.0, 5.0, 50.0]);
        assert_eq!(graph.pair_windows(NodeId::Sat(0), NodeId::Sat(1)).len(), 2);
        assert_eq!(graph.pair_windows(NodeId::Sat(0), NodeId::Sat(2)).len(), 0);

        let next = graph
            .next_window_after(NodeId::Sat(1), NodeId::Sat(2), 6.0)
            .unwrap();
        assert_eq!(next.start_s, 50.0);
        let inside = graph
            .next_window_after(NodeId::Sat(1), NodeId::Sat(2), 5.5)
            .unwrap();
        assert_eq!(inside.start_s, 5.0);
        assert!(graph
            .next_window_after(NodeId::Sat(1), NodeId::Sat(2), 51.0)
            .is_none());
    }

    #[test]
    fn cluster_union_merges_member_windows() {
        let mk = |sat: u32, s: f64, e: f64| ContactWindow {
            a: NodeId::Sat(sat),
            b: NodeId::Ground(0),
            start_s: s,
            end_s: e,
        };
        let graph = TemporalContactGraph::new(
            vec![
                mk(0, 0.0, 10.0),
                mk(0, 40.0, 50.0),
                mk(1, 5.0, 20.0),
                mk(1, 50.0, 60.0),
            ],
            100.0,
            10.0,
        );
        let cluster = Cluster {
            id: 0,
            members: vec![0, 1],
        };
        let spans = cluster_windows(&graph, &cluster, NodeId::Ground(0), NodeId::Sat);
        assert_eq!(
            spans,
            vec![
                Interval {
                    start_s: 0.0,
                    end_s: 20.0
                },
                Interval {
                    start_s: 40.0,
                    end_s: 60.0
                }
            ]
        );
    }

    #[test]
    fn full_coverage_classifies_near_persistent() {
        let graph = TemporalContactGraph::new(
            vec![ContactWindow {
                a: NodeId::Sat(0),
                b: NodeId::Ground(0),
                start_s: 0.0,
                end_s: 86_400.0,
            }],
            86_400.0,
            10.0,
        );
        let clusters = vec![Cluster {
            id: 0,
            members: vec![0],
        }];
        let report = classify(
            &graph,
            &clusters,
            NodeId::Ground(0),
            ClassifyThresholds::default(),
            false,
            NodeId::Sat,
        )
        .unwrap();
        assert_eq!(report.class, ScenarioClass::NearPersistent);
        assert_eq!(report.clusters[0].duty_cycle, 1.0);
        assert_eq!(report.clusters[0].max_gap_s, 0.0);
    }

    #[test]
    fn disconnected_cluster_classifies_sporadic() {
        let graph = TemporalContactGraph::new(Vec::new(), 86_400.0, 10.0);
        let clusters = vec![Cluster {
            id: 0,
            members: vec![0],
        }];
        let report = classify(
            &graph,
            &clusters,
            NodeId::Ground(0),
            ClassifyThresholds::default(),
            false,
            NodeId::Sat,
        )
        .unwrap();
        assert_eq!(report.class, ScenarioClass::Sporadic);
        assert_eq!(report.clusters[0].duty_cycle, 0.0);
        assert_eq!(report.clusters[0].max_gap_s, 86_400.0);
    }

    #[test]
    fn declared_intercluster_links_take_precedence() {
        let graph = TemporalContactGraph::new(
            vec![ContactWindow {
                a: NodeId::Sat(0),
                b: NodeId::Ground(0),
                start_s: 0.0,
                end_s: 86_400.0,
            }],
            86_400.0,
            10.0,
        );
        let clusters = vec![Cluster {
            id: 0,
            members: vec![0],
        }];
        let report = classify(
            &graph,
            &clusters,
            NodeId::Ground(0),
            ClassifyThresholds::default(),
            true,
            NodeId::Sat,
        )
        .unwrap();
        assert_eq!(report.class, ScenarioClass::InterCluster);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("no routing strategy")));
    }

    #[test]
    fn no_clusters_is_a_configuration_error() {
        let graph = TemporalContactGraph::new(Vec::new(), 86_400.0, 10.0);
        assert!(classify(
            &graph,
            &[],
            NodeId::Ground(0),
            ClassifyThresholds::default(),
            false,
            NodeId::Sat,
        )
        .is_err());
    }

    #[test]
    fn ring_distance_walks_the_shorter_arc() {
        let cluster = Cluster {
            id: 0,
            members: (0..8).collect(),
        };
        assert_eq!(cluster.ring_distance(0, 1), 1);
        assert_eq!(cluster.ring_distance(0, 7), 1);
        assert_eq!(cluster.ring_distance(0, 4), 4);
        assert_eq!(cluster.ring_distance(6, 1), 3);
        assert_eq!(cluster.ring_distance(3, 3), 0);
    }

    #[test]
    fn blocked_ring_at_500_km_is_diagnosed() {
        let spec = WalkerSpec {
            total: 8,
            planes: 1,
            phasing: 0,
            inclination_deg: 80.0,
            altitude_km: 500.0,
            pattern: WalkerPattern::Star,
        };
        let c = generate_walker(&spec, 0.0).unwrap();
        let clusters = vec![Cluster {
            id: 0,
            members: (0..8).collect(),
        }];
        let notes = ring_blockage_diagnostic(&c, &clusters, 0.0, 0.0);
        assert_eq!(notes.len(), 1);
        assert!(notes[0].contains("ring 0"));

        // The same ring high enough for the chord to clear the sphere is fine.
        let high = WalkerSpec {
            altitude_km: 2000.0,
            ..spec
        };
        let c = generate_walker(&high, 0.0).unwrap();
        assert!(ring_blockage_diagnostic(&c, &clusters, 0.0, 0.0).is_empty());
    }

    #[test]
    fn windows_csv_layout_is_stable() {
        let windows = vec![ContactWindow {
            a: NodeId::Ground(0),
            b: NodeId::Sat(3),
            start_s: 12.5,
            end_s: 80.0,
        }];
        let mut buf = Vec::new();
        write_windows_csv(&windows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_a,node_b,start_s,end_s\ngs0,sat3,12.5,80\n"
        );
    }

    #[test]
    fn gantt_csv_joins_intervals() {
        let rows = vec![GanttRow {
            label: "plane0".into(),
            kind: "cluster",
            intervals: vec![
                Interval {
                    start_s: 0.0,
                    end_s: 10.0,
                },
                Interval {
                    start_s: 20.0,
                    end_s: 30.5,
                },
            ],
        }];
        let mut buf = Vec::new();
        write_gantt_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row,kind,intervals\nplane0,cluster,0:10;20:30.5\n"
        );
    }
}
