//! Turns a validated configuration into the runnable scene: generated
//! constellation, node ids, clusters, and the precomputed contact graph
//! towards the parameter server.

use crate::config::{PsPlacement, ScenarioConfig};
use crate::consts::EARTH_RADIUS_KM;
use crate::contact::{
    cluster_windows, compute_windows, orient, ring_blockage_diagnostic, ClassificationReport,
    Cluster, ContactWindow, GanttRow, Interval, NodeId, PairSpec, TemporalContactGraph,
};
use crate::error::Result;
use crate::orbit::{
    generate_walker, ground_station_eci, propagate, Constellation, EciPosition, LinkGeometry,
    OrbitElements,
};

/// Node layout: walker satellites are `Sat(0..total)` in plane-major order; a
/// dedicated parameter-server satellite, when present, is `Sat(total)`;
/// ground stations are `Ground(index)` in config order.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub constellation: Constellation,
    /// The parameter-server node.
    pub ps: NodeId,
    ps_orbit: Option<OrbitElements>,
    /// One cluster per orbital plane, members ascending (ring order).
    pub clusters: Vec<Cluster>,
    pub graph: TemporalContactGraph,
    /// Constant distance between ring neighbors, per cluster (rings rotate
    /// rigidly, so one epoch measurement suffices).
    pub ring_hop_km: Vec<f64>,
    /// Assembly diagnostics (blocked rings, degenerate horizons).
    pub warnings: Vec<String>,
}

impl Scenario {
    /// Builds the scene and computes all contact windows over the horizon.
    pub fn assemble(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let constellation = generate_walker(&config.walker, config.epoch_s)?;
        let total = config.walker.total as usize;

        let (ps, ps_orbit) = match &config.parameter_server {
            PsPlacement::GroundStation { station } => {
                let idx = config
                    .ground_stations
                    .iter()
                    .position(|g| &g.name == station)
                    .expect("validated: station exists");
                (NodeId::Ground(idx as u32), None)
            }
            PsPlacement::Satellite {
                altitude_km,
                inclination_deg,
                raan_deg,
                initial_phase_deg,
            } => {
                let orbit = OrbitElements::new(
                    EARTH_RADIUS_KM + altitude_km,
                    *inclination_deg,
                    *raan_deg,
                    *initial_phase_deg,
                    config.epoch_s,
                )?;
                (NodeId::Sat(total as u32), Some(orbit))
            }
        };

        let clusters: Vec<Cluster> = (0..config.walker.planes)
            .map(|p| Cluster {
                id: p,
                members: constellation
                    .plane_members(p as usize)
                    .map(|m| m as u32)
                    .collect(),
            })
            .collect();

        // Pairs that get windows: every ground station to every walker
        // satellite, and (for a PS satellite) every walker satellite to it.
        // Ring links are static and never windowed.
        let mut pairs = Vec::new();
        for (g, gs) in config.ground_stations.iter().enumerate() {
            for s in 0..total {
                pairs.push(PairSpec {
                    a: NodeId::Ground(g as u32),
                    b: NodeId::Sat(s as u32),
                    geometry: LinkGeometry::Ground {
                        min_elevation_deg: gs.min_elevation_deg,
                    },
                });
            }
        }
        if ps_orbit.is_some() {
            for s in 0..total {
                pairs.push(PairSpec {
                    a: NodeId::Sat(s as u32),
                    b: ps,
                    geometry: LinkGeometry::Space {
                        grazing_altitude_km: config.isl.grazing_altitude_km,
                    },
                });
            }
        }

        let position = {
            let constellation = constellation.clone();
            let stations = config.ground_stations.clone();
            let rotation_epoch = config.rotation_epoch_s;
            move |node: NodeId, t: f64| -> EciPosition {
                match node {
                    NodeId::Sat(i) if (i as usize) < constellation.satellites.len() => {
                        propagate(&constellation.satellites[i as usize], t)
                    }
                    NodeId::Sat(_) => propagate(ps_orbit.as_ref().expect("PS satellite orbit"), t),
                    NodeId::Ground(g) => {
                        ground_station_eci(&stations[g as usize], t, rotation_epoch)
                    }
                }
            }
        };

        let windows = if config.persistent_connectivity {
            // Degenerate network: every pair holds one full-horizon window.
            pairs
                .iter()
                .map(|p| ContactWindow {
                    a: p.a,
                    b: p.b,
                    start_s: 0.0,
                    end_s: config.horizon_s,
                })
                .collect()
        } else {
            compute_windows(&pairs, &position, config.horizon_s, config.step_s)?
        };
        let graph = TemporalContactGraph::new(windows, config.horizon_s, config.step_s);

        let mut warnings = Vec::new();
        if config.isl.enabled {
            warnings.extend(ring_blockage_diagnostic(
                &constellation,
                &clusters,
                config.isl.grazing_altitude_km,
                config.epoch_s,
            ));
        }

        let ring_hop_km = clusters
            .iter()
            .map(|c| {
                if c.members.len() < 2 {
                    return 0.0;
                }
                let a = propagate(
                    &constellation.satellites[c.members[0] as usize],
                    config.epoch_s,
                );
                let b = propagate(
                    &constellation.satellites[c.members[1] as usize],
                    config.epoch_s,
                );
                crate::orbit::distance_km(&a, &b)
            })
            .collect();

        Ok(Self {
            config,
            constellation,
            ps,
            ps_orbit,
            clusters,
            graph,
            ring_hop_km,
            warnings,
        })
    }

    pub fn num_satellites(&self) -> usize {
        self.constellation.satellites.len()
    }

    /// Inertial position of any node at any time.
    pub fn position(&self, node: NodeId, t: f64) -> EciPosition {
        match node {
            NodeId::Sat(i) if (i as usize) < self.constellation.satellites.len() => {
                propagate(&self.constellation.satellites[i as usize], t)
            }
            NodeId::Sat(_) => propagate(self.ps_orbit.as_ref().expect("PS satellite orbit"), t),
            NodeId::Ground(g) => ground_station_eci(
                &self.config.ground_stations[g as usize],
                t,
                self.config.rotation_epoch_s,
            ),
        }
    }

    /// Contact windows between a walker satellite and the parameter server.
    pub fn ps_windows(&self, sat: u32) -> &[ContactWindow] {
        let (a, b) = orient(NodeId::Sat(sat), self.ps);
        self.graph.pair_windows(a, b)
    }

    /// Same windows as plain intervals (scheduling input).
    pub fn ps_intervals(&self, sat: u32) -> Vec<Interval> {
        self.ps_windows(sat)
            .iter()
            .map(|w| Interval {
                start_s: w.start_s,
                end_s: w.end_s,
            })
            .collect()
    }

    /// Merged connectivity of one cluster towards the parameter server.
    pub fn cluster_intervals(&self, cluster: &Cluster) -> Vec<Interval> {
        cluster_windows(&self.graph, cluster, self.ps, NodeId::Sat)
    }

    /// Scenario classification towards the parameter server.
    pub fn classify(&self) -> Result<ClassificationReport> {
        crate::contact::classify(
            &self.graph,
            &self.clusters,
            self.ps,
            self.config.classification,
            self.config.isl.inter_cluster,
            NodeId::Sat,
        )
    }

    /// Connectivity rows for the Gantt export: one row per satellite towards
    /// the PS, then one merged row per cluster.
    pub fn gantt_rows(&self) -> Vec<GanttRow> {
        let mut rows = Vec::new();
        for s in 0..self.num_satellites() as u32 {
            rows.push(GanttRow {
                label: NodeId::Sat(s).to_string(),
                kind: "satellite",
                intervals: self
                    .ps_windows(s)
                    .iter()
                    .map(|w| Interval {
                        start_s: w.start_s,
                        end_s: w.end_s,
                    })
                    .collect(),
            });
        }
        for c in &self.clusters {
            rows.push(GanttRow {
                label: format!("cluster{}", c.id),
                kind: "cluster",
                intervals: self.cluster_intervals(c),
            });
        }
        rows
    }
}
