//! Constellation geometry: Walker patterns, circular two-body propagation,
//! ground-station positions in the inertial frame and line-of-sight tests.
//!
//! The model is deliberately simple and fully deterministic: spherical
//! non-rotating gravity field (no J2), circular orbits, spherical Earth of
//! radius [`EARTH_RADIUS_KM`]. Angles are degrees at the API boundary.

use serde::{Deserialize, Serialize};

use crate::consts::{EARTH_RADIUS_KM, EARTH_ROTATION_RAD_S, LEO_ALTITUDE_BAND_KM, MU_EARTH};
use crate::error::{Error, Result};

/// Walker pattern family. A star spreads the ascending nodes over half a
/// circle (counter-rotating seams, polar-style coverage), a delta over the
/// full circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkerPattern {
    Star,
    Delta,
}

/// Walker constellation in `i:t/p/f` notation: `total` satellites in `planes`
/// equally spaced orbital planes at a common `inclination_deg` and
/// `altitude_km`, with inter-plane phasing factor `phasing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerSpec {
    pub total: u32,
    pub planes: u32,
    pub phasing: u32,
    pub inclination_deg: f64,
    pub altitude_km: f64,
    pub pattern: WalkerPattern,
}

impl WalkerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::Config("walker: no satellites (total = 0)".into()));
        }
        if self.planes == 0 {
            return Err(Error::Config("walker: planes must be at least 1".into()));
        }
        if !self.total.is_multiple_of(self.planes) {
            return Err(Error::Config(format!(
                "walker: total ({}) must be divisible by planes ({})",
                self.total, self.planes
            )));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::Config(format!(
                "walker: inclination {} outside [0, 180]",
                self.inclination_deg
            )));
        }
        Ok(())
    }

    pub fn satellites_per_plane(&self) -> u32 {
        self.total / self.planes
    }
}

/// Circular orbit described by size and orientation. `initial_phase_deg` is
/// the argument of latitude (angle from the ascending node, in the orbital
/// plane) at `epoch_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitElements {
    pub semi_major_axis_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub initial_phase_deg: f64,
    pub epoch_s: f64,
}

impl OrbitElements {
    /// Builds validated elements. The semi-major axis must clear the surface;
    /// unusual altitudes are allowed but logged.
    // The bound is written as `!(x > y)` so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(
        semi_major_axis_km: f64,
        inclination_deg: f64,
        raan_deg: f64,
        initial_phase_deg: f64,
        epoch_s: f64,
    ) -> Result<Self> {
        if !(semi_major_axis_km > EARTH_RADIUS_KM) {
            return Err(Error::Config(format!(
                "orbit: semi-major axis {semi_major_axis_km} km does not clear the surface ({EARTH_RADIUS_KM} km)"
            )));
        }
        let altitude = semi_major_axis_km - EARTH_RADIUS_KM;
        if altitude < LEO_ALTITUDE_BAND_KM.0 || altitude > LEO_ALTITUDE_BAND_KM.1 {
            log::warn!("orbit: altitude {altitude:.1} km is outside the typical LEO band");
        }
        Ok(Self {
            semi_major_axis_km,
            inclination_deg,
            raan_deg: normalize_deg(raan_deg),
            initial_phase_deg: normalize_deg(initial_phase_deg),
            epoch_s,
        })
    }

    /// Mean motion, rad/s.
    pub fn mean_motion_rad_s(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis_km.powi(3)).sqrt()
    }

    /// Orbital period, s.
    pub fn period_s(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion_rad_s()
    }
}

/// Ground site on the spherical Earth. `min_elevation_deg` is the elevation
/// mask below which a satellite does not count as visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStation {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    #[serde(default)]
    pub altitude_km: f64,
    #[serde(default = "default_elevation_mask_deg")]
    pub min_elevation_deg: f64,
}

fn default_elevation_mask_deg() -> f64 {
    10.0
}

impl GroundStation {
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(Error::Config(format!(
                "ground station {}: latitude {} outside [-90, 90]",
                self.name, self.latitude_deg
            )));
        }
        if !(-180.0..180.0).contains(&self.longitude_deg) {
            return Err(Error::Config(format!(
                "ground station {}: longitude {} outside [-180, 180)",
                self.name, self.longitude_deg
            )));
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return Err(Error::Config(format!(
                "ground station {}: elevation mask {} outside [0, 90)",
                self.name, self.min_elevation_deg
            )));
        }
        Ok(())
    }
}

/// Position in the Earth-centered inertial frame at a given simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EciPosition {
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
    pub t_s: f64,
}

impl EciPosition {
    pub fn norm_km(&self) -> f64 {
        (self.x_km * self.x_km + self.y_km * self.y_km + self.z_km * self.z_km).sqrt()
    }
}

/// Euclidean distance between two positions sampled at the same instant, km.
pub fn distance_km(a: &EciPosition, b: &EciPosition) -> f64 {
    debug_assert!(
        (a.t_s - b.t_s).abs() < 1e-9,
        "positions from different times"
    );
    let dx = b.x_km - a.x_km;
    let dy = b.y_km - a.y_km;
    let dz = b.z_km - a.z_km;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Geometry rule deciding whether two positions can close a radio link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkGeometry {
    /// Station-to-satellite: the satellite must stand at least
    /// `min_elevation_deg` above the station's local horizon.
    Ground { min_elevation_deg: f64 },
    /// Satellite-to-satellite: the sight line must clear the sphere of radius
    /// Earth + `grazing_altitude_km`.
    Space { grazing_altitude_km: f64 },
}

/// Line-of-sight test. For [`LinkGeometry::Ground`] the first argument is the
/// ground station. Both positions must be sampled at the same instant.
pub fn visible(a: &EciPosition, b: &EciPosition, kind: LinkGeometry) -> bool {
    debug_assert!(
        (a.t_s - b.t_s).abs() < 1e-9,
        "positions from different times"
    );
    match kind {
        LinkGeometry::Ground { min_elevation_deg } => {
            let rx = b.x_km - a.x_km;
            let ry = b.y_km - a.y_km;
            let rz = b.z_km - a.z_km;
            let range = (rx * rx + ry * ry + rz * rz).sqrt();
            if range == 0.0 {
                return false;
            }
            // Local vertical on a sphere is the radial direction.
            let rn = a.norm_km();
            let sin_el = (rx * a.x_km + ry * a.y_km + rz * a.z_km) / (range * rn);
            sin_el.clamp(-1.0, 1.0).asin().to_degrees() >= min_elevation_deg
        }
        LinkGeometry::Space {
            grazing_altitude_km,
        } => {
            // Closest approach of the segment a-b to the Earth's center.
            let dx = b.x_km - a.x_km;
            let dy = b.y_km - a.y_km;
            let dz = b.z_km - a.z_km;
            let dd = dx * dx + dy * dy + dz * dz;
            let s = if dd == 0.0 {
                0.0
            } else {
                (-(a.x_km * dx + a.y_km * dy + a.z_km * dz) / dd).clamp(0.0, 1.0)
            };
            let cx = a.x_km + s * dx;
            let cy = a.y_km + s * dy;
            let cz = a.z_km + s * dz;
            let closest = (cx * cx + cy * cy + cz * cz).sqrt();
            closest >= EARTH_RADIUS_KM + grazing_altitude_km
        }
    }
}

/// A generated constellation: one orbit per satellite, plane-major order
/// (all satellites of plane 0 first, then plane 1, ...).
#[derive(Debug, Clone)]
pub struct Constellation {
    pub spec: WalkerSpec,
    pub satellites: Vec<OrbitElements>,
}

impl Constellation {
    pub fn plane_of(&self, sat_index: usize) -> usize {
        sat_index / self.spec.satellites_per_plane() as usize
    }

    pub fn index_in_plane(&self, sat_index: usize) -> usize {
        sat_index % self.spec.satellites_per_plane() as usize
    }

    /// Satellite indices of one plane, ascending.
    pub fn plane_members(&self, plane: usize) -> std::ops::Range<usize> {
        let per = self.spec.satellites_per_plane() as usize;
        plane * per..(plane + 1) * per
    }
}

/// Expands a Walker pattern into per-satellite orbit elements.
///
/// Plane `q` sits at RAAN `q * 180/p` (star) or `q * 360/p` (delta). Within a
/// plane the `t/p` satellites are spaced `360*p/t` apart, and plane `q` as a
/// whole is shifted by the phasing term `q * 360*f/t`.
pub fn generate_walker(spec: &WalkerSpec, epoch_s: f64) -> Result<Constellation> {
    spec.validate()?;
    let per_plane = spec.satellites_per_plane();
    let raan_span = match spec.pattern {
        WalkerPattern::Star => 180.0,
        WalkerPattern::Delta => 360.0,
    };
    let raan_step = raan_span / spec.planes as f64;
    let in_plane_step = 360.0 * spec.planes as f64 / spec.total as f64;
    let phase_step = 360.0 * spec.phasing as f64 / spec.total as f64;
    let a = EARTH_RADIUS_KM + spec.altitude_km;

    let mut satellites = Vec::with_capacity(spec.total as usize);
    for plane in 0..spec.planes {
        let raan = raan_step * plane as f64;
        let plane_phase = phase_step * plane as f64;
        for slot in 0..per_plane {
            satellites.push(OrbitElements::new(
                a,
                spec.inclination_deg,
                raan,
                plane_phase + in_plane_step * slot as f64,
                epoch_s,
            )?);
        }
    }
    Ok(Constellation {
        spec: *spec,
        satellites,
    })
}

/// Satellite position from circular two-body motion: the argument of latitude
/// advances uniformly at the mean motion.
pub fn propagate(elem: &OrbitElements, t_s: f64) -> EciPosition {
    let u = elem.initial_phase_deg.to_radians() + elem.mean_motion_rad_s() * (t_s - elem.epoch_s);
    let (sin_u, cos_u) = u.sin_cos();
    let (sin_i, cos_i) = elem.inclination_deg.to_radians().sin_cos();
    let (sin_o, cos_o) = elem.raan_deg.to_radians().sin_cos();
    let a = elem.semi_major_axis_km;
    EciPosition {
        x_km: a * (cos_o * cos_u - sin_o * sin_u * cos_i),
        y_km: a * (sin_o * cos_u + cos_o * sin_u * cos_i),
        z_km: a * sin_u * sin_i,
        t_s,
    }
}

/// Ground-station position in the inertial frame. The Earth spins at the
/// sidereal rate; `rotation_epoch_s` is the time at which the Greenwich
/// meridian crosses the inertial +x axis (0 by default in configs).
pub fn ground_station_eci(gs: &GroundStation, t_s: f64, rotation_epoch_s: f64) -> EciPosition {
    let r = EARTH_RADIUS_KM + gs.altitude_km;
    let theta = gs.longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * (t_s - rotation_epoch_s);
    let (sin_lat, cos_lat) = gs.latitude_deg.to_radians().sin_cos();
    let (sin_t, cos_t) = theta.sin_cos();
    EciPosition {
        x_km: r * cos_lat * cos_t,
        y_km: r * cos_lat * sin_t,
        z_km: r * sin_lat,
        t_s,
    }
}

fn normalize_deg(angle: f64) -> f64 {
    let a = angle % 360.0;
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}
