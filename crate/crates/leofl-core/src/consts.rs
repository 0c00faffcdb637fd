//! Physical constants shared across the simulator.
//!
//! All distances are in kilometres, all times in seconds and all angles in
//! degrees at API boundaries (converted to radians internally).

/// Mean Earth radius for the spherical Earth model, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Standard gravitational parameter of Earth, km^3/s^2.
pub const MU_EARTH: f64 = 398_600.441_8;

/// Earth rotation rate, rad/s (sidereal).
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

/// Speed of light, km/s. Used for propagation delays on radio links.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

/// Altitude band, km, that the constellation generator considers typical.
/// Orbits outside the band are accepted with a logged warning.
pub const LEO_ALTITUDE_BAND_KM: (f64, f64) = (300.0, 2100.0);
