//! Radiometric model of a PIR sensor observing persons and static heat sources.
//!
//! The projected solid angle of an emitter is collapsed to
//! `effective_area / d^2` times a unit radiometric constant, and both
//! pyroelectric elements sit at the environment temperature. A single
//! emitter therefore contributes
//! `zone_sign * effective_area * (T^4 - T_env^4) / d^2` to the differential
//! heat flux (DHF). With occlusion disabled the DHF is the plain sum of all
//! contributions; with occlusion enabled an emitter hidden behind a person
//! contributes nothing for that sensor at that instant.

mod dynamics;
mod scene;

pub use dynamics::{sensor_dynamics, Biquad, DynamicsConstants};
pub use scene::{
    simulate_scene, window_dataset, window_starts, Arena, NoiseConfig, PersonBody, Recording, Scene,
    SceneTemplate, ScenePerson, Trajectory, MAX_PERSONS,
};

use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{Point2, SensorModel};
use crate::math::{atan, powi, wrap_angle};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Scale of the collapsed projected-solid-angle term.
pub const RADIOMETRIC_CONSTANT: f64 = 1.0;

pub const DEFAULT_ENV_TEMP: f64 = 293.0;

/// Instantaneous state of a walking person.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PersonState {
    pub position: Point2,
    /// Radiating cross-section, m^2.
    pub effective_area: f64,
    /// Surface temperature, kelvin.
    pub surface_temp: f64,
    /// Radius of the occluding cylinder, m.
    pub radius: f64,
}

/// A static background heat source.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HeatSource {
    pub position: Point2,
    pub effective_area: f64,
    pub surface_temp: f64,
}

/// Anything that radiates towards the sensor.
pub trait Radiator {
    fn position(&self) -> Point2;
    fn effective_area(&self) -> f64;
    fn surface_temp(&self) -> f64;
}

impl Radiator for PersonState {
    fn position(&self) -> Point2 {
        self.position
    }
    fn effective_area(&self) -> f64 {
        self.effective_area
    }
    fn surface_temp(&self) -> f64 {
        self.surface_temp
    }
}

impl Radiator for HeatSource {
    fn position(&self) -> Point2 {
        self.position
    }
    fn effective_area(&self) -> f64 {
        self.effective_area
    }
    fn surface_temp(&self) -> f64 {
        self.surface_temp
    }
}

/// DHF caused by one emitter on one sensor.
pub fn dhf_single<R: Radiator + ?Sized>(emitter: &R, sensor: &SensorModel, env_temp: f64) -> Result<f64> {
    let (_, distance) = sensor.bearing_and_distance(emitter.position())?;
    let sign = sensor.zone_sign(emitter.position());
    if sign == 0 {
        return Ok(0.0);
    }
    let radiance = powi(emitter.surface_temp(), 4) - powi(env_temp, 4);
    Ok(f64::from(sign) * RADIOMETRIC_CONSTANT * emitter.effective_area() * radiance / (distance * distance))
}

/// Whether a person-sized blocker hides `emitter` from `sensor`: the blocker
/// must be strictly nearer than the emitter and within `atan(radius / d_blocker)`
/// of the emitter's bearing.
pub fn occludes(blocker: Point2, radius: f64, emitter: Point2, sensor: &SensorModel) -> bool {
    let (Ok((bb, db)), Ok((be, de))) =
        (sensor.bearing_and_distance(blocker), sensor.bearing_and_distance(emitter))
    else {
        return false;
    };
    db < de && wrap_angle(bb - be).abs() < atan(radius / db)
}

/// Per-emitter DHF contributions after the occlusion rule has been applied.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Contributions {
    pub persons: Vec<f64>,
    pub sources: Vec<f64>,
}

impl Contributions {
    pub fn total(&self) -> f64 {
        self.persons.iter().sum::<f64>() + self.sources.iter().sum::<f64>()
    }
}

pub fn dhf_contributions(
    persons: &[PersonState],
    sources: &[HeatSource],
    sensor: &SensorModel,
    env_temp: f64,
    occlusion: bool,
) -> Contributions {
    let hidden = |position: Point2, skip: Option<usize>| {
        occlusion
            && persons
                .iter()
                .enumerate()
                .any(|(i, p)| Some(i) != skip && occludes(p.position, p.radius, position, sensor))
    };
    let persons_out = persons
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if hidden(p.position, Some(i)) {
                0.0
            } else {
                dhf_single(p, sensor, env_temp).unwrap_or(0.0)
            }
        })
        .collect();
    let sources_out = sources
        .iter()
        .map(|s| {
            if hidden(s.position, None) {
                0.0
            } else {
                dhf_single(s, sensor, env_temp).unwrap_or(0.0)
            }
        })
        .collect();
    Contributions { persons: persons_out, sources: sources_out }
}

/// Total DHF on a sensor at one instant.
pub fn dhf_total(
    persons: &[PersonState],
    sources: &[HeatSource],
    sensor: &SensorModel,
    env_temp: f64,
    occlusion: bool,
) -> f64 {
    dhf_contributions(persons, sources, sensor, env_temp, occlusion).total()
}
