//! PIR sensor pose and its alternating positive/negative detection zones.
//!
//! The Fresnel lens array splits the horizontal field of view into
//! fan-shaped beams of alternating polarity separated by dead gaps. Beams
//! are laid out symmetrically about the boresight; zone boundaries are
//! half-open with the lower bearing inclusive.

use crate::error::{invalid, Error, Result};
use crate::math::{atan2, cos, floor, hypot, sin, wrap_angle};
use core::f64::consts::PI;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        hypot(other.x - self.x, other.y - self.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }
}

/// Polarity of a detection zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ZoneSign {
    Positive,
    Negative,
}

impl ZoneSign {
    pub fn value(self) -> i8 {
        match self {
            ZoneSign::Positive => 1,
            ZoneSign::Negative => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SensorPose {
    pub position: Point2,
    /// Facing direction in world coordinates, radians.
    pub boresight: f64,
    /// Total horizontal field of view, radians.
    pub fov: f64,
    pub max_range: f64,
}

impl SensorPose {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov <= PI) {
            return Err(invalid("sensor fov must lie in (0, pi]"));
        }
        if !(self.max_range > 0.0) {
            return Err(invalid("sensor max_range must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ZonePattern {
    /// Number of positive beams; the pattern has the same number of negative beams.
    pub n_beams: usize,
    pub beam_width: f64,
    pub gap_width: f64,
    /// Polarity of the beam with the lowest relative bearing.
    pub first: ZoneSign,
}

impl ZonePattern {
    /// Angular extent covered by beams and the gaps between them.
    pub fn span(&self) -> f64 {
        let beams = 2 * self.n_beams;
        beams as f64 * self.beam_width + (beams - 1) as f64 * self.gap_width
    }

    pub fn validate(&self, fov: f64) -> Result<()> {
        if self.n_beams == 0 {
            return Err(invalid("zone pattern needs at least one beam"));
        }
        if !(self.beam_width > 0.0) || self.gap_width < 0.0 {
            return Err(invalid("beam width must be positive and gap width non-negative"));
        }
        if self.span() > fov + 1e-12 {
            return Err(invalid("zone pattern does not fit in the sensor field of view"));
        }
        Ok(())
    }

    /// Sign of the zone at a bearing relative to boresight (radians).
    pub fn sign_at(&self, bearing: f64) -> i8 {
        let span = self.span();
        let u = bearing + 0.5 * span;
        if !(u >= 0.0 && u < span) {
            return 0;
        }
        let period = self.beam_width + self.gap_width;
        let j = floor(u / period);
        let r = u - j * period;
        let j = j as usize;
        if r < self.beam_width && j < 2 * self.n_beams {
            if j % 2 == 0 {
                self.first.value()
            } else {
                -self.first.value()
            }
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SensorModel {
    pub pose: SensorPose,
    pub zones: ZonePattern,
    pub dynamics: crate::radiometry::DynamicsConstants,
}

impl SensorModel {
    /// Default PIR sensor (7 beams of 4 degrees, 4 degree gaps, 110 degree fov, 12 m range).
    pub fn at(position: Point2, boresight: f64) -> Self {
        let deg = PI / 180.0;
        Self {
            pose: SensorPose { position, boresight, fov: 110.0 * deg, max_range: 12.0 },
            zones: ZonePattern {
                n_beams: 7,
                beam_width: 4.0 * deg,
                gap_width: 4.0 * deg,
                first: ZoneSign::Positive,
            },
            dynamics: Default::default(),
        }
    }

    /// A sensor placed at `position` facing `target`.
    pub fn facing(position: Point2, target: Point2) -> Self {
        Self::at(position, atan2(target.y - position.y, target.x - position.x))
    }

    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        self.zones.validate(self.pose.fov)?;
        self.dynamics.validate()
    }

    /// Bearing relative to boresight in (-pi, pi] and distance to `point`.
    pub fn bearing_and_distance(&self, point: Point2) -> Result<(f64, f64)> {
        let dx = point.x - self.pose.position.x;
        let dy = point.y - self.pose.position.y;
        let distance = hypot(dx, dy);
        if distance == 0.0 {
            return Err(Error::DegenerateGeometry);
        }
        Ok((wrap_angle(atan2(dy, dx) - self.pose.boresight), distance))
    }

    /// World point at a relative bearing and distance; inverse of [`Self::bearing_and_distance`].
    pub fn point_at(&self, bearing: f64, distance: f64) -> Point2 {
        let a = bearing + self.pose.boresight;
        Point2::new(
            self.pose.position.x + distance * cos(a),
            self.pose.position.y + distance * sin(a),
        )
    }

    /// +1 inside a positive zone, -1 inside a negative zone, 0 in gaps,
    /// outside the field of view, beyond range, or at the sensor itself.
    pub fn zone_sign(&self, point: Point2) -> i8 {
        let Ok((bearing, distance)) = self.bearing_and_distance(point) else {
            return 0;
        };
        if distance > self.pose.max_range || bearing.abs() > 0.5 * self.pose.fov {
            return 0;
        }
        self.zones.sign_at(bearing)
    }

    /// Relative bearing of the centre of beam `j` (0-based from the lowest bearing).
    pub fn beam_center(&self, j: usize) -> f64 {
        let z = &self.zones;
        -0.5 * z.span() + j as f64 * (z.beam_width + z.gap_width) + 0.5 * z.beam_width
    }

    /// Relative bearing of the centre of the gap following beam `j`.
    pub fn gap_center(&self, j: usize) -> f64 {
        let z = &self.zones;
        -0.5 * z.span() + j as f64 * (z.beam_width + z.gap_width) + z.beam_width + 0.5 * z.gap_width
    }
}
