//! Horizontal field-of-view membership.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::geometry::SocialPoint;
use crate::orientation::DirectionEstimate;

/// Slack on the inclusive boundary so that a target constructed at exactly
/// the half-angle is not lost to the last ulp of the trigonometry.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Planar separation below which subject and target count as coincident, meters.
pub const COINCIDENT_EPS: f64 = 1e-9;

pub const DEFAULT_FOV_DEG: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FovError {
    #[error("gaze estimate is not valid")]
    InvalidGaze,
    #[error("subject and target coincide in the ground plane")]
    CoincidentPoints,
    #[error("horizontal field of view must be in (0, 360] degrees, got {0}")]
    BadAngle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovConfig {
    /// Full horizontal opening angle, radians.
    pub horizontal_fov: f64,
}

impl FovConfig {
    pub fn new(horizontal_fov: f64) -> Result<Self, FovError> {
        if !(horizontal_fov > 0.0 && horizontal_fov <= TAU) {
            return Err(FovError::BadAngle(angle::to_degrees(horizontal_fov)));
        }
        Ok(Self { horizontal_fov })
    }

    pub fn from_degrees(deg: f64) -> Result<Self, FovError> {
        if !(deg > 0.0 && deg <= 360.0) {
            return Err(FovError::BadAngle(deg));
        }
        Ok(Self { horizontal_fov: angle::to_radians(deg) })
    }

    pub fn half_angle(&self) -> f64 {
        self.horizontal_fov * 0.5
    }
}

impl Default for FovConfig {
    fn default() -> Self {
        Self { horizontal_fov: 2.0 * PI / 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovResult {
    pub inside: bool,
    /// Planar angle between gaze and the bearing to the target, in `[0, π]`.
    pub angular_offset: f64,
}

/// Whether `target` lies inside the horizontal cone around `gaze` anchored at
/// `subject`. Heights are ignored.
pub fn fov_test(
    gaze: &DirectionEstimate,
    subject: &SocialPoint,
    target: &SocialPoint,
    cfg: &FovConfig,
) -> Result<FovResult, FovError> {
    if !gaze.valid {
        return Err(FovError::InvalidGaze);
    }
    let (bx, by) = (target.x() - subject.x(), target.y() - subject.y());
    let range = bx.hypot(by);
    if !(range > COINCIDENT_EPS) {
        return Err(FovError::CoincidentPoints);
    }
    let (bx, by) = (bx / range, by / range);
    let (gx, gy) = (gaze.direction.x, gaze.direction.y);
    let dot = (gx * bx + gy * by).clamp(-1.0, 1.0);
    let cross = gx * by - gy * bx;
    // same angle as acos(dot), better conditioned near 0 and π
    let angular_offset = cross.abs().atan2(dot);
    Ok(FovResult { inside: angular_offset <= cfg.half_angle() + BOUNDARY_EPS, angular_offset })
}

/// Can the subject see the camera (the social-frame origin)?
pub fn sees_camera(gaze: &DirectionEstimate, subject: &SocialPoint, cfg: &FovConfig) -> Result<FovResult, FovError> {
    fov_test(gaze, subject, &SocialPoint::new(0.0, 0.0, 0.0), cfg)
}
