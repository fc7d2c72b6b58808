//! Torso and gaze orientation from 3D keypoints.
//!
//! Each direction comes from the normal of a triangle of joints
//! (shoulders + pelvis for the torso, eyes + neck for the gaze), projected
//! onto the ground plane. The heading quaternion is the rotation about +Z
//! that carries the forward axis `[1, 0, 0]` onto that planar direction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::geometry::{UnitQuaternion, Vec3};
use crate::skeleton::{JointId, Skeleton3D};

/// Planar-norm cutoff below which a normal has no usable heading.
pub const DEGENERATE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrientationError {
    #[error("missing joints: {}", .0.iter().map(|j| j.name()).collect::<Vec<_>>().join(", "))]
    MissingJoints(Vec<JointId>),
    #[error("normal has no horizontal component (planar norm {0:e})")]
    DegenerateDirection(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Torso,
    Gaze,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionEstimate {
    pub kind: DirectionKind,
    /// Unnormalized normal, m².
    pub raw_normal: Vec3,
    /// Unit vector in the ground plane.
    pub direction: Vec3,
    /// Radians in `(-π, π]`, counterclockwise from +X seen from above.
    pub heading: f64,
    pub quaternion: UnitQuaternion,
    pub valid: bool,
}

impl DirectionEstimate {
    pub fn invalid(kind: DirectionKind, raw_normal: Vec3) -> Self {
        Self {
            kind,
            raw_normal,
            direction: Vec3::zeros(),
            heading: 0.0,
            quaternion: UnitQuaternion::identity(),
            valid: false,
        }
    }

    pub fn from_normal(kind: DirectionKind, normal: Vec3) -> Result<Self, OrientationError> {
        let direction = ground_direction(&normal)?;
        Ok(Self {
            kind,
            raw_normal: normal,
            direction,
            heading: heading_of(&direction),
            quaternion: heading_quaternion(&direction),
            valid: true,
        })
    }

    /// Rebuilds an estimate from a heading alone, e.g. a filtered one.
    pub fn from_heading(kind: DirectionKind, heading: f64, raw_normal: Vec3) -> Self {
        let heading = angle::wrap(heading);
        let direction = Vec3::new(heading.cos(), heading.sin(), 0.0);
        Self { kind, raw_normal, direction, heading, quaternion: heading_quaternion(&direction), valid: true }
    }
}

fn triangle_normal(s: &Skeleton3D, a: JointId, b: JointId, apex: JointId) -> Result<Vec3, OrientationError> {
    match (s.get(a), s.get(b), s.get(apex)) {
        (Some(a), Some(b), Some(apex)) => Ok((a.0 - apex.0).cross(&(b.0 - apex.0))),
        _ => Err(OrientationError::MissingJoints(s.missing(&[a, b, apex]))),
    }
}

/// `(shoulder.L - pelvis) × (shoulder.R - pelvis)`; points out of the chest.
pub fn torso_normal(s: &Skeleton3D) -> Result<Vec3, OrientationError> {
    triangle_normal(s, JointId::ShoulderL, JointId::ShoulderR, JointId::Pelvis)
}

/// `(eye.L - neck) × (eye.R - neck)`; points out of the face.
pub fn gaze_normal(s: &Skeleton3D) -> Result<Vec3, OrientationError> {
    triangle_normal(s, JointId::EyeL, JointId::EyeR, JointId::Neck)
}

/// Projects a normal onto the ground plane and normalizes it.
pub fn ground_direction(n: &Vec3) -> Result<Vec3, OrientationError> {
    let planar = n.x.hypot(n.y);
    if !(planar >= DEGENERATE_EPS) {
        return Err(OrientationError::DegenerateDirection(planar));
    }
    Ok(Vec3::new(n.x / planar, n.y / planar, 0.0))
}

pub fn heading_of(d: &Vec3) -> f64 {
    angle::wrap(d.y.atan2(d.x))
}

/// Rotation about +Z by the heading of `d`, so that rotating `[1, 0, 0]`
/// gives `d`.
pub fn heading_quaternion(d: &Vec3) -> UnitQuaternion {
    let (s, c) = (heading_of(d) * 0.5).sin_cos();
    UnitQuaternion { w: c, x: 0.0, y: 0.0, z: s }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub torso: DirectionEstimate,
    pub gaze: DirectionEstimate,
}

fn estimate(kind: DirectionKind, normal: Result<Vec3, OrientationError>) -> DirectionEstimate {
    match normal {
        Ok(n) => DirectionEstimate::from_normal(kind, n).unwrap_or_else(|_| DirectionEstimate::invalid(kind, n)),
        Err(_) => DirectionEstimate::invalid(kind, Vec3::zeros()),
    }
}

/// Torso and gaze estimates for one skeleton; a failure in one leaves the
/// other untouched.
pub fn estimate_orientation(s: &Skeleton3D) -> Orientation {
    Orientation {
        torso: estimate(DirectionKind::Torso, torso_normal(s)),
        gaze: estimate(DirectionKind::Gaze, gaze_normal(s)),
    }
}
