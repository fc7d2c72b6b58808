//! COCO-17 skeletons, depth frames and lifting 2D detections into 3D.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{backproject, camera_to_social, CameraIntrinsics, FrameConvention, SocialPoint};

/// The 17 COCO keypoints in detector order, followed by the two joints
/// derived after lifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum JointId {
    Nose,
    EyeL,
    EyeR,
    EarL,
    EarR,
    ShoulderL,
    ShoulderR,
    ElbowL,
    ElbowR,
    WristL,
    WristR,
    HipL,
    HipR,
    KneeL,
    KneeR,
    AnkleL,
    AnkleR,
    Pelvis,
    Neck,
}

pub const COCO_JOINTS: usize = 17;
pub const ALL_JOINTS: usize = 19;

impl JointId {
    pub const ALL: [JointId; ALL_JOINTS] = [
        JointId::Nose,
        JointId::EyeL,
        JointId::EyeR,
        JointId::EarL,
        JointId::EarR,
        JointId::ShoulderL,
        JointId::ShoulderR,
        JointId::ElbowL,
        JointId::ElbowR,
        JointId::WristL,
        JointId::WristR,
        JointId::HipL,
        JointId::HipR,
        JointId::KneeL,
        JointId::KneeR,
        JointId::AnkleL,
        JointId::AnkleR,
        JointId::Pelvis,
        JointId::Neck,
    ];

    pub fn coco() -> &'static [JointId] {
        &Self::ALL[..COCO_JOINTS]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_derived(self) -> bool {
        matches!(self, JointId::Pelvis | JointId::Neck)
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::Nose => "nose",
            JointId::EyeL => "eye.L",
            JointId::EyeR => "eye.R",
            JointId::EarL => "ear.L",
            JointId::EarR => "ear.R",
            JointId::ShoulderL => "shoulder.L",
            JointId::ShoulderR => "shoulder.R",
            JointId::ElbowL => "elbow.L",
            JointId::ElbowR => "elbow.R",
            JointId::WristL => "wrist.L",
            JointId::WristR => "wrist.R",
            JointId::HipL => "hip.L",
            JointId::HipR => "hip.R",
            JointId::KneeL => "knee.L",
            JointId::KneeR => "knee.R",
            JointId::AnkleL => "ankle.L",
            JointId::AnkleR => "ankle.R",
            JointId::Pelvis => "pelvis",
            JointId::Neck => "neck",
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown joint name `{0}`")]
pub struct UnknownJoint(pub String);

impl FromStr for JointId {
    type Err = UnknownJoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JointId::ALL.iter().copied().find(|j| j.name() == s).ok_or_else(|| UnknownJoint(s.to_owned()))
    }
}

/// One detected keypoint: pixel position and detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub const ABSENT: Keypoint = Keypoint { u: 0.0, v: 0.0, confidence: 0.0 };

    pub fn new(u: f64, v: f64, confidence: f64) -> Self {
        Self { u, v, confidence }
    }

    pub fn is_present(&self, threshold: f64) -> bool {
        self.confidence >= threshold && self.confidence > 0.0
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.u, k.v, k.confidence]
    }
}

/// One person's 2D detection for one frame, in COCO order.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton2D {
    pub keypoints: [Keypoint; COCO_JOINTS],
    pub timestamp: f64,
    pub score: f64,
}

impl Skeleton2D {
    pub fn empty(timestamp: f64) -> Self {
        Self { keypoints: [Keypoint::ABSENT; COCO_JOINTS], timestamp, score: 0.0 }
    }

    pub fn keypoint(&self, joint: JointId) -> Option<&Keypoint> {
        self.keypoints.get(joint.index())
    }

    /// Confidences must lie in `[0, 1]` and coordinates must be finite.
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("detection score {} outside [0, 1]", self.score));
        }
        for (joint, kp) in JointId::coco().iter().zip(&self.keypoints) {
            if !(0.0..=1.0).contains(&kp.confidence) {
                return Err(format!("{joint} confidence {} outside [0, 1]", kp.confidence));
            }
            if !(kp.u.is_finite() && kp.v.is_finite()) {
                return Err(format!("{joint} has non-finite coordinates"));
            }
        }
        Ok(())
    }
}

/// Dense depth in millimeters, row-major. Zero marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    width: u32,
    height: u32,
    data: Vec<u16>,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("depth buffer has {len} samples, expected {width}x{height}")]
pub struct DepthSizeMismatch {
    pub width: u32,
    pub height: u32,
    pub len: usize,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, data: Vec<u16>, timestamp: f64) -> Result<Self, DepthSizeMismatch> {
        if data.len() != width as usize * height as usize {
            return Err(DepthSizeMismatch { width, height, len: data.len() });
        }
        Ok(Self { width, height, data, timestamp })
    }

    pub fn filled(width: u32, height: u32, value: u16, timestamp: f64) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize], timestamp }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    pub fn get(&self, x: u32, y: u32) -> Option<u16> {
        (x < self.width && y < self.height).then(|| self.data[y as usize * self.width as usize + x as usize])
    }

    pub fn set(&mut self, x: u32, y: u32, value: u16) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DepthError {
    #[error("pixel ({u}, {v}) is outside the {width}x{height} depth frame")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("no valid depth within {radius} px of ({u}, {v})")]
    NoValidDepth { u: i64, v: i64, radius: u32 },
}

pub const DEFAULT_SAMPLING_RADIUS: u32 = 5;

/// Minimum valid depth (mm) over the disk of `radius` pixels around the
/// rounded keypoint, clipped at the image border. Invalid (zero) pixels are
/// skipped.
pub fn sample_depth(frame: &DepthFrame, u: f64, v: f64, radius: u32) -> Result<u16, DepthError> {
    let (cu, cv) = (u.round(), v.round());
    if !(cu.is_finite() && cv.is_finite())
        || cu < 0.0
        || cv < 0.0
        || cu >= frame.width as f64
        || cv >= frame.height as f64
    {
        return Err(DepthError::OutOfBounds { u, v, width: frame.width, height: frame.height });
    }
    let (cu, cv) = (cu as i64, cv as i64);
    let r = radius as i64;
    let r2 = r * r;
    let (w, h) = (frame.width as i64, frame.height as i64);

    let mut best: Option<u16> = None;
    for y in (cv - r).max(0)..=(cv + r).min(h - 1) {
        let dy = y - cv;
        // widest dx with dx² + dy² ≤ r²
        let mut half = ((r2 - dy * dy) as f64).sqrt() as i64;
        while half * half + dy * dy > r2 {
            half -= 1;
        }
        while (half + 1) * (half + 1) + dy * dy <= r2 {
            half += 1;
        }
        let x0 = (cu - half).max(0) as usize;
        let x1 = (cu + half).min(w - 1) as usize;
        let row = &frame.data[y as usize * w as usize..][..w as usize];
        for &d in &row[x0..=x1] {
            if d != 0 && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
        }
    }
    best.ok_or(DepthError::NoValidDepth { u: cu, v: cv, radius })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiftParams {
    pub confidence_threshold: f64,
    pub sampling_radius: u32,
}

impl Default for LiftParams {
    fn default() -> Self {
        Self { confidence_threshold: 0.5, sampling_radius: DEFAULT_SAMPLING_RADIUS }
    }
}

/// Named 3D joints in the social frame. Pelvis and neck are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton3D {
    joints: [Option<SocialPoint>; ALL_JOINTS],
    pub timestamp: f64,
    pub track_id: Option<u64>,
}

impl Skeleton3D {
    pub fn empty(timestamp: f64) -> Self {
        Self { joints: [None; ALL_JOINTS], timestamp, track_id: None }
    }

    /// Builds a skeleton from measured joints; derived joints in the input
    /// are ignored and recomputed.
    pub fn from_joints<I>(timestamp: f64, joints: I) -> Self
    where
        I: IntoIterator<Item = (JointId, SocialPoint)>,
    {
        let mut s = Self::empty(timestamp);
        for (joint, p) in joints {
            if !joint.is_derived() {
                s.joints[joint.index()] = Some(p);
            }
        }
        s.derive_joints();
        s
    }

    pub fn get(&self, joint: JointId) -> Option<SocialPoint> {
        self.joints[joint.index()]
    }

    /// Sets a measured joint and refreshes the derived ones.
    pub fn set(&mut self, joint: JointId, p: Option<SocialPoint>) {
        assert!(!joint.is_derived(), "{joint} is derived from other joints");
        self.joints[joint.index()] = p;
        self.derive_joints();
    }

    pub fn present(&self) -> impl Iterator<Item = (JointId, SocialPoint)> + '_ {
        JointId::ALL.iter().filter_map(|&j| self.joints[j.index()].map(|p| (j, p)))
    }

    pub fn present_count(&self) -> usize {
        self.joints.iter().flatten().count()
    }

    pub fn missing(&self, joints: &[JointId]) -> Vec<JointId> {
        joints.iter().copied().filter(|&j| self.get(j).is_none()).collect()
    }

    /// Applies `f` to every present joint, derived ones included.
    pub fn map_points(&self, mut f: impl FnMut(&SocialPoint) -> SocialPoint) -> Self {
        let measured: Vec<_> = self.present().filter(|(j, _)| !j.is_derived()).map(|(j, p)| (j, f(&p))).collect();
        let mut s = Self::from_joints(self.timestamp, measured);
        s.track_id = self.track_id;
        s
    }

    fn derive_joints(&mut self) {
        let mid = |a: Option<SocialPoint>, b: Option<SocialPoint>| match (a, b) {
            (Some(a), Some(b)) => Some(a.midpoint(&b)),
            _ => None,
        };
        self.joints[JointId::Pelvis.index()] = mid(self.get(JointId::HipL), self.get(JointId::HipR));
        self.joints[JointId::Neck.index()] = mid(self.get(JointId::ShoulderL), self.get(JointId::ShoulderR));
    }
}

/// Lifts one 2D detection into the social frame. Joints below the confidence
/// threshold, outside the image, or without valid depth are left absent.
pub fn lift_skeleton(
    kp: &Skeleton2D,
    depth: &DepthFrame,
    k: &CameraIntrinsics,
    conv: &FrameConvention,
    params: &LiftParams,
) -> Skeleton3D {
    let joints = JointId::coco().iter().zip(&kp.keypoints).filter_map(|(&joint, keypoint)| {
        if !keypoint.is_present(params.confidence_threshold) {
            return None;
        }
        let d = sample_depth(depth, keypoint.u, keypoint.v, params.sampling_radius).ok()?;
        let p = backproject(keypoint.u, keypoint.v, d as f64, k).ok()?;
        Some((joint, camera_to_social(&p, conv)))
    });
    Skeleton3D::from_joints(kp.timestamp, joints)
}
