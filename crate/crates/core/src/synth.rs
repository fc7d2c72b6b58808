//! Synthetic scenes with exact ground truth.
//!
//! A 15-joint body (COCO without the ears) walks in front of a level camera
//! mounted 1.25 m above the floor. Every frame is rendered twice: as 2D
//! keypoints through the pinhole model, and as a depth image made of flat
//! per-joint disks over a far background. Nearer disks win where they
//! overlap, which is what the minimum-in-disk sampling rule has to cope with.
//!
//! The world frame has its origin on the floor below the camera, X along the
//! optical axis, Y left and Z up. Trajectories keep the subject facing the
//! camera half-space: once a body turns into profile its far-side joints are
//! hidden behind near-side disks and no depth rule recovers them.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::Matrix3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::geometry::{project, CameraIntrinsics, Extrinsics, Vec3};
use crate::io::{self, FormatError, GroundTruth, GtRecord, RecordingWriter};
use crate::skeleton::{DepthFrame, JointId, Keypoint, Skeleton2D, COCO_JOINTS};

/// Background depth behind the subject, mm.
pub const BACKGROUND_MM: u16 = 10_000;
/// Radius of each rendered joint disk, pixels.
pub const DISK_RADIUS_PX: i64 = 8;
/// Detector confidence reported for visible, non-dropped joints.
pub const KEYPOINT_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    WalkStraight,
    ArmsCrossedWalk,
    SuddenDodge,
    ZigzagHeadTurns,
}

impl Trajectory {
    pub const ALL: [Trajectory; 4] =
        [Trajectory::WalkStraight, Trajectory::ArmsCrossedWalk, Trajectory::SuddenDodge, Trajectory::ZigzagHeadTurns];

    pub fn name(self) -> &'static str {
        match self {
            Trajectory::WalkStraight => "walk_straight",
            Trajectory::ArmsCrossedWalk => "arms_crossed_walk",
            Trajectory::SuddenDodge => "sudden_dodge",
            Trajectory::ZigzagHeadTurns => "zigzag_head_turns",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Keypoint jitter σ, pixels.
    pub keypoint_px: f64,
    /// Per-pixel depth jitter σ on rendered disks, mm.
    pub depth_mm: f64,
    /// Probability that a visible joint is not reported.
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    pub fps: f64,
    pub trajectory: Trajectory,
    pub noise: NoiseModel,
    /// Camera height above the floor, meters.
    pub camera_height: f64,
    /// Overrides the default 1280x720 intrinsics.
    pub intrinsics: Option<CameraIntrinsics>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 0,
            duration: 10.0,
            fps: 30.0,
            trajectory: Trajectory::WalkStraight,
            noise: NoiseModel::default(),
            camera_height: 1.25,
            intrinsics: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, SynthError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScenario(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        let n = &self.noise;
        if !(n.keypoint_px >= 0.0 && n.depth_mm >= 0.0 && n.keypoint_px.is_finite() && n.depth_mm.is_finite()) {
            return bad("noise levels must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&n.dropout) {
            return bad(format!("dropout must be in [0, 1], got {}", n.dropout));
        }
        if !(self.camera_height > 0.0 && self.camera_height.is_finite()) {
            return bad(format!("camera_height must be positive, got {}", self.camera_height));
        }
        if let Some(k) = &self.intrinsics {
            k.validate().map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }
}

/// Subject placement at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    /// Floor position, world meters.
    pub position: (f64, f64),
    /// Absolute body yaw, radians.
    pub body_yaw: f64,
    /// Absolute head yaw, radians.
    pub head_yaw: f64,
    pub gait_phase: f64,
    pub arms_crossed: bool,
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn deg(d: f64) -> f64 {
    angle::to_radians(d)
}

/// Samples a trajectory. Yaw offsets are relative to the bearing from the
/// subject to the camera.
pub fn body_state(trajectory: Trajectory, t: f64) -> BodyState {
    let wave = |period: f64, phase: f64| (TAU * t / period + phase).sin();
    let (x, y, body_rel, head_rel, crossed) = match trajectory {
        Trajectory::WalkStraight => (
            2.5 - 0.5 * (TAU * t / 6.0).cos(),
            0.1 * wave(11.0, 0.0),
            deg(10.0) * wave(7.0, 0.0),
            deg(8.0) * wave(5.0, 0.0),
            false,
        ),
        Trajectory::ArmsCrossedWalk => (
            2.5 - 0.5 * (TAU * t / 7.0).cos(),
            -0.15 * wave(13.0, 0.0),
            deg(12.0) * wave(6.0, 0.0),
            deg(10.0) * wave(4.5, 1.0),
            true,
        ),
        Trajectory::SuddenDodge => {
            // a quick 0.3 s sidestep to the opposite side every 4 s
            let k = (t / 4.0).floor();
            let side = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let tau = (t - 4.0 * k - 2.0) / 0.3;
            let y = 0.35 * side * (1.0 - 2.0 * smoothstep(tau));
            let bump = (PI * tau.clamp(0.0, 1.0)).sin();
            (2.5 - 0.45 * (TAU * t / 8.0).cos(), y, -side * deg(25.0) * bump, side * deg(15.0) * bump, false)
        }
        Trajectory::ZigzagHeadTurns => {
            let sharp = (3.0 * wave(3.0, 0.0)).tanh() / 3f64.tanh();
            (
                2.4 - 0.4 * (TAU * t / 8.0).cos(),
                0.45 * sharp,
                deg(20.0) * (TAU * t / 3.0).cos(),
                deg(20.0) * wave(2.2, 0.0),
                false,
            )
        }
    };
    let bearing = (-y).atan2(-x);
    let body_yaw = angle::wrap(bearing + body_rel);
    BodyState {
        position: (x, y),
        body_yaw,
        head_yaw: angle::wrap(body_yaw + head_rel),
        gait_phase: TAU * 0.9 * t,
        arms_crossed: crossed,
    }
}

/// The modelled joints: COCO-17 without the ears.
pub const MODEL_JOINTS: [JointId; 15] = [
    JointId::Nose,
    JointId::EyeL,
    JointId::EyeR,
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
];

const NECK_HEIGHT: f64 = 1.42;

fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// World-frame joints for a body state, in [`MODEL_JOINTS`] order.
pub fn body_joints(state: &BodyState) -> [(JointId, Vec3); 15] {
    let swing = state.gait_phase.sin();
    let bob = 0.01 * swing * swing;
    // body frame: x forward, y left, z up, origin on the floor
    let body = |j: JointId| -> Vec3 {
        let (x, y, z) = match j {
            JointId::ShoulderL => (0.0, 0.18, NECK_HEIGHT),
            JointId::ShoulderR => (0.0, -0.18, NECK_HEIGHT),
            JointId::HipL => (0.0, 0.11, 0.92),
            JointId::HipR => (0.0, -0.11, 0.92),
            JointId::KneeL => (0.06 * swing, 0.11, 0.50),
            JointId::KneeR => (-0.06 * swing, -0.11, 0.50),
            JointId::AnkleL => (0.09 * swing, 0.12, 0.08),
            JointId::AnkleR => (-0.09 * swing, -0.12, 0.08),
            JointId::ElbowL if state.arms_crossed => (0.06, 0.21, 1.10),
            JointId::ElbowR if state.arms_crossed => (0.06, -0.21, 1.10),
            JointId::WristL if state.arms_crossed => (0.15, -0.10, 1.25),
            JointId::WristR if state.arms_crossed => (0.17, 0.10, 1.27),
            JointId::ElbowL => (-0.04 * swing, 0.22, 1.14),
            JointId::ElbowR => (0.04 * swing, -0.22, 1.14),
            JointId::WristL => (-0.10 * swing, 0.24, 0.80),
            JointId::WristR => (0.10 * swing, -0.24, 0.80),
            _ => unreachable!("head joints are placed relative to the neck"),
        };
        Vec3::new(x, y, z)
    };
    // head frame: relative to the neck, rotated by the head yaw
    let head = |j: JointId| -> Vec3 {
        match j {
            JointId::Nose => Vec3::new(0.10, 0.0, 0.14),
            JointId::EyeL => Vec3::new(0.08, 0.032, 0.20),
            JointId::EyeR => Vec3::new(0.08, -0.032, 0.20),
            _ => unreachable!(),
        }
    };
    let origin = Vec3::new(state.position.0, state.position.1, bob);
    let body_rot = rot_z(state.body_yaw);
    let head_rot = rot_z(state.head_yaw);
    let neck = origin + body_rot * Vec3::new(0.0, 0.0, NECK_HEIGHT);
    MODEL_JOINTS.map(|j| {
        let p = match j {
            JointId::Nose | JointId::EyeL | JointId::EyeR => neck + head_rot * head(j),
            _ => origin + body_rot * body(j),
        };
        (j, p)
    })
}

/// One rendered frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub index: usize,
    pub timestamp: f64,
    pub detections: Vec<Skeleton2D>,
    pub depth: DepthFrame,
}

/// A generated scenario: frames are rendered lazily, ground truth is small
/// enough to keep in memory.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub scenario: Scenario,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: Extrinsics,
}

/// Camera-to-world transform for a level camera at `height` looking along +X.
pub fn level_camera(height: f64) -> Extrinsics {
    // columns: camera x (right) -> -Y, camera y (down) -> -Z, camera z -> +X
    let r = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    Extrinsics::new(r, Vec3::new(0.0, 0.0, height)).expect("axis permutation is rigid")
}

pub fn generate(scenario: &Scenario, k: &CameraIntrinsics) -> Result<Synthetic, SynthError> {
    scenario.validate()?;
    k.validate().map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
    Ok(Synthetic { scenario: scenario.clone(), intrinsics: *k, extrinsics: level_camera(scenario.camera_height) })
}

impl Synthetic {
    pub fn frame_count(&self) -> usize {
        self.scenario.frame_count()
    }

    pub fn timestamp(&self, index: usize) -> f64 {
        index as f64 / self.scenario.fps
    }

    pub fn state(&self, index: usize) -> BodyState {
        body_state(self.scenario.trajectory, self.timestamp(index))
    }

    /// Renders frame `index`. Each frame draws from its own RNG stream, so
    /// frames can be produced in any order.
    pub fn frame(&self, index: usize) -> SynthFrame {
        let timestamp = self.timestamp(index);
        let k = &self.intrinsics;
        let noise = self.scenario.noise;
        let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.seed);
        rng.set_stream(index as u64);
        let px_noise = Normal::new(0.0, noise.keypoint_px).expect("validated sigma");
        let mm_noise = Normal::new(0.0, noise.depth_mm).expect("validated sigma");

        let mut depth = DepthFrame::filled(k.width, k.height, BACKGROUND_MM, timestamp);
        let mut keypoints = [Keypoint::ABSENT; COCO_JOINTS];
        let (w, h) = (k.width as i64, k.height as i64);
        for (joint, world) in body_joints(&self.state(index)) {
            let Ok(px) = project(&self.extrinsics.world_to_camera(&world), k) else { continue };
            if !k.contains(px.u, px.v) {
                keypoints[joint.index()] = Keypoint::new(px.u, px.v, 0.0);
                continue;
            }
            let base = px.depth.round().clamp(1.0, u16::MAX as f64);
            let (cu, cv) = (px.u.round() as i64, px.v.round() as i64);
            let r = DISK_RADIUS_PX;
            for y in (cv - r).max(0)..=(cv + r).min(h - 1) {
                for x in (cu - r).max(0)..=(cu + r).min(w - 1) {
                    if (x - cu).pow(2) + (y - cv).pow(2) > r * r {
                        continue;
                    }
                    let d = if noise.depth_mm > 0.0 {
                        (base + mm_noise.sample(&mut rng)).round().clamp(1.0, u16::MAX as f64)
                    } else {
                        base
                    } as u16;
                    if d < depth.get(x as u32, y as u32).expect("clipped to frame") {
                        depth.set(x as u32, y as u32, d);
                    }
                }
            }
            let dropped = noise.dropout > 0.0 && rng.random_bool(noise.dropout);
            let (mut u, mut v) = (px.u, px.v);
            if noise.keypoint_px > 0.0 {
                u += px_noise.sample(&mut rng);
                v += px_noise.sample(&mut rng);
            }
            keypoints[joint.index()] = Keypoint::new(u, v, if dropped { 0.0 } else { KEYPOINT_CONFIDENCE });
        }
        let detection = Skeleton2D { keypoints, timestamp, score: 0.9 };
        SynthFrame { index, timestamp, detections: vec![detection], depth }
    }

    pub fn frames(&self) -> impl Iterator<Item = SynthFrame> + '_ {
        (0..self.frame_count()).map(|i| self.frame(i))
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let records = (0..self.frame_count())
            .map(|i| {
                let state = self.state(i);
                GtRecord {
                    timestamp: self.timestamp(i),
                    joints: body_joints(&state).to_vec(),
                    torso_direction: Some(Vec3::new(state.body_yaw.cos(), state.body_yaw.sin(), 0.0)),
                    gaze_direction: Some(Vec3::new(state.head_yaw.cos(), state.head_yaw.sin(), 0.0)),
                }
            })
            .collect();
        GroundTruth { extrinsics: self.extrinsics, records }
    }

    /// Writes the recording and its ground truth into one directory.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        let mut writer = RecordingWriter::create(dir, &self.intrinsics)?;
        for f in self.frames() {
            writer.write_frame(f.timestamp, &f.detections, &f.depth)?;
        }
        writer.finish()?;
        io::write_ground_truth(dir, &self.ground_truth())?;
        Ok(())
    }
}
