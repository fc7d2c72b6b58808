//! Per-frame composition: lift, orient, track and smooth, then test FOV.

use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::fov::{sees_camera, FovConfig};
use crate::geometry::{CameraIntrinsics, FrameConvention};
use crate::io::{FormatError, FovRecord, HeadingRecord, Recording, ResultRecord};
use crate::orientation::{estimate_orientation, DirectionEstimate};
use crate::skeleton::{lift_skeleton, DepthFrame, JointId, LiftParams, Skeleton2D};
use crate::smoothing::{TrackedPerson, Tracker};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write results: {0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub frames: usize,
    pub records: usize,
    pub tracks: u64,
    pub raw_gaze_valid: usize,
    pub raw_torso_valid: usize,
}

impl RunStats {
    pub fn gaze_valid_fraction(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.raw_gaze_valid as f64 / self.records as f64
        }
    }
}

pub struct Pipeline {
    intrinsics: CameraIntrinsics,
    conv: FrameConvention,
    lift: LiftParams,
    fov: FovConfig,
    tracker: Tracker,
    stats: RunStats,
}

fn heading_record(raw: &DirectionEstimate, smoothed: &DirectionEstimate) -> HeadingRecord {
    HeadingRecord {
        valid: raw.valid,
        raw_heading: raw.valid.then_some(raw.heading),
        smoothed_heading: smoothed.valid.then_some(smoothed.heading),
        quaternion: raw.valid.then(|| raw.quaternion.into()),
    }
}

impl Pipeline {
    pub fn new(intrinsics: CameraIntrinsics, config: &Config) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            intrinsics,
            conv: config.frame_convention()?,
            lift: config.lift,
            fov: config.fov_config()?,
            tracker: Tracker::new(config.track, config.kalman),
            stats: RunStats::default(),
        })
    }

    pub fn stats(&self) -> RunStats {
        RunStats { tracks: self.tracker.tracks_created(), ..self.stats }
    }

    /// Runs one frame and returns one record per tracked person, ordered by
    /// track id. Frames must arrive in timestamp order.
    pub fn process_frame(
        &mut self,
        timestamp: f64,
        detections: &[Skeleton2D],
        depth: &DepthFrame,
    ) -> Vec<ResultRecord> {
        let people = detections
            .iter()
            .map(|d| {
                let s = lift_skeleton(d, depth, &self.intrinsics, &self.conv, &self.lift);
                let o = estimate_orientation(&s);
                (s, o)
            })
            .collect();
        let tracked = self.tracker.step(timestamp, people);
        self.stats.frames += 1;
        tracked.iter().map(|p| self.record(timestamp, p)).collect()
    }

    fn record(&mut self, timestamp: f64, p: &TrackedPerson) -> ResultRecord {
        self.stats.records += 1;
        self.stats.raw_gaze_valid += p.raw.gaze.valid as usize;
        self.stats.raw_torso_valid += p.raw.torso.valid as usize;
        let fov = p
            .skeleton
            .get(JointId::Pelvis)
            .and_then(|pelvis| sees_camera(&p.smoothed.gaze, &pelvis, &self.fov).ok())
            .map(|r| FovRecord { inside: r.inside, offset: r.angular_offset });
        let mut record = ResultRecord {
            timestamp,
            track_id: p.track_id,
            joints3d: Default::default(),
            torso: heading_record(&p.raw.torso, &p.smoothed.torso),
            gaze: heading_record(&p.raw.gaze, &p.smoothed.gaze),
            fov,
        };
        record.set_skeleton(&p.skeleton);
        record
    }
}

/// Streams a recording through the pipeline, handing each record to `sink`
/// in frame order.
pub fn process_recording(
    recording: &Recording,
    config: &Config,
    mut sink: impl FnMut(&ResultRecord) -> std::io::Result<()>,
) -> Result<RunStats, ProcessError> {
    let mut pipeline = Pipeline::new(recording.intrinsics, config)?;
    for frame in recording.frames()? {
        let frame = frame?;
        let depth = recording.load_depth(&frame)?;
        for r in pipeline.process_frame(frame.timestamp, &frame.detections, &depth) {
            sink(&r)?;
        }
    }
    Ok(pipeline.stats())
}
