//! Per-person tracks and Kalman smoothing of torso and gaze headings.
//!
//! Each heading gets its own constant-velocity filter over `(θ, ω)` with
//! white-noise angular acceleration. The filter lives on the circle's chart:
//! the innovation is wrapped to `(-π, π]` before the gain is applied and the
//! heading is re-wrapped after every step.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::geometry::{SocialPoint, Vec3};
use crate::orientation::{DirectionEstimate, DirectionKind, Orientation};
use crate::skeleton::{JointId, Skeleton3D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanParams {
    /// Process noise intensity, rad²/s³.
    pub q: f64,
    /// Measurement variance, rad².
    pub r: f64,
    /// Initial heading variance, rad².
    pub p0_heading: f64,
    /// Initial rate variance, rad²/s².
    pub p0_rate: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self { q: 0.5, r: 0.01, p0_heading: 0.5, p0_rate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingFilter {
    pub heading: f64,
    pub rate: f64,
    pub covariance: Matrix2<f64>,
    pub params: KalmanParams,
    /// Time of the last predict or update, seconds.
    pub last_update: f64,
}

impl HeadingFilter {
    /// Starts at the first measurement with zero angular rate.
    pub fn new(heading: f64, timestamp: f64, params: KalmanParams) -> Self {
        Self {
            heading: angle::wrap(heading),
            rate: 0.0,
            covariance: Matrix2::new(params.p0_heading, 0.0, 0.0, params.p0_rate),
            params,
            last_update: timestamp,
        }
    }

    pub fn state(&self) -> Vector2<f64> {
        Vector2::new(self.heading, self.rate)
    }

    /// Constant-velocity prediction over `dt` seconds. Negative steps are
    /// treated as zero.
    pub fn predict(&mut self, dt: f64) {
        let dt = dt.max(0.0);
        if dt == 0.0 {
            return;
        }
        let f = Matrix2::new(1.0, dt, 0.0, 1.0);
        let q = self.params.q;
        let dt2 = dt * dt;
        let process = Matrix2::new(q * dt2 * dt / 3.0, q * dt2 / 2.0, q * dt2 / 2.0, q * dt);
        self.heading = angle::wrap(self.heading + self.rate * dt);
        self.covariance = symmetrize(f * self.covariance * f.transpose() + process);
        self.last_update += dt;
    }

    /// Predicts forward to `timestamp`.
    pub fn advance_to(&mut self, timestamp: f64) {
        self.predict(timestamp - self.last_update);
        self.last_update = self.last_update.max(timestamp);
    }

    /// Kalman update with a heading measurement (`H = [1, 0]`).
    pub fn update(&mut self, measured_heading: f64) {
        let p = self.covariance;
        let s = p[(0, 0)] + self.params.r;
        let gain = Vector2::new(p[(0, 0)] / s, p[(1, 0)] / s);
        let innovation = angle::diff(measured_heading, self.heading);
        self.heading = angle::wrap(self.heading + gain[0] * innovation);
        self.rate += gain[1] * innovation;
        // Joseph form keeps P symmetric PSD under rounding
        let i_kh = Matrix2::new(1.0 - gain[0], 0.0, -gain[1], 1.0);
        self.covariance = symmetrize(i_kh * p * i_kh.transpose() + gain * gain.transpose() * self.params.r);
    }
}

fn symmetrize(m: Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackParams {
    /// Association gate on planar pelvis distance, meters.
    pub gate_m: f64,
    /// A track unseen for more than this many frames is dropped.
    pub expiry_frames: u32,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self { gate_m: 0.75, expiry_frames: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub track_id: u64,
    pub last_pelvis: SocialPoint,
    pub torso_filter: Option<HeadingFilter>,
    pub gaze_filter: Option<HeadingFilter>,
    pub frames_since_seen: u32,
}

impl TrackState {
    pub fn new(track_id: u64, pelvis: SocialPoint) -> Self {
        Self { track_id, last_pelvis: pelvis, torso_filter: None, gaze_filter: None, frames_since_seen: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("skeleton {0} has no pelvis")]
pub struct MissingPelvis(pub usize);

/// Result of matching skeletons to existing tracks. Indices refer to the
/// input slices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track index, skeleton index)`, in the order they were accepted.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    /// Skeletons that should spawn new tracks.
    pub unmatched_skeletons: Vec<usize>,
    pub skipped: Vec<MissingPelvis>,
}

/// Greedy nearest-neighbour association on planar pelvis distance. All
/// candidate pairs within the gate are sorted globally by distance and
/// accepted while both sides are still free.
pub fn associate(tracks: &[TrackState], skeletons: &[Skeleton3D], gate: f64) -> Association {
    let mut out = Association::default();
    let mut pelvises = Vec::with_capacity(skeletons.len());
    for (i, s) in skeletons.iter().enumerate() {
        match s.get(JointId::Pelvis) {
            Some(p) => pelvises.push((i, p)),
            None => out.skipped.push(MissingPelvis(i)),
        }
    }

    let mut candidates = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for &(si, p) in &pelvises {
            let d = t.last_pelvis.planar_distance(&p);
            if d <= gate {
                candidates.push((d, ti, si));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut track_used = vec![false; tracks.len()];
    let mut skel_used = vec![false; skeletons.len()];
    for (_, ti, si) in candidates {
        if !track_used[ti] && !skel_used[si] {
            track_used[ti] = true;
            skel_used[si] = true;
            out.matches.push((ti, si));
        }
    }
    out.unmatched_tracks = (0..tracks.len()).filter(|&i| !track_used[i]).collect();
    out.unmatched_skeletons = pelvises.iter().map(|&(i, _)| i).filter(|&i| !skel_used[i]).collect();
    out
}

/// Filtered counterparts of a raw [`Orientation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedOrientation {
    pub torso: DirectionEstimate,
    pub gaze: DirectionEstimate,
}

fn step_filter(
    filter: &mut Option<HeadingFilter>,
    measurement: &DirectionEstimate,
    timestamp: f64,
    params: KalmanParams,
) -> DirectionEstimate {
    match filter {
        Some(f) => {
            f.advance_to(timestamp);
            if measurement.valid {
                f.update(measurement.heading);
            }
        }
        None if measurement.valid => *filter = Some(HeadingFilter::new(measurement.heading, timestamp, params)),
        None => {}
    }
    match filter {
        Some(f) => {
            let normal = if measurement.valid { measurement.raw_normal } else { Vec3::zeros() };
            DirectionEstimate::from_heading(measurement.kind, f.heading, normal)
        }
        None => DirectionEstimate::invalid(measurement.kind, measurement.raw_normal),
    }
}

/// Predicts both filters to `timestamp` and folds in whichever measurements
/// are valid; invalid ones are coasted through.
pub fn step_track(
    track: &mut TrackState,
    torso: &DirectionEstimate,
    gaze: &DirectionEstimate,
    timestamp: f64,
    params: KalmanParams,
) -> SmoothedOrientation {
    debug_assert_eq!(torso.kind, DirectionKind::Torso);
    debug_assert_eq!(gaze.kind, DirectionKind::Gaze);
    SmoothedOrientation {
        torso: step_filter(&mut track.torso_filter, torso, timestamp, params),
        gaze: step_filter(&mut track.gaze_filter, gaze, timestamp, params),
    }
}

/// One person observed in one frame, after association and smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPerson {
    pub track_id: u64,
    pub skeleton: Skeleton3D,
    pub raw: Orientation,
    pub smoothed: SmoothedOrientation,
}

/// Owns all live tracks.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub track: TrackParams,
    pub kalman: KalmanParams,
    tracks: Vec<TrackState>,
    next_id: u64,
}

impl Tracker {
    pub fn new(track: TrackParams, kalman: KalmanParams) -> Self {
        Self { track, kalman, tracks: Vec::new(), next_id: 0 }
    }

    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Total number of tracks ever created.
    pub fn tracks_created(&self) -> u64 {
        self.next_id
    }

    /// Advances every track by one frame. Output is ordered by track id.
    pub fn step(&mut self, timestamp: f64, people: Vec<(Skeleton3D, Orientation)>) -> Vec<TrackedPerson> {
        let skeletons: Vec<Skeleton3D> = people.iter().map(|(s, _)| s.clone()).collect();
        let assoc = associate(&self.tracks, &skeletons, self.track.gate_m);

        let mut out = Vec::with_capacity(people.len());
        let mut observe = |track: &mut TrackState, si: usize, kalman: KalmanParams| {
            let (skeleton, raw) = &people[si];
            let pelvis = skeleton.get(JointId::Pelvis).expect("associated skeletons have a pelvis");
            track.last_pelvis = pelvis;
            track.frames_since_seen = 0;
            let smoothed = step_track(track, &raw.torso, &raw.gaze, timestamp, kalman);
            let mut skeleton = skeleton.clone();
            skeleton.track_id = Some(track.track_id);
            out.push(TrackedPerson { track_id: track.track_id, skeleton, raw: *raw, smoothed });
        };

        for &(ti, si) in &assoc.matches {
            observe(&mut self.tracks[ti], si, self.kalman);
        }
        for &ti in &assoc.unmatched_tracks {
            self.tracks[ti].frames_since_seen += 1;
        }
        let expiry = self.track.expiry_frames;
        self.tracks.retain(|t| t.frames_since_seen <= expiry);

        for &si in &assoc.unmatched_skeletons {
            let pelvis = skeletons[si].get(JointId::Pelvis).expect("unmatched skeletons have a pelvis");
            let mut track = TrackState::new(self.next_id, pelvis);
            self.next_id += 1;
            observe(&mut track, si, self.kalman);
            self.tracks.push(track);
        }
        out.sort_by_key(|p| p.track_id);
        out
    }
}
