//! Comparison of pipeline output against ground truth.
//!
//! Ground truth lives in the world frame; it is moved into the social frame
//! with the recorded extrinsics before anything is compared. Distances are in
//! meters and angles in radians throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle;
use crate::fov::{fov_test, FovConfig};
use crate::geometry::{CameraPoint, Extrinsics, FrameConvention, GeometryError, SocialPoint, Vec3};
use crate::io::{GroundTruth, GtRecord, ResultRecord};
use crate::orientation::{estimate_orientation, heading_of, DirectionEstimate, DirectionKind};
use crate::skeleton::{JointId, Skeleton3D};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("skeletons share no joints")]
    NoSharedJoints,
    #[error("estimate is not valid")]
    InvalidEstimate,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("result at t={timestamp}: {message}")]
    BadRecord { timestamp: f64, message: String },
}

/// Pairs `(result index, gt index)` whose timestamps differ by at most
/// `tolerance`. Closest pairs are taken first and neither side is used twice.
/// Output is sorted by result index.
pub fn time_align(results: &[f64], gt: &[f64], tolerance: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, &t) in results.iter().enumerate() {
        let start = gt.partition_point(|&g| g < t - tolerance);
        for (j, &g) in gt.iter().enumerate().skip(start) {
            if g > t + tolerance {
                break;
            }
            if (g - t).abs() <= tolerance {
                candidates.push(((g - t).abs(), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_r = vec![false; results.len()];
    let mut used_g = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_r[i] && !used_g[j] {
            used_r[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// World-frame points into the social frame of the camera described by
/// `extrinsics` (camera-to-world).
pub fn apply_extrinsics(
    joints: &[(JointId, Vec3)],
    extrinsics: &Extrinsics,
    conv: &FrameConvention,
) -> Result<Vec<(JointId, SocialPoint)>, EvalError> {
    extrinsics.validate()?;
    Ok(joints.iter().map(|(j, p)| (*j, conv.to_social(&extrinsics.world_to_camera(p)))).collect())
}

/// A world-frame direction expressed in the social frame.
pub fn direction_to_social(d: &Vec3, extrinsics: &Extrinsics, conv: &FrameConvention) -> Vec3 {
    conv.to_social(&CameraPoint(extrinsics.rotation.transpose() * d)).0
}

/// Mean distance over joints present in both skeletons.
pub fn mpjpe(pred: &Skeleton3D, gt: &Skeleton3D) -> Result<f64, EvalError> {
    let (sum, n) = per_joint_errors(pred, gt).fold((0.0, 0usize), |(s, n), (_, e)| (s + e, n + 1));
    if n == 0 {
        Err(EvalError::NoSharedJoints)
    } else {
        Ok(sum / n as f64)
    }
}

fn per_joint_errors<'a>(pred: &'a Skeleton3D, gt: &'a Skeleton3D) -> impl Iterator<Item = (JointId, f64)> + 'a {
    pred.present().filter_map(|(j, p)| gt.get(j).map(|g| (j, p.distance(&g))))
}

pub fn angular_error(pred: &DirectionEstimate, gt_heading: f64) -> Result<f64, EvalError> {
    if !pred.valid {
        return Err(EvalError::InvalidEstimate);
    }
    Ok(heading_error(pred.heading, gt_heading))
}

/// `|wrap(a - b)|`, bitwise symmetric in its arguments.
pub fn heading_error(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    angle::diff(hi, lo).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngularStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl AngularStats {
    pub fn from_errors(mut errors: Vec<f64>) -> Self {
        if errors.is_empty() {
            return Self::default();
        }
        errors.sort_by(f64::total_cmp);
        let n = errors.len();
        let median = if n % 2 == 1 { errors[n / 2] } else { 0.5 * (errors[n / 2 - 1] + errors[n / 2]) };
        Self { count: n, mean: errors.iter().sum::<f64>() / n as f64, median, p95: nearest_rank(&errors, 0.95) }
    }
}

/// Nearest-rank percentile of sorted, non-empty data.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadingErrors {
    pub raw: AngularStats,
    pub smoothed: AngularStats,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub matched: usize,
    pub unmatched_results: usize,
    pub unmatched_gt: usize,
    /// Matched frames where prediction and truth share no joints.
    pub frames_without_joints: usize,
    pub mpjpe_mean: Option<f64>,
    pub mpjpe_per_joint: BTreeMap<String, f64>,
    pub torso: HeadingErrors,
    pub gaze: HeadingErrors,
    /// Fraction of FOV decisions that agree with the truth.
    pub fov_accuracy: Option<f64>,
    pub fov_decisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Seconds.
    pub tolerance: f64,
    pub fov: FovConfig,
    pub conv: FrameConvention,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tolerance: 1.0 / 60.0, fov: FovConfig::default(), conv: FrameConvention::level() }
    }
}

/// Ground truth for one instant, in the social frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialTruth {
    pub skeleton: Skeleton3D,
    pub torso_heading: Option<f64>,
    pub gaze_heading: Option<f64>,
}

fn planar_heading(d: &Vec3) -> Option<f64> {
    (d.x.hypot(d.y) > crate::orientation::DEGENERATE_EPS).then(|| heading_of(d))
}

/// Moves a ground-truth record into the social frame. Headings come from the
/// recorded directions when present, otherwise from the joints.
pub fn social_truth(r: &GtRecord, extrinsics: &Extrinsics, conv: &FrameConvention) -> Result<SocialTruth, EvalError> {
    let skeleton = Skeleton3D::from_joints(r.timestamp, apply_extrinsics(&r.joints, extrinsics, conv)?);
    let from_joints = estimate_orientation(&skeleton);
    let heading = |given: Option<Vec3>, est: DirectionEstimate| match given {
        Some(d) => planar_heading(&direction_to_social(&d, extrinsics, conv)),
        None => est.valid.then_some(est.heading),
    };
    Ok(SocialTruth {
        torso_heading: heading(r.torso_direction, from_joints.torso),
        gaze_heading: heading(r.gaze_direction, from_joints.gaze),
        skeleton,
    })
}

#[derive(Default)]
struct HeadingAcc {
    raw: Vec<f64>,
    smoothed: Vec<f64>,
}

impl HeadingAcc {
    fn push(&mut self, raw: Option<f64>, smoothed: Option<f64>, truth: Option<f64>) {
        let Some(t) = truth else { return };
        if let Some(h) = raw {
            self.raw.push(heading_error(h, t));
        }
        if let Some(h) = smoothed {
            self.smoothed.push(heading_error(h, t));
        }
    }

    fn finish(self) -> HeadingErrors {
        HeadingErrors { raw: AngularStats::from_errors(self.raw), smoothed: AngularStats::from_errors(self.smoothed) }
    }
}

pub fn evaluate(results: &[ResultRecord], gt: &GroundTruth, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let rt: Vec<f64> = results.iter().map(|r| r.timestamp).collect();
    let gt_ts: Vec<f64> = gt.records.iter().map(|r| r.timestamp).collect();
    let pairs = time_align(&rt, &gt_ts, cfg.tolerance);

    let mut report = EvalReport {
        matched: pairs.len(),
        unmatched_results: results.len() - pairs.len(),
        unmatched_gt: gt.records.len() - pairs.len(),
        ..Default::default()
    };
    let mut joint_sums: BTreeMap<JointId, (f64, usize)> = BTreeMap::new();
    let mut frame_mpjpe = Vec::new();
    let (mut torso, mut gaze) = (HeadingAcc::default(), HeadingAcc::default());
    let (mut fov_agree, mut fov_total) = (0usize, 0usize);

    for (i, j) in pairs {
        let r = &results[i];
        let truth = social_truth(&gt.records[j], &gt.extrinsics, &cfg.conv)?;
        let pred = r.skeleton().map_err(|message| EvalError::BadRecord { timestamp: r.timestamp, message })?;
        match mpjpe(&pred, &truth.skeleton) {
            Ok(e) => {
                frame_mpjpe.push(e);
                for (joint, err) in per_joint_errors(&pred, &truth.skeleton) {
                    let s = joint_sums.entry(joint).or_default();
                    s.0 += err;
                    s.1 += 1;
                }
            }
            Err(_) => report.frames_without_joints += 1,
        }
        torso.push(r.torso.raw_heading, r.torso.smoothed_heading, truth.torso_heading);
        gaze.push(r.gaze.raw_heading, r.gaze.smoothed_heading, truth.gaze_heading);

        if let (Some(decided), Some(h), Some(pelvis)) = (r.fov, truth.gaze_heading, truth.skeleton.get(JointId::Pelvis))
        {
            let g = DirectionEstimate::from_heading(DirectionKind::Gaze, h, Vec3::zeros());
            if let Ok(expected) = fov_test(&g, &pelvis, &SocialPoint::new(0.0, 0.0, 0.0), &cfg.fov) {
                fov_total += 1;
                fov_agree += (expected.inside == decided.inside) as usize;
            }
        }
    }

    report.mpjpe_mean = (!frame_mpjpe.is_empty()).then(|| frame_mpjpe.iter().sum::<f64>() / frame_mpjpe.len() as f64);
    report.mpjpe_per_joint = joint_sums.into_iter().map(|(j, (s, n))| (j.name().to_owned(), s / n as f64)).collect();
    report.torso = torso.finish();
    report.gaze = gaze.finish();
    report.fov_decisions = fov_total;
    report.fov_accuracy = (fov_total > 0).then(|| fov_agree as f64 / fov_total as f64);
    Ok(report)
}

impl EvalReport {
    /// Human-readable summary; lengths in millimeters, angles in degrees.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "matched frames     {}", self.matched);
        let _ = writeln!(s, "unmatched results  {}", self.unmatched_results);
        let _ = writeln!(s, "unmatched truth    {}", self.unmatched_gt);
        match self.mpjpe_mean {
            Some(m) => {
                let _ = writeln!(s, "MPJPE (mm)         {:.3}", m * 1000.0);
            }
            None => {
                let _ = writeln!(s, "MPJPE (mm)         -");
            }
        }
        for (joint, e) in &self.mpjpe_per_joint {
            let _ = writeln!(s, "  {joint:<16} {:.3}", e * 1000.0);
        }
        let _ = writeln!(s, "heading error (deg)      n      mean    median       p95");
        for (name, h) in [("torso", &self.torso), ("gaze", &self.gaze)] {
            for (which, st) in [("raw", &h.raw), ("smoothed", &h.smoothed)] {
                let _ = writeln!(
                    s,
                    "  {:<16} {:>8} {:>9.3} {:>9.3} {:>9.3}",
                    format!("{name} {which}"),
                    st.count,
                    angle::to_degrees(st.mean),
                    angle::to_degrees(st.median),
                    angle::to_degrees(st.p95)
                );
            }
        }
        match self.fov_accuracy {
            Some(a) => {
                let _ = writeln!(s, "FOV accuracy       {:.4} ({} decisions)", a, self.fov_decisions);
            }
            None => {
                let _ = writeln!(s, "FOV accuracy       -");
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayArrow {
    pub kind: DirectionKind,
    pub color: String,
    /// Social-frame start point (pelvis for torso, neck for gaze).
    pub origin: [f64; 3],
    /// Planar unit direction.
    pub direction: [f64; 3],
    pub smoothed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayFrame {
    pub timestamp: f64,
    pub track_id: u64,
    pub arrows: Vec<OverlayArrow>,
    pub fov_inside: Option<bool>,
}

pub const GAZE_COLOR: &str = "red";
pub const TORSO_COLOR: &str = "green";

/// Plot-ready arrows for one result line.
pub fn overlay_frame(r: &ResultRecord) -> OverlayFrame {
    let s = r.skeleton().unwrap_or_else(|_| Skeleton3D::empty(r.timestamp));
    let mut arrows = Vec::new();
    let mut add = |kind: DirectionKind, anchor: JointId, heading: Option<f64>, smoothed: bool| {
        if let (Some(h), Some(p)) = (heading, s.get(anchor)) {
            arrows.push(OverlayArrow {
                kind,
                color: if kind == DirectionKind::Gaze { GAZE_COLOR } else { TORSO_COLOR }.to_owned(),
                origin: [p.x(), p.y(), p.z()],
                direction: [h.cos(), h.sin(), 0.0],
                smoothed,
            });
        }
    };
    add(DirectionKind::Torso, JointId::Pelvis, r.torso.raw_heading, false);
    add(DirectionKind::Torso, JointId::Pelvis, r.torso.smoothed_heading, true);
    add(DirectionKind::Gaze, JointId::Neck, r.gaze.raw_heading, false);
    add(DirectionKind::Gaze, JointId::Neck, r.gaze.smoothed_heading, true);
    OverlayFrame { timestamp: r.timestamp, track_id: r.track_id, arrows, fov_inside: r.fov.map(|f| f.inside) }
}

pub fn write_overlay<'a, W: Write>(
    records: impl IntoIterator<Item = &'a ResultRecord>,
    mut out: W,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &overlay_frame(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Rotation3};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn align_examples() {
        let gt: Vec<f64> = (0..90).map(|i| i as f64 / 30.0).collect();
        assert_eq!(time_align(&gt, &gt, 1.0 / 60.0).len(), 90);
        let shifted: Vec<f64> = gt.iter().map(|t| t + 0.010).collect();
        let pairs = time_align(&shifted, &gt, 1.0 / 60.0);
        assert_eq!(pairs.len(), 90);
        assert!(pairs.iter().all(|(i, j)| i == j));
        // a 20 ms shift is outside the tolerance of the entry it came from; at
        // 30 fps it would land within 13 ms of the next one, so the truth
        // stream here is sparse
        let sparse: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let late: Vec<f64> = sparse.iter().map(|t| t + 0.020).collect();
        assert!(time_align(&late, &sparse, 1.0 / 60.0).is_empty());
        assert_eq!(time_align(&late, &sparse, 0.0).len(), 0);
        assert_eq!(time_align(&sparse, &sparse, 0.0).len(), 10);
    }

    #[test]
    fn align_prefers_the_closest_pair() {
        let pairs = time_align(&[0.0, 0.012], &[0.01], 0.02);
        assert_eq!(pairs, vec![(1, 0)]);
    }

    proptest! {
        #[test]
        fn align_is_injective(mut r in prop::collection::vec(0.0..5.0f64, 0..60), mut g in prop::collection::vec(0.0..5.0f64, 0..60), tol in 0.0..0.3f64) {
            r.sort_by(f64::total_cmp);
            g.sort_by(f64::total_cmp);
            let pairs = time_align(&r, &g, tol);
            let mut seen_r = std::collections::HashSet::new();
            let mut seen_g = std::collections::HashSet::new();
            for (i, j) in pairs {
                prop_assert!(seen_r.insert(i));
                prop_assert!(seen_g.insert(j));
                prop_assert!((r[i] - g[j]).abs() <= tol);
            }
        }

        #[test]
        fn angular_error_is_symmetric(a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let e = heading_error(a, b);
            prop_assert_eq!(e, heading_error(b, a));
            prop_assert!((0.0..=PI).contains(&e));
        }

        #[test]
        fn rigid_extrinsics_preserve_distances(
            axis in prop::array::uniform3(-1.0..1.0f64),
            ang in -PI..PI,
            t in prop::array::uniform3(-5.0..5.0f64),
            pts in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 2..8),
        ) {
            let axis = Vec3::from(axis);
            prop_assume!(axis.norm() > 1e-3);
            let r: Matrix3<f64> = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), ang).into_inner();
            let e = Extrinsics::new(r, Vec3::from(t)).unwrap();
            let joints: Vec<(JointId, Vec3)> = pts.iter().enumerate().map(|(i, p)| (JointId::ALL[i], Vec3::from(*p))).collect();
            let out = apply_extrinsics(&joints, &e, &FrameConvention::level()).unwrap();
            for a in 0..joints.len() {
                for b in 0..joints.len() {
                    let before = (joints[a].1 - joints[b].1).norm();
                    let after = out[a].1.distance(&out[b].1);
                    prop_assert!((before - after).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn mpjpe_matches_hand_sum(
            pred in prop::collection::vec(prop::option::of(prop::array::uniform3(-2.0..2.0f64)), 17),
            gt in prop::collection::vec(prop::option::of(prop::array::uniform3(-2.0..2.0f64)), 17),
        ) {
            let coco = JointId::coco();
            let build = |v: &[Option<[f64; 3]>]| Skeleton3D::from_joints(0.0, v.iter().enumerate().filter_map(|(i, p)| p.map(|p| (coco[i], SocialPoint(Vec3::from(p))))));
            let (ps, gs) = (build(&pred), build(&gt));
            let mut sum = 0.0;
            let mut n = 0;
            for j in JointId::ALL {
                if let (Some(a), Some(b)) = (ps.get(j), gs.get(j)) {
                    sum += ((a.x() - b.x()).powi(2) + (a.y() - b.y()).powi(2) + (a.z() - b.z()).powi(2)).sqrt();
                    n += 1;
                }
            }
            match mpjpe(&ps, &gs) {
                Ok(m) => prop_assert!((m - sum / n as f64).abs() < 1e-12),
                Err(e) => { prop_assert_eq!(n, 0); prop_assert_eq!(e, EvalError::NoSharedJoints); }
            }
        }
    }

    #[test]
    fn extrinsics_examples() {
        let joints = vec![(JointId::Nose, Vec3::new(1.0, 2.0, 3.0))];
        let id = apply_extrinsics(&joints, &Extrinsics::identity(), &FrameConvention::level()).unwrap();
        assert_eq!(id[0].1 .0, Vec3::new(3.0, -1.0, -2.0));
        let shifted = Extrinsics::new(Matrix3::identity(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let s = apply_extrinsics(&joints, &shifted, &FrameConvention::level()).unwrap();
        assert_eq!(s[0].1 .0, Vec3::new(3.0, 0.0, -2.0));
        let bad = Extrinsics { rotation: Matrix3::identity() * 2.0, translation: Vec3::zeros() };
        assert!(matches!(apply_extrinsics(&joints, &bad, &FrameConvention::level()), Err(EvalError::Geometry(_))));
    }

    #[test]
    fn mpjpe_examples() {
        let a = Skeleton3D::from_joints(
            0.0,
            [(JointId::Nose, SocialPoint::new(1.0, 0.0, 0.0)), (JointId::HipL, SocialPoint::new(0.0, 1.0, 0.0))],
        );
        assert_eq!(mpjpe(&a, &a).unwrap(), 0.0);
        let b = a.map_points(|p| SocialPoint(p.0 + Vec3::new(0.1, 0.0, 0.0)));
        assert!((mpjpe(&b, &a).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mpjpe(&a, &Skeleton3D::empty(0.0)), Err(EvalError::NoSharedJoints));
    }

    #[test]
    fn angular_error_examples() {
        let est = |h| DirectionEstimate::from_heading(DirectionKind::Gaze, h, Vec3::zeros());
        assert_eq!(angular_error(&est(0.3), 0.3).unwrap(), 0.0);
        assert!(angular_error(&est(PI), -PI).unwrap() < 1e-15);
        assert!((angular_error(&est(0.1), -0.1).unwrap() - 0.2).abs() < 1e-15);
        let invalid = DirectionEstimate::invalid(DirectionKind::Gaze, Vec3::zeros());
        assert_eq!(angular_error(&invalid, 0.0), Err(EvalError::InvalidEstimate));
    }

    #[test]
    fn stats() {
        let s = AngularStats::from_errors((1..=20).map(|i| i as f64).collect());
        assert_eq!(s.count, 20);
        assert_eq!(s.mean, 10.5);
        assert_eq!(s.median, 10.5);
        assert_eq!(s.p95, 19.0);
        assert_eq!(AngularStats::from_errors(vec![]), AngularStats::default());
        assert_eq!(nearest_rank(&[4.0], 0.95), 4.0);
    }

    #[test]
    fn empty_results_give_zero_matches() {
        let gt = GroundTruth {
            extrinsics: Extrinsics::identity(),
            records: vec![GtRecord { timestamp: 0.0, joints: vec![], torso_direction: None, gaze_direction: None }],
        };
        let r = evaluate(&[], &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.matched, 0);
        assert_eq!(r.unmatched_gt, 1);
        assert_eq!(r.mpjpe_mean, None);
        assert_eq!(r.fov_accuracy, None);
        assert!(r.table().contains("matched frames     0"));
    }

    #[test]
    fn overlay_colors() {
        use crate::io::HeadingRecord;
        let s = Skeleton3D::from_joints(
            1.0,
            [
                (JointId::ShoulderL, SocialPoint::new(2.0, 0.2, 0.2)),
                (JointId::ShoulderR, SocialPoint::new(2.0, -0.2, 0.2)),
                (JointId::HipL, SocialPoint::new(2.0, 0.1, -0.3)),
                (JointId::HipR, SocialPoint::new(2.0, -0.1, -0.3)),
            ],
        );
        let h = HeadingRecord { valid: true, raw_heading: Some(PI), smoothed_heading: Some(3.1), quaternion: None };
        let mut r = ResultRecord {
            timestamp: 1.0,
            track_id: 0,
            joints3d: Default::default(),
            torso: h.clone(),
            gaze: h,
            fov: None,
        };
        r.set_skeleton(&s);
        let f = overlay_frame(&r);
        assert_eq!(f.arrows.len(), 4);
        for a in &f.arrows {
            let want = if a.kind == DirectionKind::Gaze { "red" } else { "green" };
            assert_eq!(a.color, want);
        }
        let mut buf = Vec::new();
        write_overlay([&r], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("\"red\""));
    }
}
