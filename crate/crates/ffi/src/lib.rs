//! C ABI for posefov.
//!
//! Every function returns a [`PosefovStatus`]. On failure a description is
//! kept per thread and can be read with [`posefov_last_error_message`].
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`posefov_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use posefov::config::Config;
use posefov::fov::{fov_test, FovConfig};
use posefov::orientation::{estimate_orientation, DirectionKind};
use posefov::pipeline::Pipeline;
use posefov::skeleton::COCO_JOINTS;
use posefov::{
    backproject, camera_to_social, CameraIntrinsics, DepthFrame, DirectionEstimate, FrameConvention, JointId, Keypoint,
    Skeleton2D, Skeleton3D, SocialPoint, Vec3,
};
use serde::Deserialize;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosefovStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    InvalidJson = 4,
    InvalidConfig = 5,
    Geometry = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosefovIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// One heading estimate; fields other than `valid` are meaningful only when
/// `valid` is true.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosefovDirection {
    pub valid: bool,
    /// Radians in (-π, π].
    pub heading: f64,
    /// Planar unit vector in the social frame.
    pub direction: [f64; 3],
    /// `[w, x, y, z]`.
    pub quaternion: [f64; 4],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosefovOrientation {
    pub torso: PosefovDirection,
    pub gaze: PosefovDirection,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosefovFovResult {
    pub inside: bool,
    /// Radians in [0, π].
    pub angular_offset: f64,
}

/// Opaque per-stream state: tracks and their heading filters.
pub struct PosefovPipeline {
    inner: Pipeline,
    width: u32,
    height: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

type FfiResult = Result<(), (PosefovStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult) -> PosefovStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PosefovStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PosefovStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), (PosefovStatus, String)> {
    if p.is_null() {
        Err((PosefovStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn intrinsics(k: &PosefovIntrinsics) -> Result<CameraIntrinsics, (PosefovStatus, String)> {
    CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)
        .map_err(|e| (PosefovStatus::InvalidArgument, e.to_string()))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (PosefovStatus, String)> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|e| (PosefovStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn direction(e: &DirectionEstimate) -> PosefovDirection {
    let q = e.quaternion;
    PosefovDirection {
        valid: e.valid,
        heading: e.heading,
        direction: [e.direction.x, e.direction.y, e.direction.z],
        quaternion: [q.w, q.x, q.y, q.z],
    }
}

/// Description of the last failure on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn posefov_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Back-projects pixel `(u, v)` at `depth_mm` into the camera frame, meters.
///
/// # Safety
/// `k` must point to a valid struct and `out` to three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn posefov_backproject(
    k: *const PosefovIntrinsics,
    u: f64,
    v: f64,
    depth_mm: f64,
    out: *mut f64,
) -> PosefovStatus {
    guard(|| {
        non_null(k, "k")?;
        non_null(out, "out")?;
        let k = intrinsics(&*k)?;
        let p = backproject(u, v, depth_mm, &k).map_err(|e| (PosefovStatus::Geometry, e.to_string()))?;
        ptr::copy_nonoverlapping([p.x(), p.y(), p.z()].as_ptr(), out, 3);
        Ok(())
    })
}

/// Camera-frame point to the level social frame (X forward, Y left, Z up).
///
/// # Safety
/// `camera` must point to three readable doubles and `out` to three writable
/// ones.
#[no_mangle]
pub unsafe extern "C" fn posefov_camera_to_social(camera: *const f64, out: *mut f64) -> PosefovStatus {
    guard(|| {
        non_null(camera, "camera")?;
        non_null(out, "out")?;
        let c = std::slice::from_raw_parts(camera, 3);
        let s = camera_to_social(&posefov::CameraPoint::new(c[0], c[1], c[2]), &FrameConvention::level());
        ptr::copy_nonoverlapping([s.x(), s.y(), s.z()].as_ptr(), out, 3);
        Ok(())
    })
}

/// Torso and gaze headings from the 17 COCO joints, social frame.
/// `points` holds 17 `xyz` triples in COCO order; `present[i] == 0` marks
/// joint `i` as missing.
///
/// # Safety
/// `points` must point to 51 readable doubles, `present` to 17 readable bytes
/// and `out` to a writable struct.
#[no_mangle]
pub unsafe extern "C" fn posefov_estimate_orientation(
    points: *const f64,
    present: *const u8,
    out: *mut PosefovOrientation,
) -> PosefovStatus {
    guard(|| {
        non_null(points, "points")?;
        non_null(present, "present")?;
        non_null(out, "out")?;
        let pts = std::slice::from_raw_parts(points, COCO_JOINTS * 3);
        let mask = std::slice::from_raw_parts(present, COCO_JOINTS);
        let joints = JointId::coco()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[*i] != 0)
            .map(|(i, &j)| (j, SocialPoint::new(pts[3 * i], pts[3 * i + 1], pts[3 * i + 2])));
        let o = estimate_orientation(&Skeleton3D::from_joints(0.0, joints.collect::<Vec<_>>()));
        *out = PosefovOrientation { torso: direction(&o.torso), gaze: direction(&o.gaze) };
        Ok(())
    })
}

/// Whether `target` is inside the horizontal field of view of a person at
/// `subject` looking along `gaze_heading` (radians).
///
/// # Safety
/// `subject` and `target` must point to three readable doubles each and
/// `out` to a writable struct.
#[no_mangle]
pub unsafe extern "C" fn posefov_fov_test(
    gaze_heading: f64,
    subject: *const f64,
    target: *const f64,
    fov_deg: f64,
    out: *mut PosefovFovResult,
) -> PosefovStatus {
    guard(|| {
        non_null(subject, "subject")?;
        non_null(target, "target")?;
        non_null(out, "out")?;
        if !gaze_heading.is_finite() {
            return Err((PosefovStatus::InvalidArgument, "gaze_heading is not finite".into()));
        }
        let cfg = FovConfig::from_degrees(fov_deg).map_err(|e| (PosefovStatus::InvalidArgument, e.to_string()))?;
        let (s, t) = (std::slice::from_raw_parts(subject, 3), std::slice::from_raw_parts(target, 3));
        let gaze = DirectionEstimate::from_heading(DirectionKind::Gaze, gaze_heading, Vec3::zeros());
        let r = fov_test(&gaze, &SocialPoint::new(s[0], s[1], s[2]), &SocialPoint::new(t[0], t[1], t[2]), &cfg)
            .map_err(|e| (PosefovStatus::InvalidArgument, e.to_string()))?;
        *out = PosefovFovResult { inside: r.inside, angular_offset: r.angular_offset };
        Ok(())
    })
}

/// Creates a pipeline. `config_json` may be null for the defaults.
///
/// # Safety
/// `k` must point to a valid struct, `config_json` must be null or a
/// NUL-terminated string, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn posefov_pipeline_new(
    k: *const PosefovIntrinsics,
    config_json: *const c_char,
    out: *mut *mut PosefovPipeline,
) -> PosefovStatus {
    guard(|| {
        non_null(k, "k")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let k = intrinsics(&*k)?;
        let cfg = if config_json.is_null() {
            Config::default()
        } else {
            Config::from_json_str(c_str(config_json, "config_json")?)
                .map_err(|e| (PosefovStatus::InvalidConfig, e.to_string()))?
        };
        let inner = Pipeline::new(k, &cfg).map_err(|e| (PosefovStatus::InvalidConfig, e.to_string()))?;
        *out = Box::into_raw(Box::new(PosefovPipeline { inner, width: k.width, height: k.height }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a pointer from [`posefov_pipeline_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn posefov_pipeline_free(p: *mut PosefovPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Detection {
    score: f64,
    keypoints: [Keypoint; COCO_JOINTS],
}

/// Runs one frame. `detections_json` is an array of
/// `{"score": s, "keypoints": [[u, v, c], ...17]}`; `depth` holds
/// `width * height` millimeter values, row-major. On success `*out_json`
/// receives a JSON array with one result object per tracked person.
///
/// # Safety
/// `p` must be a live pipeline, `detections_json` a NUL-terminated string,
/// `depth` must point to `depth_len` readable values and `out_json` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn posefov_pipeline_process_frame(
    p: *mut PosefovPipeline,
    timestamp: f64,
    detections_json: *const c_char,
    depth: *const u16,
    depth_len: usize,
    out_json: *mut *mut c_char,
) -> PosefovStatus {
    guard(|| {
        non_null(p, "p")?;
        non_null(depth, "depth")?;
        non_null(out_json, "out_json")?;
        *out_json = ptr::null_mut();
        let p = &mut *p;
        if !timestamp.is_finite() {
            return Err((PosefovStatus::InvalidArgument, "timestamp is not finite".into()));
        }
        let expected = p.width as usize * p.height as usize;
        if depth_len != expected {
            return Err((PosefovStatus::InvalidArgument, format!("depth has {depth_len} values, expected {expected}")));
        }
        let dets: Vec<Detection> = serde_json::from_str(c_str(detections_json, "detections_json")?)
            .map_err(|e| (PosefovStatus::InvalidJson, e.to_string()))?;
        let dets: Vec<Skeleton2D> = dets
            .into_iter()
            .map(|d| {
                let s = Skeleton2D { keypoints: d.keypoints, timestamp, score: d.score };
                s.validate().map(|_| s)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| (PosefovStatus::InvalidArgument, e))?;
        let frame =
            DepthFrame::new(p.width, p.height, std::slice::from_raw_parts(depth, depth_len).to_vec(), timestamp)
                .expect("length checked");
        let records = p.inner.process_frame(timestamp, &dets, &frame);
        let text = serde_json::to_string(&records).expect("records serialize");
        *out_json = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn posefov_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
