use std::ffi::{CStr, CString};
use std::ptr;

use posefov::synth::{generate, Scenario};
use posefov::CameraIntrinsics;
use posefov_ffi::*;
use serde_json::{json, Value};

const K: PosefovIntrinsics = PosefovIntrinsics { fx: 911.5, fy: 911.5, cx: 640.0, cy: 360.0, width: 1280, height: 720 };

fn last_error() -> String {
    unsafe { CStr::from_ptr(posefov_last_error_message()) }.to_str().unwrap().to_owned()
}

#[test]
fn backproject_matches_hand_value() {
    let mut out = [0.0; 3];
    let st = unsafe { posefov_backproject(&K, 700.0, 400.0, 1530.0, out.as_mut_ptr()) };
    assert_eq!(st, PosefovStatus::Ok);
    assert!((out[0] - 0.10071311025781678).abs() < 1e-15);
    assert!((out[1] - 0.06714207350521119).abs() < 1e-15);
    assert_eq!(out[2], 1.53);

    let mut social = [0.0; 3];
    assert_eq!(unsafe { posefov_camera_to_social(out.as_ptr(), social.as_mut_ptr()) }, PosefovStatus::Ok);
    assert_eq!(social, [out[2], -out[0], -out[1]]);
}

#[test]
fn errors_set_status_and_message() {
    let mut out = [0.0; 3];
    assert_eq!(unsafe { posefov_backproject(&K, 10.0, 10.0, 0.0, out.as_mut_ptr()) }, PosefovStatus::Geometry);
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { posefov_backproject(ptr::null(), 1.0, 1.0, 1.0, out.as_mut_ptr()) },
        PosefovStatus::NullPointer
    );
    assert!(last_error().contains('k'));
    let bad = PosefovIntrinsics { fx: -1.0, ..K };
    assert_eq!(unsafe { posefov_backproject(&bad, 1.0, 1.0, 1.0, out.as_mut_ptr()) }, PosefovStatus::InvalidArgument);
    assert_eq!(unsafe { posefov_backproject(&K, 1.0, 1.0, 1000.0, out.as_mut_ptr()) }, PosefovStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn orientation_of_a_facing_skeleton() {
    let mut pts = [0.0; 51];
    let mut present = [0u8; 17];
    let set = |pts: &mut [f64; 51], present: &mut [u8; 17], i: usize, p: [f64; 3]| {
        pts[3 * i..3 * i + 3].copy_from_slice(&p);
        present[i] = 1;
    };
    // COCO order: 1/2 eyes, 5/6 shoulders, 11/12 hips
    set(&mut pts, &mut present, 1, [1.95, -0.03, 1.6]);
    set(&mut pts, &mut present, 2, [1.95, 0.03, 1.6]);
    set(&mut pts, &mut present, 5, [2.0, -0.2, 1.4]);
    set(&mut pts, &mut present, 6, [2.0, 0.2, 1.4]);
    set(&mut pts, &mut present, 11, [2.0, -0.1, 1.0]);
    set(&mut pts, &mut present, 12, [2.0, 0.1, 1.0]);
    let mut o = std::mem::MaybeUninit::<PosefovOrientation>::uninit();
    assert_eq!(
        unsafe { posefov_estimate_orientation(pts.as_ptr(), present.as_ptr(), o.as_mut_ptr()) },
        PosefovStatus::Ok
    );
    let o = unsafe { o.assume_init() };
    assert!(o.torso.valid && o.gaze.valid);
    assert_eq!(o.torso.heading, std::f64::consts::PI);
    assert_eq!(o.gaze.heading, std::f64::consts::PI);

    present[1] = 0;
    let mut o2 = std::mem::MaybeUninit::<PosefovOrientation>::uninit();
    unsafe { posefov_estimate_orientation(pts.as_ptr(), present.as_ptr(), o2.as_mut_ptr()) };
    let o2 = unsafe { o2.assume_init() };
    assert!(o2.torso.valid && !o2.gaze.valid);
}

#[test]
fn fov_boundary() {
    let subject = [0.0; 3];
    for (deg, inside) in [(59.999f64, true), (60.0, true), (60.001, false)] {
        let b = deg.to_radians();
        let target = [2.0 * b.cos(), 2.0 * b.sin(), 0.0];
        let mut r = PosefovFovResult { inside: false, angular_offset: 0.0 };
        assert_eq!(
            unsafe { posefov_fov_test(0.0, subject.as_ptr(), target.as_ptr(), 120.0, &mut r) },
            PosefovStatus::Ok
        );
        assert_eq!(r.inside, inside, "{deg}");
    }
    let mut r = PosefovFovResult { inside: false, angular_offset: 0.0 };
    assert_eq!(
        unsafe { posefov_fov_test(0.0, subject.as_ptr(), subject.as_ptr(), 120.0, &mut r) },
        PosefovStatus::InvalidArgument
    );
    let t = [1.0, 0.0, 0.0];
    assert_eq!(
        unsafe { posefov_fov_test(0.0, subject.as_ptr(), t.as_ptr(), 0.0, &mut r) },
        PosefovStatus::InvalidArgument
    );
}

#[test]
fn pipeline_handle_runs_synthetic_frames() {
    let k = CameraIntrinsics::new(K.fx, K.fy, K.cx, K.cy, K.width, K.height).unwrap();
    let syn = generate(&Scenario { duration: 0.5, ..Default::default() }, &k).unwrap();

    let mut p = ptr::null_mut();
    let cfg = CString::new(r#"{"fov.horizontal_deg": 100}"#).unwrap();
    assert_eq!(unsafe { posefov_pipeline_new(&K, cfg.as_ptr(), &mut p) }, PosefovStatus::Ok);
    assert!(!p.is_null());
    for f in syn.frames() {
        let dets: Vec<Value> = f
            .detections
            .iter()
            .map(|d| json!({"score": d.score, "keypoints": d.keypoints.iter().map(|k| [k.u, k.v, k.confidence]).collect::<Vec<_>>()}))
            .collect();
        let dets = CString::new(Value::from(dets).to_string()).unwrap();
        let mut out = ptr::null_mut();
        let st = unsafe {
            posefov_pipeline_process_frame(
                p,
                f.timestamp,
                dets.as_ptr(),
                f.depth.data().as_ptr(),
                f.depth.data().len(),
                &mut out,
            )
        };
        assert_eq!(st, PosefovStatus::Ok, "{}", last_error());
        let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
        unsafe { posefov_string_free(out) };
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 1);
        assert_eq!(v[0]["track_id"], 0);
        assert_eq!(v[0]["gaze"]["valid"], true);
    }

    let mut out = ptr::null_mut();
    let short = [0u16; 4];
    let empty = CString::new("[]").unwrap();
    let st = unsafe { posefov_pipeline_process_frame(p, 1.0, empty.as_ptr(), short.as_ptr(), 4, &mut out) };
    assert_eq!(st, PosefovStatus::InvalidArgument);
    assert!(out.is_null());
    let junk = CString::new("{").unwrap();
    let depth = vec![0u16; 1280 * 720];
    let st = unsafe { posefov_pipeline_process_frame(p, 1.0, junk.as_ptr(), depth.as_ptr(), depth.len(), &mut out) };
    assert_eq!(st, PosefovStatus::InvalidJson);
    unsafe { posefov_pipeline_free(p) };
}

#[test]
fn pipeline_rejects_bad_config() {
    let mut p = ptr::null_mut();
    let cfg = CString::new(r#"{"kalman.qq": 1}"#).unwrap();
    assert_eq!(unsafe { posefov_pipeline_new(&K, cfg.as_ptr(), &mut p) }, PosefovStatus::InvalidConfig);
    assert!(p.is_null());
    assert!(last_error().contains("qq"));
    unsafe { posefov_pipeline_free(ptr::null_mut()) };
    unsafe { posefov_string_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/posefov.h")).unwrap();
    for name in [
        "posefov_last_error_message",
        "posefov_backproject",
        "posefov_camera_to_social",
        "posefov_estimate_orientation",
        "posefov_fov_test",
        "posefov_pipeline_new",
        "posefov_pipeline_process_frame",
        "posefov_pipeline_free",
        "posefov_string_free",
        "typedef struct PosefovPipeline PosefovPipeline",
        "POSEFOV_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
