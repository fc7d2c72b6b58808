//! Human-perception geometry for a social robot.
//!
//! The pipeline starts where a 2D pose detector ends: COCO-17 keypoints plus
//! an aligned depth frame are lifted into a 3D skeleton, torso and gaze
//! normals are turned into ground-plane headings and quaternions, headings
//! are smoothed per person with a constant-velocity Kalman filter, and a
//! horizontal field-of-view test decides what each person can see.
//!
//! Everything downstream of lifting works in the *social frame*: X forward
//! (out of the camera), Y left, Z up.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod cli;
pub mod config;
pub mod eval;
pub mod fov;
pub mod geometry;
pub mod io;
pub mod orientation;
pub mod pipeline;
pub mod skeleton;
pub mod smoothing;
pub mod synth;

pub use geometry::{
    backproject, camera_to_social, project, CameraIntrinsics, CameraPoint, FrameConvention, PixelDepth, SocialPoint,
    UnitQuaternion, Vec3,
};
pub use orientation::{estimate_orientation, DirectionEstimate, DirectionKind, Orientation};
pub use skeleton::{lift_skeleton, sample_depth, DepthFrame, JointId, Keypoint, Skeleton2D, Skeleton3D};
