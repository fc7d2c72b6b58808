//! Camera model, coordinate frames and the small value types every other
//! module consumes.
//!
//! The camera frame is the usual optical convention (X right, Y down, Z
//! forward). The social frame re-expresses that with X forward, Y left and
//! Z up so that "project onto the XY-plane" means "project onto the floor".

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("depth must be positive, got {0} mm")]
    NonPositiveDepth(f64),
    #[error("pixel ({u}, {v}) is outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("point is behind the camera (z = {0} m)")]
    BehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("quaternion is not unit norm (|q| = {0})")]
    NonUnitQuaternion(f64),
    #[error("extrinsics are not a rigid transform: {0}")]
    NonRigidExtrinsics(String),
}

/// Pinhole intrinsics. No distortion model: streams are assumed rectified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// 1280x720 colour-aligned RealSense-style intrinsics.
    pub fn realsense_720p() -> Self {
        Self { fx: 911.5, fy: 911.5, cx: 640.0, cy: 360.0, width: 1280, height: 720 }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidIntrinsics(msg));
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive (fx = {}, fy = {})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("resolution must be non-zero ({}x{})", self.width, self.height));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return bad(format!("cx = {} not inside (0, {})", self.cx, self.width));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return bad(format!("cy = {} not inside (0, {})", self.cy, self.height));
        }
        Ok(())
    }

    /// Whether `(u, v)` falls on a pixel of the sensor once rounded to the
    /// nearest integer.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u.is_finite()
            && v.is_finite()
            && u >= -0.5
            && v >= -0.5
            && u < self.width as f64 - 0.5
            && v < self.height as f64 - 0.5
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::realsense_720p()
    }
}

macro_rules! frame_point {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        #[serde(from = "[f64; 3]", into = "[f64; 3]")]
        pub struct $name(pub Vec3);

        impl $name {
            pub fn new(x: f64, y: f64, z: f64) -> Self {
                Self(Vec3::new(x, y, z))
            }

            pub fn x(&self) -> f64 {
                self.0.x
            }

            pub fn y(&self) -> f64 {
                self.0.y
            }

            pub fn z(&self) -> f64 {
                self.0.z
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|c| c.is_finite())
            }

            pub fn distance(&self, other: &Self) -> f64 {
                (self.0 - other.0).norm()
            }

            pub fn midpoint(&self, other: &Self) -> Self {
                Self((self.0 + other.0) * 0.5)
            }
        }

        impl From<[f64; 3]> for $name {
            fn from(a: [f64; 3]) -> Self {
                Self::new(a[0], a[1], a[2])
            }
        }

        impl From<$name> for [f64; 3] {
            fn from(p: $name) -> Self {
                [p.0.x, p.0.y, p.0.z]
            }
        }
    };
}

frame_point!(
    /// A point in the optical camera frame, meters.
    CameraPoint
);
frame_point!(
    /// A point in the social frame (X forward, Y left, Z up), meters.
    SocialPoint
);

impl SocialPoint {
    /// Euclidean distance in the ground plane.
    pub fn planar_distance(&self, other: &Self) -> f64 {
        (self.0.x - other.0.x).hypot(self.0.y - other.0.y)
    }
}

/// Unit quaternion stored scalar-first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    pub const UNIT_TOLERANCE: f64 = 1e-9;

    pub const fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Accepts only quaternions already normalized to within 1e-9.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let q = Self { w, x, y, z };
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() >= Self::UNIT_TOLERANCE {
            return Err(GeometryError::NonUnitQuaternion(norm));
        }
        Ok(q)
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = axis.normalize();
        let (s, c) = (angle * 0.5).sin_cos();
        Self { w: c, x: axis.x * s, y: axis.y * s, z: axis.z * s }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Rotates `v` by this quaternion (`q v q*`).
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn is_identity(&self) -> bool {
        self.w == 1.0 && self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = GeometryError;

    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

/// Camera-to-social convention: a fixed axis permutation followed by an
/// optional leveling rotation (identity for a level camera).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameConvention {
    pub leveling: UnitQuaternion,
}

impl FrameConvention {
    pub fn level() -> Self {
        Self::default()
    }

    pub fn with_leveling(leveling: UnitQuaternion) -> Self {
        Self { leveling }
    }

    pub fn to_social(&self, p: &CameraPoint) -> SocialPoint {
        camera_to_social(p, self)
    }

    pub fn to_camera(&self, p: &SocialPoint) -> CameraPoint {
        let unleveled = if self.leveling.is_identity() { p.0 } else { self.leveling.conjugate().rotate(&p.0) };
        CameraPoint::new(-unleveled.y, -unleveled.z, unleveled.x)
    }
}

/// Rigid camera-to-world transform, e.g. from a fiducial calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Extrinsics {
    pub const RIGIDITY_TOLERANCE: f64 = 1e-6;

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let e = Self { rotation, translation };
        e.validate()?;
        Ok(e)
    }

    /// Parses a 4x4 row-major homogeneous matrix.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self, GeometryError> {
        let bottom = [m[12], m[13], m[14], m[15]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::NonRigidExtrinsics(format!("bottom row is {bottom:?}, expected [0, 0, 0, 1]")));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vec3::new(m[3], m[7], m[11]))
    }

    #[rustfmt::skip]
    pub fn to_row_major(&self) -> [f64; 16] {
        let (r, t) = (&self.rotation, &self.translation);
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite())) {
            return Err(GeometryError::NonRigidExtrinsics("non-finite entries".into()));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if err > Self::RIGIDITY_TOLERANCE {
            return Err(GeometryError::NonRigidExtrinsics(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > Self::RIGIDITY_TOLERANCE {
            return Err(GeometryError::NonRigidExtrinsics(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(())
    }

    pub fn camera_to_world(&self, p: &CameraPoint) -> Vec3 {
        self.rotation * p.0 + self.translation
    }

    pub fn world_to_camera(&self, p: &Vec3) -> CameraPoint {
        CameraPoint(self.rotation.transpose() * (p - self.translation))
    }
}

/// Pixel coordinates plus depth, the output of [`project`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelDepth {
    pub u: f64,
    pub v: f64,
    /// Millimeters.
    pub depth: f64,
}

/// Inverse pinhole model. `depth` is in millimeters, the result in meters.
pub fn backproject(u: f64, v: f64, depth: f64, k: &CameraIntrinsics) -> Result<CameraPoint, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    if !k.contains(u, v) {
        return Err(GeometryError::OutOfBounds { u, v, width: k.width, height: k.height });
    }
    let z = depth / 1000.0;
    Ok(CameraPoint::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z))
}

/// Forward pinhole model; depth is returned in millimeters.
pub fn project(p: &CameraPoint, k: &CameraIntrinsics) -> Result<PixelDepth, GeometryError> {
    let z = p.z();
    if !(z > 0.0) {
        return Err(GeometryError::BehindCamera(z));
    }
    Ok(PixelDepth { u: k.fx * p.x() / z + k.cx, v: k.fy * p.y() / z + k.cy, depth: z * 1000.0 })
}

/// `(x, y, z) -> (z, -x, -y)`, then the leveling rotation.
pub fn camera_to_social(p: &CameraPoint, conv: &FrameConvention) -> SocialPoint {
    let permuted = Vec3::new(p.z(), -p.x(), -p.y());
    if conv.leveling.is_identity() {
        SocialPoint(permuted)
    } else {
        SocialPoint(conv.leveling.rotate(&permuted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k600() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn principal_ray() {
        let k = k600();
        let p = backproject(k.cx, k.cy, 2000.0, &k).unwrap();
        assert_eq!(p, CameraPoint::new(0.0, 0.0, 2.0));
        let p = backproject(k.cx + 600.0 * 0.5, k.cy, 1000.0, &k).unwrap();
        assert!((p.x() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forty_five_degree_ray() {
        let k = CameraIntrinsics::new(600.0, 600.0, 100.0, 240.0, 1280, 480).unwrap();
        let p = backproject(k.cx + 600.0, k.cy, 1000.0, &k).unwrap();
        assert_eq!(p, CameraPoint::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn realsense_pixel_by_hand() {
        // x = (700 - 640) * 1.53 / 911.5, y = (400 - 360) * 1.53 / 911.5
        let k = CameraIntrinsics::realsense_720p();
        let p = backproject(700.0, 400.0, 1530.0, &k).unwrap();
        let x = 60.0 * 1.53 / 911.5;
        let y = 40.0 * 1.53 / 911.5;
        assert!((p.x() - 0.100_713_110_257_816_78).abs() < 1e-15, "{}", p.x());
        assert!((p.x() - x).abs() < 1e-15);
        assert!((p.y() - y).abs() < 1e-15);
        assert!((p.y() - 0.067_142_073_505_211_19).abs() < 1e-15, "{}", p.y());
        assert_eq!(p.z(), 1.53);
    }

    #[test]
    fn backproject_errors() {
        let k = k600();
        assert_eq!(backproject(1.0, 1.0, 0.0, &k), Err(GeometryError::NonPositiveDepth(0.0)));
        assert!(matches!(backproject(1.0, 1.0, -3.0, &k), Err(GeometryError::NonPositiveDepth(_))));
        assert!(matches!(backproject(640.0, 1.0, 1000.0, &k), Err(GeometryError::OutOfBounds { .. })));
        assert!(matches!(backproject(-1.0, 1.0, 1000.0, &k), Err(GeometryError::OutOfBounds { .. })));
        assert!(backproject(639.4, 479.4, 1000.0, &k).is_ok());
    }

    #[test]
    fn project_principal_point() {
        let k = k600();
        let px = project(&CameraPoint::new(0.0, 0.0, 2.0), &k).unwrap();
        assert_eq!(px, PixelDepth { u: k.cx, v: k.cy, depth: 2000.0 });
        assert_eq!(project(&CameraPoint::new(0.0, 0.0, 0.0), &k), Err(GeometryError::BehindCamera(0.0)));
    }

    #[test]
    fn social_axes() {
        let conv = FrameConvention::level();
        assert_eq!(camera_to_social(&CameraPoint::new(0.0, 0.0, 2.0), &conv), SocialPoint::new(2.0, 0.0, 0.0));
        assert_eq!(camera_to_social(&CameraPoint::new(1.0, 0.0, 0.0), &conv), SocialPoint::new(0.0, -1.0, 0.0));
        assert_eq!(camera_to_social(&CameraPoint::new(0.0, -1.0, 0.0), &conv), SocialPoint::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 2.0, 0.0, 4, 4).is_err());
        assert!(CameraIntrinsics::realsense_720p().validate().is_ok());
    }

    #[test]
    fn quaternion_rejects_non_unit() {
        assert!(UnitQuaternion::new(1.0, 0.1, 0.0, 0.0).is_err());
        assert!(serde_json::from_str::<UnitQuaternion>("[2,0,0,0]").is_err());
        let q: UnitQuaternion = serde_json::from_str("[0,0,0,1]").unwrap();
        assert_eq!(q.rotate(&Vec3::x()), Vec3::new(-1.0, 0.0, 0.0));
    }

    fn arb_point() -> impl Strategy<Value = CameraPoint> {
        (-3.0..3.0f64, -3.0..3.0f64, 0.5..8.0f64).prop_map(|(x, y, z)| CameraPoint::new(x, y, z))
    }

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64, -3.0..3.0f64)
            .prop_map(|(x, y, z, a)| UnitQuaternion::from_axis_angle(Vec3::new(x, y, z), a))
    }

    proptest! {
        #[test]
        fn project_backproject_round_trip(p in arb_point()) {
            let k = CameraIntrinsics::new(600.0, 610.0, 320.0, 240.0, 100_000, 100_000).unwrap();
            // keep inside the (very large) sensor by shifting the principal point
            let k = CameraIntrinsics { cx: 50_000.0, cy: 50_000.0, ..k };
            let px = project(&p, &k).unwrap();
            let back = backproject(px.u, px.v, px.depth, &k).unwrap();
            prop_assert!((back.0 - p.0).norm() < 1e-9);
        }

        #[test]
        fn pixel_round_trip(u in 0.0..1279.0f64, v in 0.0..719.0f64, d in 300.0..8000.0f64) {
            let k = CameraIntrinsics::realsense_720p();
            let px = project(&backproject(u, v, d, &k).unwrap(), &k).unwrap();
            prop_assert!((px.u - u).abs() < 1e-9 && (px.v - v).abs() < 1e-9 && (px.depth - d).abs() < 1e-9);
        }

        #[test]
        fn social_transform_is_isometry(a in arb_point(), b in arb_point(), q in arb_quat()) {
            let conv = FrameConvention::with_leveling(q);
            let (sa, sb) = (camera_to_social(&a, &conv), camera_to_social(&b, &conv));
            prop_assert!((sa.distance(&sb) - a.distance(&b)).abs() < 1e-12);
            let back = conv.to_camera(&sa);
            prop_assert!((back.0 - a.0).norm() < 1e-12);
        }
    }
}
