//! Planar angle helpers shared by orientation, smoothing and evaluation.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Shortest signed arc from `b` to `a`, in `(-π, π]`.
pub fn diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

pub fn to_radians(deg: f64) -> f64 {
    deg * PI / 180.0
}

pub fn to_degrees(rad: f64) -> f64 {
    rad * 180.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert!((wrap(3.5) - (3.5 - TAU)).abs() < 1e-15);
        assert!((wrap(-7.0) - (-7.0 + TAU)).abs() < 1e-15);
        assert_eq!(wrap(0.0), 0.0);
        for k in -20..20 {
            let a = wrap(0.3 + k as f64 * TAU);
            assert!((a - 0.3).abs() < 1e-12, "{k} {a}");
        }
    }

    #[test]
    fn diff_crosses_seam() {
        assert!((diff(-3.1, 3.1) - (TAU - 6.2)).abs() < 1e-12);
        assert!((diff(PI, -PI)).abs() < 1e-15);
    }
}
