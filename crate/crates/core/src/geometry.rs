//! Rotations, rigid transforms and the angular / positional error metrics
//! shared by every task.
//!
//! Quaternions are stored scalar-first as `(w, x, y, z)` everywhere, including
//! in flat estimate vectors and on disk.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Tolerance on `|‖q‖² − 1|` for a quaternion to count as unit.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Slack allowed by operations that require a unit quaternion. Inputs that
/// went through `f32` storage are only unit to about 1e-7.
const UNIT_ACCEPT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("quaternion is not unit (norm² = {0})")]
    NonUnit(f64),
    #[error("rotation axis has zero length")]
    ZeroAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vec3::new(s[0], s[1], s[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

/// Row-major 3×3 rotation matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn mat3_mul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat3_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

/// Quaternion `w + xi + yj + zk`, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Quat::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_unit(self) -> bool {
        (self.norm_squared() - 1.0).abs() < UNIT_ACCEPT
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn normalize(self) -> Result<Quat, GeometryError> {
        quat_normalize(self)
    }

    fn check_unit(self) -> Result<(), GeometryError> {
        let n2 = self.norm_squared();
        if (n2 - 1.0).abs() < UNIT_ACCEPT {
            Ok(())
        } else {
            Err(GeometryError::NonUnit(n2))
        }
    }

    /// Rotation matrix of a unit quaternion. No unit check.
    pub fn to_matrix(self) -> Mat3 {
        let Quat { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Unit quaternion of a proper rotation matrix (Shepperd's method).
    pub fn from_matrix(m: &Mat3) -> Quat {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        let n = q.norm();
        Quat::new(q.w / n, q.x / n, q.y / n, q.z / n)
    }

    /// Rotates `v` without checking that `self` is unit.
    pub fn rotate_unchecked(self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u × v) + 2u × (u × v)
        let u = self.vector();
        let t = u.cross(v).scale(2.0);
        v + t.scale(self.w) + u.cross(t)
    }
}

/// Hamilton product: `(a * b)` applies `b` first, then `a`.
impl Mul for Quat {
    type Output = Quat;
    fn mul(self, b: Quat) -> Quat {
        let a = self;
        Quat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

pub fn quat_normalize(q: Quat) -> Result<Quat, GeometryError> {
    let n = q.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(GeometryError::ZeroQuaternion);
    }
    Ok(Quat::new(q.w / n, q.x / n, q.y / n, q.z / n))
}

pub fn quat_rotate(q: Quat, v: Vec3) -> Result<Vec3, GeometryError> {
    q.check_unit()?;
    Ok(q.rotate_unchecked(v))
}

/// Angle in degrees of the relative rotation between two unit quaternions.
/// Invariant to the sign of either argument.
pub fn quat_angle(q1: Quat, q2: Quat) -> Result<f64, GeometryError> {
    q1.check_unit()?;
    q2.check_unit()?;
    // Align signs, then 4·atan2(‖a − b‖, ‖a + b‖): well conditioned at both
    // ends and exactly zero for identical rotations.
    let b = if q1.dot(q2) < 0.0 { q2.neg() } else { q2 };
    let diff = Quat::new(q1.w - b.w, q1.x - b.x, q1.y - b.y, q1.z - b.z).norm();
    let sum = Quat::new(q1.w + b.w, q1.x + b.x, q1.y + b.y, q1.z + b.z).norm();
    Ok((4.0 * diff.atan2(sum)).to_degrees())
}

pub fn axis_angle_to_quat(axis: Vec3, angle_deg: f64) -> Result<Quat, GeometryError> {
    let axis = axis.normalized().ok_or(GeometryError::ZeroAxis)?;
    let half = angle_deg.to_radians() * 0.5;
    let s = half.sin();
    Ok(Quat::new(half.cos(), axis.x * s, axis.y * s, axis.z * s))
}

/// Euler angles `(rx, ry, rz)` in radians for the intrinsic X-Y-Z sequence,
/// i.e. `R = Rx(rx) · Ry(ry) · Rz(rz)`.
///
/// At gimbal lock (|ry| = 90°) the arcsine argument is clamped and `rz` is
/// set to zero.
pub fn euler_from_quat(q: Quat) -> [f64; 3] {
    let m = q.to_matrix();
    let sy = m[0][2].clamp(-1.0, 1.0);
    let ry = sy.asin();
    if sy.abs() < 1.0 - 1e-12 {
        let rx = (-m[1][2]).atan2(m[2][2]);
        let rz = (-m[0][1]).atan2(m[0][0]);
        [rx, ry, rz]
    } else {
        // rz folds into rx
        let rx = m[2][1].atan2(m[1][1]);
        [rx, ry, 0.0]
    }
}

/// Inverse of [`euler_from_quat`].
pub fn quat_from_euler(angles: [f64; 3]) -> Quat {
    let qx = Quat::new((angles[0] * 0.5).cos(), (angles[0] * 0.5).sin(), 0.0, 0.0);
    let qy = Quat::new((angles[1] * 0.5).cos(), 0.0, (angles[1] * 0.5).sin(), 0.0);
    let qz = Quat::new((angles[2] * 0.5).cos(), 0.0, 0.0, (angles[2] * 0.5).sin());
    qx * qy * qz
}

/// Rigid object pose relative to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose6DoF {
    pub rotation: Quat,
    pub translation: Vec3,
}

impl Pose6DoF {
    pub fn new(rotation: Quat, translation: Vec3) -> Self {
        Pose6DoF { rotation, translation }
    }

    /// Flat `[qw, qx, qy, qz, tx, ty, tz]`.
    pub fn to_vec(self) -> Vec<f64> {
        let mut v = self.rotation.to_array().to_vec();
        v.extend_from_slice(&self.translation.to_array());
        v
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Pose6DoF::new(Quat::from_slice(&s[..4]), Vec3::from_slice(&s[4..7]))
    }

    pub fn transform_point(self, p: Vec3) -> Vec3 {
        self.rotation.rotate_unchecked(p) + self.translation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(quat_normalize(Quat::new(2.0, 0.0, 0.0, 0.0)).unwrap(), Quat::IDENTITY);
        assert_eq!(
            quat_normalize(Quat::new(0.0, 0.0, 0.0, 3.0)).unwrap(),
            Quat::new(0.0, 0.0, 0.0, 1.0)
        );
        assert_eq!(
            quat_normalize(Quat::new(0.0, 0.0, 0.0, 0.0)),
            Err(GeometryError::ZeroQuaternion)
        );
    }

    #[test]
    fn rotate_examples() {
        let q = axis_angle_to_quat(Vec3::Z, 90.0).unwrap();
        let v = quat_rotate(q, Vec3::X).unwrap();
        assert!(close(v.x, 0.0, 1e-12) && close(v.y, 1.0, 1e-12) && close(v.z, 0.0, 1e-12));
        let w = Vec3::new(0.3, -2.0, 5.0);
        assert_eq!(quat_rotate(Quat::IDENTITY, w).unwrap(), w);
        assert!(matches!(
            quat_rotate(Quat::new(2.0, 0.0, 0.0, 0.0), w),
            Err(GeometryError::NonUnit(_))
        ));
    }

    #[test]
    fn angle_examples() {
        let q = quat_normalize(Quat::new(0.3, -0.2, 0.9, 0.1)).unwrap();
        assert_eq!(quat_angle(q, q).unwrap(), 0.0);
        assert!(close(quat_angle(q, q.neg()).unwrap(), 0.0, 1e-9));
        let rz = axis_angle_to_quat(Vec3::Z, 90.0).unwrap();
        assert!(close(quat_angle(Quat::IDENTITY, rz).unwrap(), 90.0, 1e-9));
        assert!(quat_angle(Quat::new(0.0, 0.0, 0.0, 0.0), q).is_err());
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(axis_angle_to_quat(Vec3::Z, 0.0).unwrap(), Quat::IDENTITY);
        let q = axis_angle_to_quat(Vec3::Z, 90.0).unwrap();
        assert!(close(q.w, SQRT_2 / 2.0, 1e-15) && close(q.z, SQRT_2 / 2.0, 1e-15));
        assert!(q.x == 0.0 && q.y == 0.0);
        assert_eq!(axis_angle_to_quat(Vec3::ZERO, 10.0), Err(GeometryError::ZeroAxis));
    }

    #[test]
    fn euler_examples() {
        assert_eq!(euler_from_quat(Quat::IDENTITY), [0.0, 0.0, 0.0]);
        let e = euler_from_quat(axis_angle_to_quat(Vec3::X, 90.0).unwrap());
        assert!(close(e[0], FRAC_PI_2, 1e-12) && close(e[1], 0.0, 1e-12) && close(e[2], 0.0, 1e-12));
    }

    #[test]
    fn euler_gimbal_lock_sets_rz_to_zero() {
        let q = quat_from_euler([0.4, FRAC_PI_2, 0.3]);
        let e = euler_from_quat(q);
        assert_eq!(e[2], 0.0);
        assert!(close(e[1], FRAC_PI_2, 1e-6));
        // still the same rotation
        assert!(quat_angle(quat_from_euler(e), q).unwrap() < 1e-4);
    }

    #[test]
    fn matrix_round_trip() {
        let q = quat_normalize(Quat::new(-0.1, 0.7, 0.2, -0.4)).unwrap();
        let back = Quat::from_matrix(&q.to_matrix());
        assert!(close(back.dot(q).abs(), 1.0, 1e-12));
    }
}
