//! Rigid transforms used for every body frame in the simulation.

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Tolerance on the quaternion norm accepted when reading poses.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Position in meters plus a unit quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), orientation)
    }

    /// Builds a pose from `[px, py, pz, qw, qx, qy, qz]`, rejecting
    /// quaternions whose norm is off by more than [`UNIT_TOLERANCE`].
    ///
    /// The stored quaternion keeps the exact input components so that
    /// serialization round-trips bit for bit.
    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("pose contains a non-finite value".into()));
        }
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if (q.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Domain(format!(
                "quaternion norm {} is not unit",
                q.norm()
            )));
        }
        Ok(Self::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::new_unchecked(q),
        ))
    }

    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// `self ∘ rhs`: expresses `rhs` (given in this frame) in the parent frame.
    pub fn compose(&self, rhs: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation * rhs.position,
            self.orientation * rhs.orientation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.position)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn point(&self) -> Point3<f64> {
        Point3::from(self.position)
    }

    /// Unit x, y, z axes of this frame expressed in the parent frame.
    pub fn axis(&self, index: usize) -> Vector3<f64> {
        self.orientation * Vector3::ith(index, 1.0)
    }

    /// Linear interpolation of position and shortest-arc slerp of
    /// orientation. `alpha` of exactly 0 or 1 returns the endpoint unchanged.
    pub fn interpolate(&self, other: &Pose, alpha: f64) -> Pose {
        if alpha == 0.0 {
            return *self;
        }
        if alpha == 1.0 {
            return *other;
        }
        Pose::new(
            self.position.lerp(&other.position, alpha),
            slerp(&self.orientation, &other.orientation, alpha),
        )
    }
}

/// Shortest-arc spherical interpolation, falling back to normalized lerp
/// when the two rotations are nearly identical.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, alpha: f64) -> UnitQuaternion<f64> {
    let qa = a.quaternion().coords;
    let mut qb = b.quaternion().coords;
    let mut dot = qa.dot(&qb);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    let coords = if dot > 1.0 - 1e-12 {
        qa.lerp(&qb, alpha)
    } else {
        let theta = dot.min(1.0).acos();
        let sin = theta.sin();
        qa * (((1.0 - alpha) * theta).sin() / sin) + qb * ((alpha * theta).sin() / sin)
    };
    Unit::new_normalize(Quaternion::from(coords))
}

/// Rotation about world z by `yaw` radians.
pub fn yaw_rotation(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
}

/// Rotation whose columns are the given orthonormal axes.
pub fn rotation_from_axes(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> UnitQuaternion<f64> {
    let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
    UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_and_inverse_cancel() {
        let a = Pose::new(
            Vector3::new(0.3, -1.0, 2.0),
            UnitQuaternion::from_euler_angles(0.2, -0.4, 1.1),
        );
        let id = a.compose(&a.inverse());
        assert!(id.position.norm() < 1e-12);
        assert!(id.orientation.angle() < 1e-12);
    }

    #[test]
    fn array_round_trip_is_exact() {
        let a = Pose::new(
            Vector3::new(0.1, 0.2, 0.3),
            UnitQuaternion::from_euler_angles(0.5, 0.1, -0.7),
        );
        let b = Pose::from_array(a.to_array()).unwrap();
        assert_eq!(a.to_array(), b.to_array());
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        assert!(Pose::from_array([0.0, 0.0, 0.0, 1.0, 0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn slerp_midpoint_halves_angle() {
        let a = UnitQuaternion::identity();
        let b = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2);
        let m = slerp(&a, &b, 0.5);
        assert!((m.angle() - FRAC_PI_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn slerp_takes_short_arc_for_flipped_sign() {
        let a = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.2);
        let b = UnitQuaternion::new_unchecked(-a.into_inner());
        let m = slerp(&a, &b, 0.5);
        assert!(m.angle_to(&a) < 1e-9);
    }
}
