//! Frame-aware screw, twist and wrench algebra.
//!
//! All six-vectors use the (linear; angular) Plücker ordering. A twist
//! `(v, ω)` describes the velocity field `u(p) = v + ω × p`, where `p` is
//! measured from the twist's reference point. Link twists in this crate are
//! referenced at the inertial origin and expressed in link body coordinates,
//! so `v` is the body-frame derivative of the frame position `ⁱr_i`.

use std::ops::{Add, Neg, Sub};

use nalgebra::{Matrix3, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Coordinate frame in which a screw quantity is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameId {
    Inertial,
    /// Body-fixed frame of link `i` (1-based, as in the chain numbering).
    Body(usize),
    /// Inertial axes translated to the point of joint `j`.
    Joint(usize),
}

macro_rules! screw_type {
    ($name:ident, $lin:ident, $ang:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            pub $lin: Vec3,
            pub $ang: Vec3,
            pub frame: FrameId,
        }

        impl $name {
            pub fn new($lin: Vec3, $ang: Vec3, frame: FrameId) -> Self {
                Self { $lin, $ang, frame }
            }

            pub fn zero(frame: FrameId) -> Self {
                Self::new(Vec3::zeros(), Vec3::zeros(), frame)
            }

            pub fn from_vector(x: &Vec6, frame: FrameId) -> Self {
                Self::new(
                    x.fixed_rows::<3>(0).into(),
                    x.fixed_rows::<3>(3).into(),
                    frame,
                )
            }

            pub fn to_vector(&self) -> Vec6 {
                let mut x = Vec6::zeros();
                x.fixed_rows_mut::<3>(0).copy_from(&self.$lin);
                x.fixed_rows_mut::<3>(3).copy_from(&self.$ang);
                x
            }

            pub fn is_finite(&self) -> bool {
                self.$lin
                    .iter()
                    .chain(self.$ang.iter())
                    .all(|v| v.is_finite())
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                debug_assert_eq!(
                    self.frame,
                    rhs.frame,
                    "frame mismatch in {}",
                    stringify!($name)
                );
                Self::new(self.$lin + rhs.$lin, self.$ang + rhs.$ang, self.frame)
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                debug_assert_eq!(
                    self.frame,
                    rhs.frame,
                    "frame mismatch in {}",
                    stringify!($name)
                );
                Self::new(self.$lin - rhs.$lin, self.$ang - rhs.$ang, self.frame)
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(self) -> Self {
                Self::new(-self.$lin, -self.$ang, self.frame)
            }
        }
    };
}

screw_type!(Screw, linear, angular);
screw_type!(Twist, linear_vel, angular_vel);
screw_type!(Wrench, force, torque);

/// Direction cosine matrix taking body coordinates to inertial coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(m: Mat3) -> Result<Self> {
        check_rotation(&m, Self::TOLERANCE)?;
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Rotation by `angle` about a unit `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self(rotation_exp(&(axis.normalize() * angle)))
    }

    /// Closest rotation to `m` in the Frobenius sense.
    pub fn closest(m: &Mat3) -> Self {
        Self(orthonormalize(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Rotation vector θ (matrix logarithm).
    pub fn log(&self) -> Vec3 {
        Rotation3::from_matrix_unchecked(self.0).scaled_axis()
    }

    /// Unit quaternion `[w, x, y, z]` with `w ≥ 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }
}

fn check_rotation(m: &Mat3, tol: f64) -> Result<()> {
    let deviation = (m.transpose() * m - Mat3::identity()).norm();
    let det = m.determinant();
    if !(deviation <= tol && (det - 1.0).abs() <= tol) {
        return Err(Error::NotOrthonormal { deviation, det });
    }
    Ok(())
}

/// Cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues formula.
pub fn rotation_exp(theta: &Vec3) -> Mat3 {
    Rotation3::new(*theta).into_inner()
}

/// Polar factor of `m` with positive determinant.
pub fn orthonormalize(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Twist adjoint `Ad_z = [[ω×, v×], [0, ω×]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistAdjoint(Mat6);

impl TwistAdjoint {
    pub fn matrix(&self) -> &Mat6 {
        &self.0
    }

    pub fn apply(&self, s: &Vec6) -> Vec6 {
        self.0 * s
    }
}

pub fn twist_adjoint(z: &Twist) -> TwistAdjoint {
    let w = skew(&z.angular_vel);
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&skew(&z.linear_vel));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    TwistAdjoint(m)
}

/// Adjoint transformation `X = [[R, r0× R], [0, R]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjointTransform(Mat6);

impl AdjointTransform {
    /// Builds the block matrix without checking `r`.
    pub fn from_parts(r: &Mat3, r0: &Vec3) -> Self {
        let mut m = Mat6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(skew(r0) * r));
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        Self(m)
    }

    /// Pure rotation `blockdiag(R, R)`.
    pub fn rotation(r: &Mat3) -> Self {
        Self::from_parts(r, &Vec3::zeros())
    }

    pub fn identity() -> Self {
        Self(Mat6::identity())
    }

    pub fn matrix(&self) -> &Mat6 {
        &self.0
    }

    pub fn rotation_block(&self) -> Mat3 {
        self.0.fixed_view::<3, 3>(0, 0).into()
    }

    /// Offset vector `r0` recovered from the upper-right block.
    pub fn offset(&self) -> Vec3 {
        let r = self.rotation_block();
        let s: Mat3 = self.0.fixed_view::<3, 3>(0, 3) * r.transpose();
        Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation_block();
        let r0 = self.offset();
        Self::from_parts(&r.transpose(), &(-(r.transpose() * r0)))
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn apply(&self, s: &Vec6) -> Vec6 {
        self.0 * s
    }

    pub fn apply_twist(&self, z: &Twist, to: FrameId) -> Twist {
        Twist::from_vector(&(self.0 * z.to_vector()), to)
    }

    /// Dual action on wrenches, `X⁻ᵀ w`: keeps power `wᵀz` invariant.
    pub fn apply_wrench(&self, w: &Wrench, to: FrameId) -> Wrench {
        let inv_t = self.inverse().0.transpose();
        Wrench::from_vector(&(inv_t * w.to_vector()), to)
    }
}

/// Adjoint transform with a rotation check at tolerance 1e-6.
pub fn adjoint_transform(r: &Mat3, r0: &Vec3) -> Result<AdjointTransform> {
    check_rotation(r, 1e-6)?;
    Ok(AdjointTransform::from_parts(r, r0))
}

/// Inertial time derivative of a body-frame vector: `v + ω × r`.
pub fn inertial_derivative_vec(r: &Vec3, v_body: &Vec3, omega: &Vec3) -> Vec3 {
    v_body + omega.cross(r)
}

/// Second inertial derivative of a body-frame vector, in body coordinates.
pub fn inertial_second_derivative(
    r: &Vec3,
    v: &Vec3,
    omega: &Vec3,
    v_dot: &Vec3,
    omega_dot: &Vec3,
) -> Vec3 {
    let w = skew(omega);
    v_dot - skew(r) * omega_dot + 2.0 * w * v + w * w * r
}

/// Inertial time derivative of `X_io` for a frame moving with body twist `z`
/// (`Ṙ = R·skew(ω)`): `dX/dt = X · Ad_z`.
pub fn transform_dot(x: &AdjointTransform, z: &Twist) -> Mat6 {
    x.matrix() * twist_adjoint(z).matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn skew_matches_definition() {
        let s = skew(&Vec3::new(1.0, 2.0, 3.0));
        let expected = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(s, expected);
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        let v = Vec3::new(0.3, -1.1, 2.0);
        assert_relative_eq!(skew(&v) * v, Vec3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn twist_adjoint_blocks() {
        let zero = twist_adjoint(&Twist::zero(FrameId::Body(1)));
        assert_eq!(*zero.matrix(), Mat6::zeros());

        let ad = twist_adjoint(&Twist::new(Vec3::x(), Vec3::zeros(), FrameId::Body(1)));
        let m = ad.matrix();
        assert_eq!(m.fixed_view::<3, 3>(0, 3).into_owned(), skew(&Vec3::x()));
        assert_eq!(m.fixed_view::<3, 3>(0, 0).into_owned(), Mat3::zeros());
        assert_eq!(m.fixed_view::<3, 3>(3, 0).into_owned(), Mat3::zeros());
        assert_eq!(m.fixed_view::<3, 3>(3, 3).into_owned(), Mat3::zeros());

        let z = Twist::new(
            Vec3::new(0.1, 0.2, 0.3),
            Vec3::new(-0.4, 0.5, 0.9),
            FrameId::Body(1),
        );
        let s = Screw::new(
            Vec3::new(1.0, -2.0, 0.5),
            Vec3::new(0.3, 0.1, -0.7),
            FrameId::Body(1),
        );
        let out = twist_adjoint(&z).apply(&s.to_vector());
        let ang: Vec3 = out.fixed_rows::<3>(3).into();
        assert_relative_eq!(ang, z.angular_vel.cross(&s.angular), epsilon = 1e-15);
    }

    #[test]
    fn adjoint_transform_cases() {
        let x = adjoint_transform(&Mat3::identity(), &Vec3::zeros()).unwrap();
        assert_eq!(*x.matrix(), Mat6::identity());

        let x = adjoint_transform(&Mat3::identity(), &Vec3::x()).unwrap();
        assert_eq!(
            x.matrix().fixed_view::<3, 3>(0, 3).into_owned(),
            skew(&Vec3::x())
        );
        assert_eq!(
            x.matrix().fixed_view::<3, 3>(3, 0).into_owned(),
            Mat3::zeros()
        );

        let bad = Mat3::identity() * 1.01;
        assert!(matches!(
            adjoint_transform(&bad, &Vec3::zeros()),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn inverse_and_offset_roundtrip() {
        let r = rotation_exp(&Vec3::new(0.3, -0.8, 1.1));
        let p = Vec3::new(1.0, -2.0, 0.25);
        let x = AdjointTransform::from_parts(&r, &p);
        assert_relative_eq!(x.offset(), p, epsilon = 1e-14);
        let explicit = AdjointTransform::from_parts(&r.transpose(), &(-(r.transpose() * p)));
        assert_relative_eq!(
            x.compose(&explicit).matrix(),
            &Mat6::identity(),
            epsilon = 1e-13
        );
        assert_relative_eq!(x.inverse().matrix(), explicit.matrix(), epsilon = 1e-14);
    }

    #[test]
    fn inertial_derivatives() {
        let r = Vec3::new(0.2, 0.4, -1.0);
        assert_eq!(
            inertial_derivative_vec(&r, &Vec3::zeros(), &Vec3::zeros()),
            Vec3::zeros()
        );
        assert_relative_eq!(
            inertial_derivative_vec(&Vec3::x(), &Vec3::zeros(), &Vec3::z()),
            Vec3::y(),
            epsilon = 1e-15
        );
        let z = Vec3::zeros();
        assert_eq!(inertial_second_derivative(&r, &z, &z, &z, &z), z);
        assert_relative_eq!(
            inertial_second_derivative(&Vec3::x(), &z, &Vec3::z(), &z, &z),
            Vec3::new(-1.0, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn transform_dot_zero_twist() {
        let x = AdjointTransform::from_parts(&rotation_exp(&Vec3::new(0.1, 0.2, 0.3)), &Vec3::y());
        assert_eq!(
            transform_dot(&x, &Twist::zero(FrameId::Body(1))),
            Mat6::zeros()
        );
    }

    #[test]
    fn wrench_transport_preserves_power() {
        let r = rotation_exp(&Vec3::new(-0.5, 0.2, 0.7));
        let x = AdjointTransform::from_parts(&r, &Vec3::new(0.3, 1.0, -0.4));
        let z = Twist::new(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(-1.0, 0.5, 0.2),
            FrameId::Body(1),
        );
        let w = Wrench::new(
            Vec3::new(0.1, -0.2, 0.4),
            Vec3::new(2.0, 0.0, -1.0),
            FrameId::Body(1),
        );
        let p0 = w.to_vector().dot(&z.to_vector());
        let p1 = x
            .apply_wrench(&w, FrameId::Inertial)
            .to_vector()
            .dot(&x.apply_twist(&z, FrameId::Inertial).to_vector());
        assert_relative_eq!(p0, p1, epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_restores_rotation() {
        let r = rotation_exp(&Vec3::new(0.4, -0.1, 0.9));
        let noisy = r + Mat3::from_element(1e-4);
        let fixed = RotationMatrix::closest(&noisy);
        assert!(fixed.orthonormality_error() < 1e-14);
        assert_relative_eq!(fixed.matrix(), &r, epsilon = 1e-3);
        let q = fixed.quaternion();
        let n: f64 = q.iter().map(|c| c * c).sum();
        assert_relative_eq!(n, 1.0, epsilon = 1e-14);
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "frame mismatch")]
    fn mixing_frames_is_caught() {
        let _ = Twist::zero(FrameId::Body(1)) + Twist::zero(FrameId::Body(2));
    }
}
