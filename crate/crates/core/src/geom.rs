//! Manifold primitives on S² and SO(3).
//!
//! Matrices act on column vectors. Externally visible 3×3 data (CSV columns,
//! serialized tables) is written row-major; see `RotMat::to_row_major`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::{cast, tol, Real};

/// Skew-symmetric matrix with `hat(v) * w == v.cross(w)`.
#[inline]
pub fn hat<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds `1e-8`.
pub fn vee<T: Real>(m: &Matrix3<T>) -> Result<Vector3<T>> {
    let asym = (m + m.transpose()).amax();
    if asym > tol::<T>(1e-8) {
        return Err(Error::SymmetryViolation {
            asymmetry: crate::scalar::to_f64(asym),
        });
    }
    Ok(vee_skew(m))
}

/// `vee` of the skew-symmetric part of `m`; never fails.
#[inline]
pub fn vee_skew<T: Real>(m: &Matrix3<T>) -> Vector3<T> {
    let half = cast::<T>(0.5);
    Vector3::new(
        (m[(2, 1)] - m[(1, 2)]) * half,
        (m[(0, 2)] - m[(2, 0)]) * half,
        (m[(1, 0)] - m[(0, 1)]) * half,
    )
}

/// Rodrigues' formula for `exp(hat(v))`.
pub fn exp_so3<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let theta2 = v.norm_squared();
    let k = hat(v);
    let (a, b) = if theta2 < cast::<T>(1e-12) {
        (
            T::one() - theta2 / cast::<T>(6.0),
            cast::<T>(0.5) - theta2 / cast::<T>(24.0),
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation by `angle` about the (not necessarily unit) `axis`.
pub fn rotation_about<T: Real>(axis: &Vector3<T>, angle: T) -> Matrix3<T> {
    exp_so3(&(axis.normalize() * angle))
}

/// A direction on the two-sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec<T: Real = f64>(Vector3<T>);

impl<T: Real> UnitVec<T> {
    /// Validates that `v` has unit norm within `1e-9`.
    pub fn try_new(v: Vector3<T>) -> Result<Self> {
        let dev = (v.norm() - T::one()).abs();
        if dev > tol::<T>(1e-9) {
            return Err(Error::InvalidParams(format!(
                "direction has norm deviating from 1 by {:e}",
                crate::scalar::to_f64(dev)
            )));
        }
        Ok(Self(v))
    }

    pub fn new_normalize(v: Vector3<T>) -> Self {
        Self(v.normalize())
    }

    pub fn e3() -> Self {
        Self(Vector3::z())
    }

    pub fn down() -> Self {
        Self(-Vector3::z())
    }

    #[inline]
    pub fn as_vec(&self) -> &Vector3<T> {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> Vector3<T> {
        self.0
    }

    /// Orthogonal projector onto the tangent plane, `I - q qᵀ`.
    pub fn tangent_projector(&self) -> Matrix3<T> {
        Matrix3::identity() - self.0 * self.0.transpose()
    }

    /// Removes the component of `w` along this direction.
    pub fn project_tangent(&self, w: &Vector3<T>) -> Vector3<T> {
        w - self.0 * self.0.dot(w)
    }
}

impl<T: Real> std::ops::Deref for UnitVec<T> {
    type Target = Vector3<T>;
    fn deref(&self) -> &Vector3<T> {
        &self.0
    }
}

/// An element of SO(3), mapping body coordinates to inertial coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat<T: Real = f64>(Matrix3<T>);

impl<T: Real> RotMat<T> {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality (`‖RᵀR − I‖∞ ≤ 1e-9`) and orientation.
    pub fn try_new(m: Matrix3<T>) -> Result<Self> {
        let dev = orthonormality_error(&m);
        if dev > tol::<T>(1e-9) || m.determinant() <= T::zero() {
            return Err(Error::InvalidParams(format!(
                "matrix is not a rotation (orthonormality error {:e})",
                crate::scalar::to_f64(dev)
            )));
        }
        Ok(Self(m))
    }

    /// Wraps `m` after one Newton step of polar orthonormalization.
    pub fn new_orthonormalize(m: Matrix3<T>) -> Self {
        Self(orthonormalize(&m))
    }

    pub fn exp(v: &Vector3<T>) -> Self {
        Self(exp_so3(v))
    }

    pub fn about(axis: &Vector3<T>, angle: T) -> Self {
        Self(rotation_about(axis, angle))
    }

    #[inline]
    pub fn as_mat(&self) -> &Matrix3<T> {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> Matrix3<T> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> [T; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }
}

impl<T: Real> std::ops::Deref for RotMat<T> {
    type Target = Matrix3<T>;
    fn deref(&self) -> &Matrix3<T> {
        &self.0
    }
}

/// `‖RᵀR − I‖∞` (max-abs entry).
pub fn orthonormality_error<T: Real>(m: &Matrix3<T>) -> T {
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// One Newton step toward the polar factor: `R (3I − RᵀR) / 2`.
///
/// This is the first-order expansion of `R (RᵀR)^{-1/2}`; the residual
/// orthonormality error is squared by each application.
pub fn orthonormalize<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let gram = m.transpose() * m;
    m * (Matrix3::identity() * cast::<T>(1.5) - gram * cast::<T>(0.5))
}

/// Tracking errors on S²: `e_q = q_d × q`, `e_ω = ω + q̂²ω_d`.
pub fn err_s2<T: Real>(
    q: &UnitVec<T>,
    q_d: &UnitVec<T>,
    omega: &Vector3<T>,
    omega_d: &Vector3<T>,
) -> (Vector3<T>, Vector3<T>) {
    let e_q = q_d.cross(q);
    let qh = hat(q.as_vec());
    let e_omega = omega + qh * qh * omega_d;
    (e_q, e_omega)
}

/// Ψ_R above which the attitude error is flagged as near the antipodal set.
pub const NEAR_ANTIPODAL_PSI: f64 = 1.99;

/// Attitude and angular-velocity tracking errors on SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Error<T: Real = f64> {
    pub e_r: Vector3<T>,
    pub e_omega: Vector3<T>,
    /// Set when Ψ_R exceeds [`NEAR_ANTIPODAL_PSI`]; `e_r` loses meaning there.
    pub near_antipodal: bool,
}

/// `e_R = ½ (R_dᵀR − RᵀR_d)^∨`, `e_Ω = Ω − RᵀR_d Ω_d`.
pub fn err_so3<T: Real>(
    r: &RotMat<T>,
    r_d: &RotMat<T>,
    omega: &Vector3<T>,
    omega_d: &Vector3<T>,
) -> So3Error<T> {
    let e = r_d.transpose().as_mat() * r.as_mat();
    let e_r = vee_skew(&e);
    let e_omega = omega - e.transpose() * omega_d;
    So3Error {
        e_r,
        e_omega,
        near_antipodal: psi_r(r, r_d) > cast::<T>(NEAR_ANTIPODAL_PSI),
    }
}

/// Ψ_q = 1 − q·q_d, in [0, 2].
#[inline]
pub fn psi_q<T: Real>(q: &UnitVec<T>, q_d: &UnitVec<T>) -> T {
    T::one() - q.dot(q_d)
}

/// Ψ_R = ½ tr(I − R_dᵀR), in [0, 2].
#[inline]
pub fn psi_r<T: Real>(r: &RotMat<T>, r_d: &RotMat<T>) -> T {
    let tr = (r_d.transpose().as_mat() * r.as_mat()).trace();
    (cast::<T>(3.0) - tr) * cast::<T>(0.5)
}
