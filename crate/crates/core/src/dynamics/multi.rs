//! Equation residuals for several quadrotors sharing one load.
//!
//! Each cable of `n_i` links hangs from quadrotor `i`; its last link ends at
//! the load (the point mass itself, or an attachment point `x_L + R_L r_i` on
//! a rigid body). The intermediate lumped masses are `m_i1 .. m_i(n_i-1)`, so
//! the last entry of each cable's mass list is not used by these systems.
//!
//! No forward simulation is offered here: the residuals take a full snapshot
//! of positions, accelerations and tensions (typically from the flatness
//! maps) and report how far it is from satisfying the Newton–Euler equations.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::{CableParams, QuadParams};
use crate::error::{Error, Result};
use crate::geom::{RotMat, UnitVec};
use crate::scalar::Real;

/// One quadrotor and the cable hanging from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CableUnit<T: Real = f64> {
    pub quad: QuadParams<T>,
    pub cable: CableParams<T>,
}

impl<T: Real> CableUnit<T> {
    pub fn new(quad: QuadParams<T>, cable: CableParams<T>) -> Self {
        Self { quad, cable }
    }

    /// Masses of the intermediate joints, `m_i1 .. m_i(n_i-1)`.
    pub fn joint_masses(&self) -> &[T] {
        let m = self.cable.masses();
        &m[..m.len() - 1]
    }

    pub fn links(&self) -> usize {
        self.cable.links()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPointParams<T: Real = f64> {
    pub units: Vec<CableUnit<T>>,
    pub load_mass: T,
}

impl<T: Real> MultiPointParams<T> {
    pub fn new(units: Vec<CableUnit<T>>, load_mass: T) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::InvalidParams("need at least one quadrotor".into()));
        }
        if !(load_mass > T::zero()) {
            return Err(Error::InvalidParams("load mass must be positive".into()));
        }
        Ok(Self { units, load_mass })
    }

    pub fn quadrotors(&self) -> usize {
        self.units.len()
    }

    pub fn links(&self) -> Vec<usize> {
        self.units.iter().map(CableUnit::links).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidLoadParams<T: Real = f64> {
    pub units: Vec<CableUnit<T>>,
    pub load_mass: T,
    pub load_inertia: Matrix3<T>,
    /// Attachment points in the load body frame, one per cable.
    pub attachments: Vec<Vector3<T>>,
}

impl<T: Real> RigidLoadParams<T> {
    pub fn new(
        units: Vec<CableUnit<T>>,
        load_mass: T,
        load_inertia: Matrix3<T>,
        attachments: Vec<Vector3<T>>,
    ) -> Result<Self> {
        if units.len() < 3 {
            return Err(Error::InvalidParams(
                "a rigid load needs at least three cables".into(),
            ));
        }
        if attachments.len() != units.len() {
            return Err(Error::InvalidParams(format!(
                "{} attachment points for {} cables",
                attachments.len(),
                units.len()
            )));
        }
        if !(load_mass > T::zero()) || load_inertia.cholesky().is_none() {
            return Err(Error::InvalidParams(
                "load mass must be positive and inertia positive definite".into(),
            ));
        }
        Ok(Self {
            units,
            load_mass,
            load_inertia,
            attachments,
        })
    }

    pub fn quadrotors(&self) -> usize {
        self.units.len()
    }

    pub fn links(&self) -> Vec<usize> {
        self.units.iter().map(CableUnit::links).collect()
    }
}

/// Positions, accelerations, tensions and inputs of one quadrotor and its
/// cable at an instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CableSnapshot<T: Real = f64> {
    pub x0: Vector3<T>,
    pub a0: Vector3<T>,
    pub rot: RotMat<T>,
    pub omega: Vector3<T>,
    pub omega_dot: Vector3<T>,
    pub thrust: T,
    pub moment: Vector3<T>,
    /// Intermediate joint positions `x_i1 .. x_i(n_i-1)`.
    pub joints: Vec<Vector3<T>>,
    pub joint_accels: Vec<Vector3<T>>,
    /// Link directions `q_i1 .. q_in_i`.
    pub q: Vec<UnitVec<T>>,
    /// Tension vectors `T_ij q_ij`.
    pub tensions: Vec<Vector3<T>>,
}

impl<T: Real> CableSnapshot<T> {
    /// Hanging straight down from `x0` at rest, carrying the given tension
    /// magnitude in every link.
    pub fn hanging(unit: &CableUnit<T>, x0: Vector3<T>, tensions: Vec<T>, thrust: T) -> Self {
        let mut joints = Vec::new();
        let mut x = x0;
        for &l in &unit.cable.lengths()[..unit.links() - 1] {
            x -= Vector3::z() * l;
            joints.push(x);
        }
        Self {
            x0,
            a0: Vector3::zeros(),
            rot: RotMat::identity(),
            omega: Vector3::zeros(),
            omega_dot: Vector3::zeros(),
            thrust,
            moment: Vector3::zeros(),
            joint_accels: vec![Vector3::zeros(); joints.len()],
            joints,
            q: vec![UnitVec::down(); unit.links()],
            tensions: tensions.into_iter().map(|t| -Vector3::z() * t).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPointSnapshot<T: Real = f64> {
    pub load: Vector3<T>,
    pub load_accel: Vector3<T>,
    pub cables: Vec<CableSnapshot<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidLoadSnapshot<T: Real = f64> {
    pub load: Vector3<T>,
    pub load_accel: Vector3<T>,
    pub load_rot: RotMat<T>,
    pub load_omega: Vector3<T>,
    pub load_omega_dot: Vector3<T>,
    pub cables: Vec<CableSnapshot<T>>,
}

/// A link whose reconstructed tension points against its direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensionWarning<T: Real = f64> {
    pub cable: usize,
    pub link: usize,
    pub tension: T,
}

/// Largest residual norm of each equation group.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiResidual<T: Real = f64> {
    /// Joint and attachment position chains.
    pub kinematics: T,
    /// `m_i(ẍ_i0 + g e₃) − f_i R_i e₃ − T_i1 q_i1`
    pub quad_force: T,
    /// `m_ij(ẍ_ij + g e₃) + T_ij q_ij − T_i(j+1) q_i(j+1)`
    pub joint_force: T,
    /// `m_L(ẍ_L + g e₃) + Σ T_in_i q_in_i`
    pub load_force: T,
    /// Rigid loads only: `J_LΩ̇_L + Ω_L × J_LΩ_L + Σ r_i × R_Lᵀ T_in_i q_in_i`
    pub load_moment: T,
    /// `J_iΩ̇_i + Ω_i × J_iΩ_i − M_i`
    pub attitude: T,
    /// Tension vectors not parallel to their link direction.
    pub alignment: T,
    pub warnings: Vec<TensionWarning<T>>,
}

impl<T: Real> MultiResidual<T> {
    pub fn max(&self) -> T {
        [
            self.kinematics,
            self.quad_force,
            self.joint_force,
            self.load_force,
            self.load_moment,
            self.attitude,
            self.alignment,
        ]
        .into_iter()
        .fold(T::zero(), |a, b| a.max(b))
    }
}

fn check_shapes<T: Real>(units: &[CableUnit<T>], cables: &[CableSnapshot<T>]) -> Result<()> {
    if units.len() != cables.len() {
        return Err(Error::Dimension(format!(
            "{} cables in snapshot, {} in params",
            cables.len(),
            units.len()
        )));
    }
    for (i, (u, c)) in units.iter().zip(cables).enumerate() {
        let n = u.links();
        if c.q.len() != n
            || c.tensions.len() != n
            || c.joints.len() + 1 != n
            || c.joint_accels.len() + 1 != n
        {
            return Err(Error::Dimension(format!(
                "cable {i}: expected {n} links and {} joints",
                n - 1
            )));
        }
    }
    Ok(())
}

/// Residuals of everything but the load equations, accumulated into `r`.
/// `ends[i]` is where cable `i` attaches to the load.
fn cable_residuals<T: Real>(
    units: &[CableUnit<T>],
    cables: &[CableSnapshot<T>],
    ends: &[Vector3<T>],
    r: &mut MultiResidual<T>,
) {
    let e3 = Vector3::z();
    for (i, (u, c)) in units.iter().zip(cables).enumerate() {
        let g = u.quad.gravity;
        let l = u.cable.lengths();
        let n = u.links();

        let mut prev = c.x0;
        for j in 0..n {
            let next = if j + 1 < n { c.joints[j] } else { ends[i] };
            r.kinematics = r.kinematics.max((next - prev - c.q[j].as_vec() * l[j]).norm());
            prev = next;
        }

        let qf = (c.a0 + e3 * g) * u.quad.mass
            - c.rot.as_mat() * e3 * c.thrust
            - c.tensions[0];
        r.quad_force = r.quad_force.max(qf.norm());

        for (j, &m) in u.joint_masses().iter().enumerate() {
            let jf = (c.joint_accels[j] + e3 * g) * m + c.tensions[j] - c.tensions[j + 1];
            r.joint_force = r.joint_force.max(jf.norm());
        }

        let jq = &u.quad.inertia;
        let att = jq * c.omega_dot + c.omega.cross(&(jq * c.omega)) - c.moment;
        r.attitude = r.attitude.max(att.norm());

        for (j, (tq, q)) in c.tensions.iter().zip(&c.q).enumerate() {
            r.alignment = r.alignment.max(tq.cross(q).norm());
            let t = tq.dot(q);
            if t < T::zero() {
                r.warnings.push(TensionWarning {
                    cable: i,
                    link: j,
                    tension: t,
                });
            }
        }
    }
}

fn empty_residual<T: Real>() -> MultiResidual<T> {
    MultiResidual {
        kinematics: T::zero(),
        quad_force: T::zero(),
        joint_force: T::zero(),
        load_force: T::zero(),
        load_moment: T::zero(),
        attitude: T::zero(),
        alignment: T::zero(),
        warnings: Vec::new(),
    }
}

/// Residuals of the point-mass load system.
pub fn residual_multi_point<T: Real>(
    s: &MultiPointSnapshot<T>,
    params: &MultiPointParams<T>,
) -> Result<MultiResidual<T>> {
    check_shapes(&params.units, &s.cables)?;
    let mut r = empty_residual();
    let ends = vec![s.load; s.cables.len()];
    cable_residuals(&params.units, &s.cables, &ends, &mut r);

    let g = params.units[0].quad.gravity;
    let sum = s
        .cables
        .iter()
        .fold(Vector3::zeros(), |acc, c| acc + c.tensions.last().unwrap());
    r.load_force = ((s.load_accel + Vector3::z() * g) * params.load_mass + sum).norm();
    Ok(r)
}

/// Residuals of the rigid-body load system.
pub fn residual_multi_rigid<T: Real>(
    s: &RigidLoadSnapshot<T>,
    params: &RigidLoadParams<T>,
) -> Result<MultiResidual<T>> {
    check_shapes(&params.units, &s.cables)?;
    let rl = s.load_rot.as_mat();
    let ends: Vec<_> = params
        .attachments
        .iter()
        .map(|ri| s.load + rl * ri)
        .collect();
    let mut r = empty_residual();
    cable_residuals(&params.units, &s.cables, &ends, &mut r);

    let g = params.units[0].quad.gravity;
    let mut force = (s.load_accel + Vector3::z() * g) * params.load_mass;
    let jl = &params.load_inertia;
    let mut moment = jl * s.load_omega_dot + s.load_omega.cross(&(jl * s.load_omega));
    for (c, ri) in s.cables.iter().zip(&params.attachments) {
        let tq = c.tensions.last().unwrap();
        force += tq;
        moment += ri.cross(&(rl.transpose() * tq));
    }
    r.load_force = force.norm();
    r.load_moment = moment.norm();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(n: usize) -> CableUnit {
        CableUnit::new(
            QuadParams::reference(),
            CableParams::uniform(n, 0.1, 0.25).unwrap(),
        )
    }

    /// Static hover: every cable vertical, carrying the load share plus the
    /// joints below each link.
    fn hover_cable(u: &CableUnit, x0: Vector3<f64>, share: f64) -> CableSnapshot {
        let g = u.quad.gravity;
        let jm = u.joint_masses();
        let tensions = (0..u.links())
            .map(|j| (share + jm[j..].iter().sum::<f64>()) * g)
            .collect();
        let thrust = (u.quad.mass + jm.iter().sum::<f64>() + share) * g;
        CableSnapshot::hanging(u, x0, tensions, thrust)
    }

    fn point_hover() -> (MultiPointSnapshot, MultiPointParams) {
        let params = MultiPointParams::new(vec![unit(3), unit(3)], 0.4).unwrap();
        // Vertical cables from two quadrotors can only meet at the load when
        // both hang from the same point above it.
        let top = Vector3::new(0.0, 0.0, 0.75);
        let cables = params
            .units
            .iter()
            .map(|u| hover_cable(u, top, 0.2))
            .collect();
        let s = MultiPointSnapshot {
            load: Vector3::zeros(),
            load_accel: Vector3::zeros(),
            cables,
        };
        (s, params)
    }

    #[test]
    fn static_point_hover() {
        let (s, params) = point_hover();
        let r = residual_multi_point(&s, &params).unwrap();
        assert!(r.max() < 1e-10, "{r:?}");
        assert!(r.warnings.is_empty());
        // f_i = (m_i + Σ_j m_ij + m_L/2) g
        assert_relative_eq!(s.cables[0].thrust, (0.85 + 0.2 + 0.2) * 9.81, epsilon = 1e-12);
    }

    #[test]
    fn missing_tension_shows_load_weight() {
        let (mut s, params) = point_hover();
        for c in &mut s.cables {
            for t in &mut c.tensions {
                *t = Vector3::zeros();
            }
        }
        let r = residual_multi_point(&s, &params).unwrap();
        assert_relative_eq!(r.load_force, 0.4 * 9.81, epsilon = 1e-14);
    }

    #[test]
    fn negative_tension_is_a_warning() {
        let (mut s, params) = point_hover();
        s.cables[1].tensions[0] = -s.cables[1].tensions[0];
        let r = residual_multi_point(&s, &params).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert_eq!((r.warnings[0].cable, r.warnings[0].link), (1, 0));
    }

    fn rigid_hover() -> (RigidLoadSnapshot, RigidLoadParams) {
        let p = 3;
        let attachments: Vec<_> = (0..p)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
                Vector3::new(0.3 * a.cos(), 0.3 * a.sin(), 0.0)
            })
            .collect();
        let params = RigidLoadParams::new(
            vec![unit(4); p],
            0.6,
            Matrix3::from_diagonal(&Vector3::new(0.02, 0.02, 0.03)),
            attachments.clone(),
        )
        .unwrap();
        let cables = params
            .units
            .iter()
            .zip(&attachments)
            .map(|(u, r)| hover_cable(u, r + Vector3::new(0.0, 0.0, 1.0), 0.2))
            .collect();
        let s = RigidLoadSnapshot {
            load: Vector3::zeros(),
            load_accel: Vector3::zeros(),
            load_rot: RotMat::identity(),
            load_omega: Vector3::zeros(),
            load_omega_dot: Vector3::zeros(),
            cables,
        };
        (s, params)
    }

    #[test]
    fn symmetric_rigid_hover() {
        let (s, params) = rigid_hover();
        let r = residual_multi_rigid(&s, &params).unwrap();
        assert!(r.load_moment < 1e-10);
        assert!(r.max() < 1e-10, "{r:?}");
    }

    #[test]
    fn perturbed_tension_shows_up_exactly() {
        let (mut s, params) = rigid_hover();
        let delta = Vector3::new(0.01, -0.02, 0.005);
        let last = s.cables[1].tensions.len() - 1;
        s.cables[1].tensions[last] += delta;
        let r = residual_multi_rigid(&s, &params).unwrap();
        assert_relative_eq!(r.load_force, delta.norm(), epsilon = 1e-14);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (mut s, params) = point_hover();
        s.cables[0].q.pop();
        assert!(matches!(
            residual_multi_point(&s, &params),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rigid_load_needs_three_cables() {
        assert!(RigidLoadParams::new(
            vec![unit(2); 2],
            1.0,
            Matrix3::identity(),
            vec![Vector3::zeros(); 2]
        )
        .is_err());
    }
}
