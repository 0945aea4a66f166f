//! Flatness maps for several quadrotors carrying one load.
//!
//! Both systems reduce to the single-cable recursion once the last-link
//! tension of every cable is known. For a point-mass load the flat outputs
//! fix all but one of those tensions and the load equation fixes the last.
//! For a rigid load the six load equations are solved for all `p` tensions
//! at once, with the `3p − 6` dimensional remainder supplied as a flat output.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{assemble_point, chain_up, required_load_order, DesiredPoint, REQUIRED_YAW_ORDER};
use crate::dynamics::multi::{
    CableSnapshot, MultiPointParams, MultiPointSnapshot, RigidLoadParams, RigidLoadSnapshot,
};
use crate::error::{Error, Result};
use crate::geom::{hat, RotMat};
use crate::jet::{require_order, Jet, Jet3};
use crate::scalar::{cast, Real};
use crate::signal::{RotationSignal, Signal, Signal3};

/// Load position, last-link tensions of cables `2..p`, and all yaws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatOutputsMultiPoint {
    pub load: Signal3,
    /// One entry per cable except the first.
    pub tensions: Vec<Signal3>,
    pub yaws: Vec<Signal>,
}

/// Load pose, kernel coordinates `Λ ∈ R^{3p−6}`, and all yaws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatOutputsRigid {
    pub load: Signal3,
    pub attitude: RotationSignal,
    #[serde(default)]
    pub lambda: Vec<Signal>,
    pub yaws: Vec<Signal>,
}

fn cable_snapshot<T: Real>(dp: &DesiredPoint<T>) -> CableSnapshot<T> {
    let n = dp.links();
    CableSnapshot {
        x0: dp.x0,
        a0: dp.a0,
        rot: dp.rot,
        omega: dp.omega,
        omega_dot: dp.omega_dot,
        thrust: dp.thrust,
        moment: dp.moment,
        joints: dp.positions[..n - 1].to_vec(),
        joint_accels: dp.accelerations[..n - 1].to_vec(),
        q: dp.q.clone(),
        tensions: dp.tensions.vectors.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPointReference<T: Real = f64> {
    pub t: T,
    pub load: Vector3<T>,
    pub load_velocity: Vector3<T>,
    pub load_accel: Vector3<T>,
    /// Per-quadrotor reference; the last position of each is the load.
    pub cables: Vec<DesiredPoint<T>>,
}

impl<T: Real> MultiPointReference<T> {
    pub fn snapshot(&self) -> MultiPointSnapshot<T> {
        MultiPointSnapshot {
            load: self.load,
            load_accel: self.load_accel,
            cables: self.cables.iter().map(cable_snapshot).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidLoadReference<T: Real = f64> {
    pub t: T,
    pub load: Vector3<T>,
    pub load_velocity: Vector3<T>,
    pub load_accel: Vector3<T>,
    pub load_rot: RotMat<T>,
    pub load_omega: Vector3<T>,
    pub load_omega_dot: Vector3<T>,
    pub distribution: TensionDistribution<T>,
    /// Per-quadrotor reference; the last position of each is its attachment point.
    pub cables: Vec<DesiredPoint<T>>,
}

impl<T: Real> RigidLoadReference<T> {
    pub fn snapshot(&self) -> RigidLoadSnapshot<T> {
        RigidLoadSnapshot {
            load: self.load,
            load_accel: self.load_accel,
            load_rot: self.load_rot,
            load_omega: self.load_omega,
            load_omega_dot: self.load_omega_dot,
            cables: self.cables.iter().map(cable_snapshot).collect(),
        }
    }
}

fn check_yaws(yaws: usize, p: usize) -> Result<()> {
    if yaws != p {
        return Err(Error::Dimension(format!("{yaws} yaw signals for {p} quadrotors")));
    }
    Ok(())
}

/// References for a point-mass load carried by `p` quadrotors.
///
/// Cable 1 carries `Tq_1 = −m_L(ẍ_L + g e₃) − Σ_{i≥2} Tq_i`.
pub fn flat_multi_point<T: Real>(
    fo: &FlatOutputsMultiPoint,
    params: &MultiPointParams<T>,
    t: T,
) -> Result<MultiPointReference<T>> {
    let p = params.quadrotors();
    check_yaws(fo.yaws.len(), p)?;
    if fo.tensions.len() + 1 != p {
        return Err(Error::Dimension(format!(
            "{} tension outputs for {p} quadrotors (need p − 1)",
            fo.tensions.len()
        )));
    }
    let links = params.links();
    let n_max = *links.iter().max().unwrap();
    let load = fo.load.jet(t, required_load_order(n_max))?;
    let g = params.units[0].quad.gravity;
    let ge3 = Vector3::new(T::zero(), T::zero(), g);

    let mut last: Vec<Jet3<T>> = Vec::with_capacity(p);
    let mut tq1 = -&load.diff().diff().add_const(&ge3).scale(params.load_mass);
    for (sig, &n) in fo.tensions.iter().zip(&links[1..]) {
        let tq = sig.jet(t, 2 * n + 2)?;
        tq1 = &tq1 - &tq;
        last.push(tq);
    }
    last.insert(0, tq1);

    let cables = params
        .units
        .iter()
        .zip(last)
        .zip(&fo.yaws)
        .enumerate()
        .map(|(i, ((u, tq), yaw))| {
            let chain = chain_up(
                &load,
                tq,
                u.joint_masses(),
                u.cable.lengths(),
                u.quad.gravity,
                i,
                t,
            )?;
            let yaw = yaw.jet(t, REQUIRED_YAW_ORDER)?;
            assemble_point(&chain, &yaw, &u.quad, t)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MultiPointReference {
        t,
        load: load.value(),
        load_velocity: load.derivative(1),
        load_accel: load.derivative(2),
        cables,
    })
}

/// The constant part of the rigid-load tension distribution.
///
/// `Φ = [I … I; r̂₁ … r̂_p]` maps stacked body-frame tensions to the load
/// wrench. `Φ⁺ = Φᵀ(ΦΦᵀ)⁻¹` is its right inverse and the columns of `null`
/// are an orthonormal basis of its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionMap<T: Real = f64> {
    pub phi: DMatrix<T>,
    pub phi_pinv: DMatrix<T>,
    pub null: DMatrix<T>,
}

impl<T: Real> TensionMap<T> {
    pub fn new(attachments: &[Vector3<T>]) -> Result<Self> {
        let p = attachments.len();
        let mut phi = DMatrix::zeros(6, 3 * p);
        for (i, r) in attachments.iter().enumerate() {
            phi.fixed_view_mut::<3, 3>(0, 3 * i)
                .copy_from(&Matrix3::identity());
            phi.fixed_view_mut::<3, 3>(3, 3 * i).copy_from(&hat(r));
        }

        let gram = &phi * phi.transpose();
        let eig = SymmetricEigen::new(gram.clone());
        let top = eig.eigenvalues.amax();
        let rank = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > top * cast(1e-10))
            .count();
        if rank < 6 {
            return Err(Error::RankDeficientGeometry { rank });
        }
        let gram_inv = gram
            .cholesky()
            .ok_or(Error::RankDeficientGeometry { rank })?
            .inverse();
        let phi_pinv = phi.transpose() * gram_inv;

        // Kernel of Φ: eigenvectors of ΦᵀΦ with the 3p − 6 smallest
        // eigenvalues, each signed so its largest-magnitude entry is positive.
        let eig = SymmetricEigen::new(phi.transpose() * &phi);
        let mut order: Vec<usize> = (0..3 * p).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let k = 3 * p - 6;
        let mut null = DMatrix::zeros(3 * p, k);
        for (c, &idx) in order[..k].iter().enumerate() {
            let mut v = eig.eigenvectors.column(idx).into_owned();
            let imax = v.iamax();
            if v[imax] < T::zero() {
                v = -v;
            }
            null.set_column(c, &v);
        }
        Ok(Self {
            phi,
            phi_pinv,
            null,
        })
    }

    pub fn quadrotors(&self) -> usize {
        self.phi.ncols() / 3
    }

    pub fn kernel_dim(&self) -> usize {
        self.null.ncols()
    }

    /// `𝕋 = Φ⁺W + NΛ`.
    pub fn distribute(&self, wrench: &Vector6<T>, lambda: &DVector<T>) -> DVector<T> {
        let w = DVector::from_column_slice(wrench.as_slice());
        &self.phi_pinv * w + &self.null * lambda
    }

    /// Applies a constant matrix to a vector of jets.
    fn apply(m: &DMatrix<T>, v: &[Jet<T>]) -> Vec<Jet<T>> {
        let order = v.iter().map(Jet::order).min().unwrap_or(0);
        (0..m.nrows())
            .map(|r| {
                let mut acc = Jet::constant(T::zero(), order);
                for (c, x) in v.iter().enumerate() {
                    if m[(r, c)] != T::zero() {
                        acc += &x.scale(m[(r, c)]);
                    }
                }
                acc
            })
            .collect()
    }
}

/// Tensions realising a load wrench at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionDistribution<T: Real = f64> {
    pub map: TensionMap<T>,
    /// Stacked body-frame last-link tensions `R_Lᵀ T_in_i q_in_i`.
    pub tensions: DVector<T>,
    /// `−[R_Lᵀ m_L(ẍ_L + g e₃); J_LΩ̇_L + Ω_L × J_LΩ_L]`
    pub wrench: Vector6<T>,
}

impl<T: Real> TensionDistribution<T> {
    /// `‖Φ𝕋 − W‖`
    pub fn residual(&self) -> T {
        let w = DVector::from_column_slice(self.wrench.as_slice());
        (&self.map.phi * &self.tensions - w).norm()
    }

    /// World-frame tension vector of cable `i`.
    pub fn world_tension(&self, i: usize, load_rot: &RotMat<T>) -> Vector3<T> {
        load_rot.as_mat() * self.tensions.fixed_rows::<3>(3 * i)
    }
}

fn load_wrench<T: Real>(
    load_rot: &Matrix3<T>,
    load_omega: &Vector3<T>,
    load_omega_dot: &Vector3<T>,
    load_accel: &Vector3<T>,
    load_mass: T,
    load_inertia: &Matrix3<T>,
    gravity: T,
) -> Vector6<T> {
    let f = load_rot.transpose() * (load_accel + Vector3::z() * gravity) * load_mass;
    let m = load_inertia * load_omega_dot + load_omega.cross(&(load_inertia * load_omega));
    -Vector6::new(f.x, f.y, f.z, m.x, m.y, m.z)
}

/// Last-link tensions of a rigid load at one instant.
#[allow(clippy::too_many_arguments)]
pub fn tension_distribution<T: Real>(
    attachments: &[Vector3<T>],
    load_rot: &RotMat<T>,
    load_omega: &Vector3<T>,
    load_omega_dot: &Vector3<T>,
    load_accel: &Vector3<T>,
    lambda: &DVector<T>,
    load_mass: T,
    load_inertia: &Matrix3<T>,
    gravity: T,
) -> Result<TensionDistribution<T>> {
    let map = TensionMap::new(attachments)?;
    if lambda.len() != map.kernel_dim() {
        return Err(Error::Dimension(format!(
            "Λ has {} entries, kernel has {}",
            lambda.len(),
            map.kernel_dim()
        )));
    }
    let wrench = load_wrench(
        load_rot.as_mat(),
        load_omega,
        load_omega_dot,
        load_accel,
        load_mass,
        load_inertia,
        gravity,
    );
    let tensions = map.distribute(&wrench, lambda);
    Ok(TensionDistribution {
        map,
        tensions,
        wrench,
    })
}

/// References for a rigid load carried by `p ≥ 3` quadrotors.
pub fn flat_multi_rigid<T: Real>(
    fo: &FlatOutputsRigid,
    params: &RigidLoadParams<T>,
    t: T,
) -> Result<RigidLoadReference<T>> {
    let map = TensionMap::new(&params.attachments)?;
    flat_multi_rigid_with_map(fo, params, &map, t)
}

/// As [`flat_multi_rigid`] with a precomputed [`TensionMap`].
pub fn flat_multi_rigid_with_map<T: Real>(
    fo: &FlatOutputsRigid,
    params: &RigidLoadParams<T>,
    map: &TensionMap<T>,
    t: T,
) -> Result<RigidLoadReference<T>> {
    let p = params.quadrotors();
    check_yaws(fo.yaws.len(), p)?;
    if map.quadrotors() != p {
        return Err(Error::Dimension("tension map built for another load".into()));
    }
    let k = map.kernel_dim();
    let lambda_sigs: Vec<Signal> = if fo.lambda.is_empty() {
        vec![Signal::zero(); k]
    } else {
        fo.lambda.clone()
    };
    if lambda_sigs.len() != k {
        return Err(Error::Dimension(format!(
            "Λ has {} signals, kernel has {k}",
            lambda_sigs.len()
        )));
    }

    let links = params.links();
    let n_max = *links.iter().max().unwrap();
    let order = required_load_order(n_max);
    let g = params.units[0].quad.gravity;
    let ge3 = Vector3::new(T::zero(), T::zero(), g);
    let load = fo.load.jet(t, order)?;
    let att = fo.attitude.jet(t, order)?;
    require_order(att.omega.order(), order - 1, "load attitude")?;

    // Wrench jets, then body-frame tension jets by the constant maps.
    let acc = load.diff().diff().add_const(&ge3);
    let f = att.rot.tr_mul_vec(&acc).scale(params.load_mass);
    let omega_dot = att.omega.diff();
    let jl = &params.load_inertia;
    let m = &omega_dot.transform(jl) + &att.omega.cross(&att.omega.transform(jl));
    let w: Vec<Jet<T>> = [f.x, f.y, f.z, m.x, m.y, m.z]
        .into_iter()
        .map(|j| -j)
        .collect();
    let lambda = lambda_sigs
        .iter()
        .map(|s| s.jet(t, 2 * n_max + 2))
        .collect::<Result<Vec<_>>>()?;
    let from_w = TensionMap::apply(&map.phi_pinv, &w);
    let from_l = TensionMap::apply(&map.null, &lambda);
    let body: Vec<Jet<T>> = from_w.iter().zip(&from_l).map(|(a, b)| a + b).collect();

    let cables = params
        .units
        .iter()
        .zip(&params.attachments)
        .zip(&fo.yaws)
        .enumerate()
        .map(|(i, ((u, r), yaw))| {
            let ti = Jet3::new(
                body[3 * i].clone(),
                body[3 * i + 1].clone(),
                body[3 * i + 2].clone(),
            );
            // world-frame last-link tension R_L 𝕋_i
            let tq = att.rot.mul_vec(&ti);
            let end = &load + &att.rot.mul_const(r);
            let chain = chain_up(&end, tq, u.joint_masses(), u.cable.lengths(), u.quad.gravity, i, t)?;
            let yaw = yaw.jet(t, REQUIRED_YAW_ORDER)?;
            assemble_point(&chain, &yaw, &u.quad, t)
        })
        .collect::<Result<Vec<_>>>()?;

    let load_rot = RotMat::new_orthonormalize(att.rot.derivative(0));
    let wrench = Vector6::from_iterator(w.iter().map(Jet::value));
    let tensions = DVector::from_iterator(3 * p, body.iter().map(Jet::value));
    Ok(RigidLoadReference {
        t,
        load: load.value(),
        load_velocity: load.derivative(1),
        load_accel: load.derivative(2),
        load_rot,
        load_omega: att.omega.value(),
        load_omega_dot: omega_dot.value(),
        distribution: TensionDistribution {
            map: map.clone(),
            tensions,
            wrench,
        },
        cables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::multi::{residual_multi_point, residual_multi_rigid, CableUnit};
    use crate::dynamics::{CableParams, QuadParams};
    use approx::assert_relative_eq;

    type V = Vector3<f64>;

    fn unit(n: usize) -> CableUnit {
        CableUnit::new(
            QuadParams::reference(),
            CableParams::uniform(n, 0.1, 0.25).unwrap(),
        )
    }

    fn ring(p: usize, radius: f64) -> Vec<V> {
        (0..p)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
                V::new(radius * a.cos(), radius * a.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn symmetric_point_hover() {
        let params = MultiPointParams::new(vec![unit(3), unit(3)], 0.4).unwrap();
        let fo = FlatOutputsMultiPoint {
            load: Signal3::constant([0.0, 0.0, 0.0]),
            tensions: vec![Signal3::constant([0.0, 0.0, -0.2 * 9.81])],
            yaws: vec![Signal::zero(); 2],
        };
        let r = flat_multi_point(&fo, &params, 0.0).unwrap();
        let t1 = r.cables[0].tensions.vectors[2];
        assert_relative_eq!(t1, V::new(0.0, 0.0, -0.2 * 9.81), epsilon = 1e-14);
        let res = residual_multi_point(&r.snapshot(), &params).unwrap();
        assert!(res.max() < 1e-10, "{res:?}");
    }

    #[test]
    fn one_quadrotor_reduces_to_single_map() {
        // A one-cable point-load system is the single system whose last mass
        // is the load.
        let params = MultiPointParams::new(vec![unit(3)], 0.1).unwrap();
        let fo = FlatOutputsMultiPoint {
            load: crate::flatness::FlatOutputsSingle::reference().load,
            tensions: vec![],
            yaws: vec![Signal::zero()],
        };
        let multi = flat_multi_point(&fo, &params, 1.3).unwrap();
        let single = crate::flatness::flat_single(
            &crate::flatness::FlatOutputsSingle::reference(),
            &params.units[0].quad,
            &params.units[0].cable,
            1.3,
        )
        .unwrap();
        assert_relative_eq!(multi.cables[0].x0, single.x0, epsilon = 1e-12);
        assert_relative_eq!(multi.cables[0].thrust, single.thrust, epsilon = 1e-12);
        assert_relative_eq!(multi.cables[0].moment, single.moment, epsilon = 1e-12);
    }

    #[test]
    fn tension_map_properties() {
        for p in [3, 4, 6] {
            let map = TensionMap::new(&ring(p, 0.4)).unwrap();
            assert_eq!(map.kernel_dim(), 3 * p - 6);
            let pp = &map.phi * &map.phi_pinv;
            assert!((pp - DMatrix::identity(6, 6)).amax() < 1e-12);
            assert!((&map.phi * &map.null).amax() < 1e-12);
            let ntn = map.null.transpose() * &map.null;
            assert!((ntn - DMatrix::identity(3 * p - 6, 3 * p - 6)).amax() < 1e-12);
        }
    }

    #[test]
    fn collinear_attachments_are_rejected() {
        let pts = vec![V::new(-1.0, 0.0, 0.0), V::zeros(), V::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            TensionMap::new(&pts),
            Err(Error::RankDeficientGeometry { .. })
        ));
    }

    #[test]
    fn symmetric_static_distribution() {
        let d = tension_distribution(
            &ring(3, 0.3),
            &RotMat::identity(),
            &V::zeros(),
            &V::zeros(),
            &V::zeros(),
            &DVector::zeros(3),
            0.9,
            &Matrix3::identity(),
            9.81,
        )
        .unwrap();
        for i in 0..3 {
            assert_relative_eq!(d.tensions[3 * i + 2], -0.9 * 9.81 / 3.0, epsilon = 1e-12);
        }
        assert!(d.residual() < 1e-12);
    }

    fn rigid(p: usize) -> RigidLoadParams {
        RigidLoadParams::new(
            vec![unit(3); p],
            0.6,
            Matrix3::from_diagonal(&V::new(0.02, 0.02, 0.035)),
            ring(p, 0.3),
        )
        .unwrap()
    }

    #[test]
    fn static_rigid_hover_puts_quadrotors_above_attachments() {
        let params = rigid(3);
        let fo = FlatOutputsRigid {
            load: Signal3::constant([0.0, 0.0, 0.0]),
            attitude: RotationSignal::identity(),
            lambda: vec![],
            yaws: vec![Signal::zero(); 3],
        };
        let r = flat_multi_rigid(&fo, &params, 0.0).unwrap();
        for (c, a) in r.cables.iter().zip(&params.attachments) {
            assert_relative_eq!(c.x0, a + V::new(0.0, 0.0, 0.75), epsilon = 1e-12);
        }
        let res = residual_multi_rigid(&r.snapshot(), &params).unwrap();
        assert!(res.max() < 1e-8, "{res:?}");
    }

    #[test]
    fn kernel_motion_changes_tensions_only() {
        let params = rigid(4);
        let base = FlatOutputsRigid {
            load: Signal3::new(Signal::sin(0.5, 0.2), Signal::cos(0.5, 0.2), Signal::zero()),
            attitude: RotationSignal::identity(),
            lambda: vec![],
            yaws: vec![Signal::zero(); 4],
        };
        let mut shifted = base.clone();
        shifted.lambda = (0..6).map(|k| Signal::constant(0.05 * k as f64)).collect();
        let a = flat_multi_rigid(&base, &params, 0.8).unwrap();
        let b = flat_multi_rigid(&shifted, &params, 0.8).unwrap();
        assert!((a.distribution.tensions.clone() - b.distribution.tensions.clone()).norm() > 0.01);
        assert!(b.distribution.residual() < 1e-10);
        assert_relative_eq!(a.distribution.wrench, b.distribution.wrench, epsilon = 1e-14);
        let res = residual_multi_rigid(&b.snapshot(), &params).unwrap();
        assert!(res.max() < 1e-6, "{res:?}");
    }
}
