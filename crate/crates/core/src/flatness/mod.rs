//! Differential-flatness maps.
//!
//! Given the load trajectory and the quadrotor yaw, every state and input of
//! the single-quadrotor system follows by walking up the cable: the load's
//! acceleration fixes the last link tension, whose direction is the link,
//! which places the next mass up, and so on to the quadrotor. The quadrotor's
//! required thrust vector then fixes its attitude, angular velocity, thrust
//! and moment.
//!
//! Every step runs on [`Jet`]s, so derivatives are exact. Each link consumes
//! two derivative orders and the attitude another two, which is why the load
//! trajectory is needed to order `2n + 4`.

pub mod multi;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use multi::{
    flat_multi_point, flat_multi_rigid, tension_distribution, FlatOutputsMultiPoint,
    FlatOutputsRigid, MultiPointReference, RigidLoadReference, TensionDistribution, TensionMap,
};

use crate::dynamics::{Accelerations, CableParams, ControlInput, QuadParams, SingleSystemState, TensionProfile};
use crate::error::{Error, Result};
use crate::geom::{vee_skew, RotMat, UnitVec};
use crate::jet::{require_order, Jet, Jet3, JetMat3};
use crate::scalar::{cast, to_f64, Real};
use crate::signal::{Signal, Signal3};

/// Smallest link tension (N) treated as taut.
pub const TENSION_EPS: f64 = 1e-6;
/// Smallest thrust (N) for which the attitude is defined.
pub const THRUST_EPS: f64 = 1e-6;

/// Load position and quadrotor yaw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatOutputsSingle {
    pub load: Signal3,
    #[serde(default = "Signal::zero")]
    pub yaw: Signal,
}

impl FlatOutputsSingle {
    pub fn new(load: Signal3, yaw: Signal) -> Self {
        Self { load, yaw }
    }

    /// Load held at `position`, zero yaw.
    pub fn hover(position: [f64; 3]) -> Self {
        Self::new(Signal3::constant(position), Signal::zero())
    }

    /// `x = a_x(1 − cos 2πf₁t)`, `y = a_y sin 2πf₂t`, `z = a_z cos 2πf₃t`, zero yaw.
    pub fn lissajous(amp: [f64; 3], freq_hz: [f64; 3]) -> Self {
        Self::new(
            Signal3::new(
                Signal::one_minus_cos(amp[0], freq_hz[0]),
                Signal::sin(amp[1], freq_hz[1]),
                Signal::cos(amp[2], freq_hz[2]),
            ),
            Signal::zero(),
        )
    }

    /// The figure used throughout the examples: amplitudes (2, 2.5, 1.5) m,
    /// frequencies (1/4, 1/5, 1/7) Hz.
    pub fn reference() -> Self {
        Self::lissajous([2.0, 2.5, 1.5], [0.25, 0.2, 1.0 / 7.0])
    }
}

/// Derivative order of the load trajectory consumed for an `n`-link cable.
pub fn required_load_order(links: usize) -> usize {
    2 * links + 4
}

/// Derivative order of the yaw consumed by the attitude map.
pub const REQUIRED_YAW_ORDER: usize = 2;

/// Attitude-level reference of one quadrotor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadReference<T: Real = f64> {
    pub rot: RotMat<T>,
    pub omega: Vector3<T>,
    pub omega_dot: Vector3<T>,
    pub thrust: T,
    pub moment: Vector3<T>,
}

/// Attitude, body rates, thrust and moment that realise a thrust vector
/// `F = f R e₃` with heading `ψ`.
///
/// `b₃ = F/‖F‖`, `b₂ ∥ b₃ × (cos ψ, sin ψ, 0)`, `b₁ = b₂ × b₃`. Angular
/// velocity and acceleration come from the skew parts of `RᵀṘ` and `RᵀR̈`.
pub fn quad_flatness<T: Real>(
    thrust_vector: &Jet3<T>,
    yaw: &Jet<T>,
    qp: &QuadParams<T>,
    t: T,
) -> Result<QuadReference<T>> {
    require_order(thrust_vector.order(), 2, "thrust vector")?;
    require_order(yaw.order(), REQUIRED_YAW_ORDER, "yaw")?;
    let f = thrust_vector.truncate(2);
    let magnitude = f.value().norm();
    if magnitude <= cast(THRUST_EPS) {
        return Err(Error::ThrustSingularity {
            t: to_f64(t),
            magnitude: to_f64(magnitude),
        });
    }
    let b3 = f.normalize();
    let (s, c) = yaw.truncate(2).sin_cos();
    let b1c = Jet3::new(c, s, Jet::constant(T::zero(), 2));
    let b2_raw = b3.cross(&b1c);
    if b2_raw.value().norm() <= cast(1e-6) {
        return Err(Error::YawSingularity { t: to_f64(t) });
    }
    let b2 = b2_raw.normalize();
    let b1 = b2.cross(&b3);
    let rj = JetMat3::from_columns(b1, b2, b3);
    let r = rj.derivative(0);
    let omega = vee_skew(&(r.transpose() * rj.derivative(1)));
    let omega_dot = vee_skew(&(r.transpose() * rj.derivative(2)));
    let j = &qp.inertia;
    Ok(QuadReference {
        rot: RotMat::new_orthonormalize(r),
        omega,
        omega_dot,
        thrust: magnitude,
        moment: j * omega_dot + omega.cross(&(j * omega)),
    })
}

/// Full reference state, feedforward input and tensions at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPoint<T: Real = f64> {
    pub t: T,
    pub x0: Vector3<T>,
    pub v0: Vector3<T>,
    pub a0: Vector3<T>,
    pub rot: RotMat<T>,
    pub omega: Vector3<T>,
    pub omega_dot: Vector3<T>,
    pub q: Vec<UnitVec<T>>,
    pub w: Vec<Vector3<T>>,
    pub w_dot: Vec<Vector3<T>>,
    /// Positions of the link ends `x_1 .. x_n`; the last one is the load or
    /// the attachment point.
    pub positions: Vec<Vector3<T>>,
    pub velocities: Vec<Vector3<T>>,
    pub accelerations: Vec<Vector3<T>>,
    pub thrust: T,
    pub moment: Vector3<T>,
    pub tensions: TensionProfile<T>,
}

impl<T: Real> DesiredPoint<T> {
    pub fn links(&self) -> usize {
        self.q.len()
    }

    pub fn state(&self) -> SingleSystemState<T> {
        SingleSystemState {
            x0: self.x0,
            v0: self.v0,
            rot: self.rot,
            omega: self.omega,
            q: self.q.clone(),
            w: self.w.clone(),
        }
    }

    pub fn input(&self) -> ControlInput<T> {
        ControlInput::new(self.thrust, self.moment)
    }

    pub fn load(&self) -> Vector3<T> {
        *self.positions.last().expect("at least one link")
    }

    pub fn load_velocity(&self) -> Vector3<T> {
        *self.velocities.last().expect("at least one link")
    }

    /// Accelerations in the form produced by the forward model.
    pub fn model_accelerations(&self) -> Accelerations<T> {
        let q_ddot = self
            .q
            .iter()
            .zip(&self.w)
            .zip(&self.w_dot)
            .map(|((q, w), wd)| wd.cross(q) + w.cross(&w.cross(q)))
            .collect();
        Accelerations {
            v0_dot: self.a0,
            omega_dot: self.omega_dot,
            w_dot: self.w_dot.clone(),
            q_ddot,
        }
    }
}

/// Jets of one cable from the quadrotor (`x[0]`) down to its end (`x[n]`).
#[derive(Debug, Clone)]
pub(crate) struct ChainJets<T: Real> {
    pub x: Vec<Jet3<T>>,
    pub q: Vec<Jet3<T>>,
    pub tq: Vec<Jet3<T>>,
}

/// Walks up a cable from its end position and last-link tension.
///
/// `joint_masses` are the masses at `x_1 .. x_{n-1}`. The recursion is
/// `q_j = Tq_j/‖Tq_j‖`, `x_{j-1} = x_j − l_j q_j`,
/// `Tq_{j-1} = Tq_j − m_{j-1}(ẍ_{j-1} + g e₃)`.
pub(crate) fn chain_up<T: Real>(
    end: &Jet3<T>,
    tq_last: Jet3<T>,
    joint_masses: &[T],
    lengths: &[T],
    gravity: T,
    cable: usize,
    t: T,
) -> Result<ChainJets<T>> {
    let n = lengths.len();
    debug_assert_eq!(joint_masses.len() + 1, n);
    let ge3 = Vector3::new(T::zero(), T::zero(), gravity);
    let mut x = vec![end.clone(); n + 1];
    let mut q = Vec::with_capacity(n);
    let mut tq = Vec::with_capacity(n);
    let mut cur = tq_last;
    for j in (0..n).rev() {
        let magnitude = cur.value().norm();
        if magnitude <= cast(TENSION_EPS) {
            return Err(Error::TensionSingularity {
                cable,
                link: j + 1,
                t: to_f64(t),
                magnitude: to_f64(magnitude),
            });
        }
        let qj = cur.normalize();
        x[j] = &x[j + 1] - &qj.scale(lengths[j]);
        if j > 0 {
            let acc = x[j].diff().diff().add_const(&ge3);
            let next = &cur - &acc.scale(joint_masses[j - 1]);
            tq.push(cur);
            cur = next;
        } else {
            tq.push(cur.clone());
        }
        q.push(qj);
    }
    q.reverse();
    tq.reverse();
    Ok(ChainJets { x, q, tq })
}

/// Assembles the reference of one quadrotor from its cable chain.
pub(crate) fn assemble_point<T: Real>(
    chain: &ChainJets<T>,
    yaw: &Jet<T>,
    qp: &QuadParams<T>,
    t: T,
) -> Result<DesiredPoint<T>> {
    let ge3 = Vector3::new(T::zero(), T::zero(), qp.gravity);
    let x0 = &chain.x[0];
    let a0 = x0.diff().diff();
    let thrust_vector = &a0.add_const(&ge3).scale(qp.mass) - &chain.tq[0];
    let quad = quad_flatness(&thrust_vector, yaw, qp, t)?;

    let mut q = Vec::new();
    let mut w = Vec::new();
    let mut w_dot = Vec::new();
    for qj in &chain.q {
        require_order(qj.order(), 2, "link direction")?;
        let (q0, q1, q2) = (qj.derivative(0), qj.derivative(1), qj.derivative(2));
        let u = UnitVec::new_normalize(q0);
        w.push(u.project_tangent(&q0.cross(&q1)));
        w_dot.push(u.project_tangent(&q0.cross(&q2)));
        q.push(u);
    }
    let ends = &chain.x[1..];
    let vectors: Vec<_> = chain.tq.iter().map(Jet3::value).collect();
    let magnitudes = vectors.iter().zip(&q).map(|(v, q)| v.dot(q)).collect();
    Ok(DesiredPoint {
        t,
        x0: x0.value(),
        v0: x0.derivative(1),
        a0: a0.value(),
        rot: quad.rot,
        omega: quad.omega,
        omega_dot: quad.omega_dot,
        q,
        w,
        w_dot,
        positions: ends.iter().map(Jet3::value).collect(),
        velocities: ends.iter().map(|x| x.derivative(1)).collect(),
        accelerations: ends.iter().map(|x| x.derivative(2)).collect(),
        thrust: quad.thrust,
        moment: quad.moment,
        tensions: TensionProfile {
            vectors,
            magnitudes,
        },
    })
}

/// Flatness map on pre-evaluated jets, with an optional external force on
/// the load: `m_n(ẍ_n + g e₃) = −T_n q_n + F`.
pub fn flat_single_jets<T: Real>(
    load: &Jet3<T>,
    yaw: &Jet<T>,
    force: Option<&Jet3<T>>,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
    t: T,
) -> Result<DesiredPoint<T>> {
    let n = cp.links();
    require_order(load.order(), required_load_order(n), "load trajectory")?;
    require_order(yaw.order(), REQUIRED_YAW_ORDER, "yaw")?;
    if let Some(f) = force {
        require_order(f.order(), 2 * n + 2, "external force")?;
    }
    let ge3 = Vector3::new(T::zero(), T::zero(), qp.gravity);
    let m_n = cp.masses()[n - 1];
    let mut tq_last = -&load.diff().diff().add_const(&ge3).scale(m_n);
    if let Some(f) = force {
        tq_last = &tq_last + f;
    }
    let chain = chain_up(
        load,
        tq_last,
        &cp.masses()[..n - 1],
        cp.lengths(),
        qp.gravity,
        0,
        t,
    )?;
    assemble_point(&chain, yaw, qp, t)
}

/// Reference state and feedforward of the single-quadrotor system at `t`.
pub fn flat_single<T: Real>(
    fo: &FlatOutputsSingle,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
    t: T,
) -> Result<DesiredPoint<T>> {
    let load = fo.load.jet(t, required_load_order(cp.links()))?;
    let yaw = fo.yaw.jet(t, REQUIRED_YAW_ORDER)?;
    flat_single_jets(&load, &yaw, None, qp, cp, t)
}

/// As [`flat_single`] with an external force on the load.
pub fn flat_single_with_force<T: Real>(
    fo: &FlatOutputsSingle,
    force: &Signal3,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
    t: T,
) -> Result<DesiredPoint<T>> {
    let n = cp.links();
    let load = fo.load.jet(t, required_load_order(n))?;
    let yaw = fo.yaw.jet(t, REQUIRED_YAW_ORDER)?;
    let f = force.jet(t, 2 * n + 2)?;
    flat_single_jets(&load, &yaw, Some(&f), qp, cp, t)
}
