//! Newton–Euler models of quadrotors carrying loads on flexible cables.
//!
//! A cable is a chain of `n` rigid links joined by spherical joints, with the
//! mass of each link lumped at its lower end. For a single quadrotor the last
//! lumped mass is the payload. [`SingleModel`] integrates that system forward
//! in its compact mass-matrix form; [`multi`] evaluates equation residuals for
//! the cooperative multi-quadrotor systems.

pub mod multi;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{hat, orthonormalize, RotMat, UnitVec};
use crate::scalar::{cast, Real};

/// Rigid-body parameters of one quadrotor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams<T: Real = f64> {
    /// kg
    pub mass: T,
    /// kg·m², body frame
    pub inertia: Matrix3<T>,
    /// m/s²
    pub gravity: T,
}

impl<T: Real> QuadParams<T> {
    pub fn new(mass: T, inertia: Matrix3<T>, gravity: T) -> Result<Self> {
        if !(mass > T::zero()) {
            return Err(Error::InvalidParams("quadrotor mass must be positive".into()));
        }
        if (inertia - inertia.transpose()).amax() > cast::<T>(1e-12) * inertia.amax()
            || inertia.cholesky().is_none()
        {
            return Err(Error::InvalidParams(
                "inertia must be symmetric positive definite".into(),
            ));
        }
        Ok(Self {
            mass,
            inertia,
            gravity,
        })
    }

    /// 0.85 kg, J = diag(0.557, 0.557, 1.05)·10⁻² kg·m², g = 9.81 m/s².
    pub fn reference() -> Self {
        Self {
            mass: cast(0.85),
            inertia: Matrix3::from_diagonal(&Vector3::new(
                cast(0.557e-2),
                cast(0.557e-2),
                cast(1.05e-2),
            )),
            gravity: cast(9.81),
        }
    }
}

/// Link masses and lengths of one cable, top (quadrotor side) first.
#[derive(Debug, Clone, PartialEq)]
pub struct CableParams<T: Real = f64> {
    masses: Vec<T>,
    lengths: Vec<T>,
}

impl<T: Real> CableParams<T> {
    pub fn new(masses: Vec<T>, lengths: Vec<T>) -> Result<Self> {
        if masses.is_empty() || masses.len() != lengths.len() {
            return Err(Error::InvalidParams(format!(
                "cable needs n ≥ 1 links with one mass and one length each (got {} masses, {} lengths)",
                masses.len(),
                lengths.len()
            )));
        }
        if masses.iter().chain(&lengths).any(|&v| !(v > T::zero())) {
            return Err(Error::InvalidParams(
                "link masses and lengths must be positive".into(),
            ));
        }
        Ok(Self { masses, lengths })
    }

    pub fn uniform(n: usize, mass: T, length: T) -> Result<Self> {
        Self::new(vec![mass; n], vec![length; n])
    }

    /// Five links of 0.1 kg and 0.25 m.
    pub fn reference() -> Self {
        Self::uniform(5, cast(0.1), cast(0.25)).expect("valid reference cable")
    }

    #[inline]
    pub fn links(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    /// Σ_{a ≥ i} m_a for a zero-based link index.
    pub fn mass_below(&self, i: usize) -> T {
        self.masses[i..].iter().fold(T::zero(), |acc, &m| acc + m)
    }

    pub fn total_mass(&self) -> T {
        self.mass_below(0)
    }

    pub fn total_length(&self) -> T {
        self.lengths.iter().fold(T::zero(), |acc, &l| acc + l)
    }
}

/// Configuration and velocities on SO(3) × R³ × (S²)ⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleSystemState<T: Real = f64> {
    pub x0: Vector3<T>,
    pub v0: Vector3<T>,
    pub rot: RotMat<T>,
    /// Body angular velocity.
    pub omega: Vector3<T>,
    /// Link directions, pointing from the quadrotor toward the load.
    pub q: Vec<UnitVec<T>>,
    /// Link angular velocities, tangent to the corresponding `q`.
    pub w: Vec<Vector3<T>>,
}

impl<T: Real> SingleSystemState<T> {
    /// At rest with all links hanging straight down.
    pub fn hanging(x0: Vector3<T>, links: usize) -> Self {
        Self {
            x0,
            v0: Vector3::zeros(),
            rot: RotMat::identity(),
            omega: Vector3::zeros(),
            q: vec![UnitVec::down(); links],
            w: vec![Vector3::zeros(); links],
        }
    }

    pub fn links(&self) -> usize {
        self.q.len()
    }

    /// Positions of the lumped masses `x_1..x_n` (`x_n` is the load).
    pub fn mass_positions(&self, cp: &CableParams<T>) -> Vec<Vector3<T>> {
        let mut x = self.x0;
        self.q
            .iter()
            .zip(cp.lengths())
            .map(|(q, &l)| {
                x += q.as_vec() * l;
                x
            })
            .collect()
    }

    pub fn mass_velocities(&self, cp: &CableParams<T>) -> Vec<Vector3<T>> {
        let mut v = self.v0;
        self.q
            .iter()
            .zip(&self.w)
            .zip(cp.lengths())
            .map(|((q, w), &l)| {
                v += w.cross(q.as_vec()) * l;
                v
            })
            .collect()
    }

    pub fn load_position(&self, cp: &CableParams<T>) -> Vector3<T> {
        self.mass_positions(cp).last().copied().unwrap_or(self.x0)
    }

    /// Largest violation of the manifold constraints: unit norms, tangency
    /// of link angular velocities and orthonormality of the attitude.
    pub fn constraint_violation(&self) -> ConstraintViolation<T> {
        let mut unit = T::zero();
        let mut tangency = T::zero();
        for (q, w) in self.q.iter().zip(&self.w) {
            unit = unit.max((q.norm() - T::one()).abs());
            tangency = tangency.max(w.dot(q).abs());
        }
        ConstraintViolation {
            unit_norm: unit,
            tangency,
            orthonormality: crate::geom::orthonormality_error(self.rot.as_mat()),
        }
    }

    /// Returns the state after projecting every component back onto its
    /// manifold: `q_i` renormalized, `ω_i` made tangent, `R` orthonormalized.
    pub fn projected(mut self) -> Self {
        for (q, w) in self.q.iter_mut().zip(self.w.iter_mut()) {
            *q = UnitVec::new_normalize(q.into_inner());
            *w = q.project_tangent(w);
        }
        self.rot = RotMat::new_orthonormalize(self.rot.into_inner());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintViolation<T: Real = f64> {
    pub unit_norm: T,
    pub tangency: T,
    pub orthonormality: T,
}

impl<T: Real> ConstraintViolation<T> {
    pub fn max(&self) -> T {
        self.unit_norm.max(self.tangency).max(self.orthonormality)
    }
}

/// Thrust (N, along body z) and body moment (N·m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput<T: Real = f64> {
    pub thrust: T,
    pub moment: Vector3<T>,
}

impl<T: Real> ControlInput<T> {
    pub fn new(thrust: T, moment: Vector3<T>) -> Self {
        Self { thrust, moment }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), Vector3::zeros())
    }

    /// `[f, M₁, M₂, M₃]`
    pub fn as_array(&self) -> [T; 4] {
        [self.thrust, self.moment.x, self.moment.y, self.moment.z]
    }

    pub fn from_array(u: [T; 4]) -> Self {
        Self::new(u[0], Vector3::new(u[1], u[2], u[3]))
    }
}

/// Inertia-coupling coefficients `M_ij`, `i, j ∈ 0..=n`.
///
/// `M_00 = m_Q + Σ m_a`, `M_0i = (Σ_{a≥i} m_a) l_i`,
/// `M_ij = (Σ_{a≥max(i,j)} m_a) l_i l_j`. These follow from summing the
/// per-mass Newton equations below each joint and projecting onto the joint's
/// tangent plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MassCoefficients<T: Real = f64> {
    m: DMatrix<T>,
}

impl<T: Real> MassCoefficients<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }
}

pub fn mass_coeffs<T: Real>(qp: &QuadParams<T>, cp: &CableParams<T>) -> MassCoefficients<T> {
    let n = cp.links();
    let l = cp.lengths();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = qp.mass + cp.total_mass();
    for i in 1..=n {
        let v = cp.mass_below(i - 1) * l[i - 1];
        m[(0, i)] = v;
        m[(i, 0)] = v;
        for j in 1..=n {
            m[(i, j)] = cp.mass_below(i.max(j) - 1) * l[i - 1] * l[j - 1];
        }
    }
    MassCoefficients { m }
}

/// Time derivatives of the velocity-level state.
#[derive(Debug, Clone, PartialEq)]
pub struct Accelerations<T: Real = f64> {
    pub v0_dot: Vector3<T>,
    pub omega_dot: Vector3<T>,
    /// `ω̇_i`, tangent to `q_i`.
    pub w_dot: Vec<Vector3<T>>,
    /// `q̈_i`
    pub q_ddot: Vec<Vector3<T>>,
}

/// Magnitudes and vectors of the link tensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionProfile<T: Real = f64> {
    /// `T_i q_i`
    pub vectors: Vec<Vector3<T>>,
    /// `T_i`, signed: negative means the link would have to push.
    pub magnitudes: Vec<T>,
}

impl<T: Real> TensionProfile<T> {
    pub fn min_tension(&self) -> T {
        self.magnitudes
            .iter()
            .copied()
            .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b))
    }
}

/// Residuals of the tension-form equations for a state/input/acceleration
/// triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleResidual<T: Real = f64> {
    /// `‖m_Q(ẍ₀ + g e₃) − f R e₃ − T₁q₁‖`
    pub quad_force: T,
    /// `max_i ‖T_i q_i × q_i‖`: reconstructed tension must be along its link.
    pub tension_alignment: T,
    /// `‖JΩ̇ + Ω × JΩ − M‖`
    pub attitude: T,
}

impl<T: Real> SingleResidual<T> {
    pub fn max(&self) -> T {
        self.quad_force.max(self.tension_alignment).max(self.attitude)
    }
}

/// Single quadrotor with an n-link cable and point-mass load.
#[derive(Debug, Clone)]
pub struct SingleModel<T: Real = f64> {
    pub quad: QuadParams<T>,
    pub cable: CableParams<T>,
    coeffs: MassCoefficients<T>,
    inertia_inv: Matrix3<T>,
}

impl<T: Real> SingleModel<T> {
    pub fn new(quad: QuadParams<T>, cable: CableParams<T>) -> Self {
        let coeffs = mass_coeffs(&quad, &cable);
        let inertia_inv = quad
            .inertia
            .try_inverse()
            .expect("validated inertia is invertible");
        Self {
            quad,
            cable,
            coeffs,
            inertia_inv,
        }
    }

    pub fn reference() -> Self {
        Self::new(QuadParams::reference(), CableParams::reference())
    }

    pub fn links(&self) -> usize {
        self.cable.links()
    }

    pub fn coeffs(&self) -> &MassCoefficients<T> {
        &self.coeffs
    }

    pub fn inertia_inv(&self) -> &Matrix3<T> {
        &self.inertia_inv
    }

    /// Thrust that holds the whole system in hover, `M_00 g`.
    pub fn hover_thrust(&self) -> T {
        self.coeffs.get(0, 0) * self.quad.gravity
    }

    /// Builds and solves the compact `(3+3n)` system for `(ẍ₀, q̈₁..q̈ₙ)`.
    ///
    /// Row 0: `M₀₀ẍ₀ + Σ M₀ⱼq̈ⱼ = f R e₃ − M₀₀ g e₃`.
    /// Row i: `−q̂ᵢ²Mᵢ₀ẍ₀ + Mᵢᵢq̈ᵢ − Σ_{j≠i} Mᵢⱼq̂ᵢ²q̈ⱼ
    ///        = −‖q̇ᵢ‖²Mᵢᵢqᵢ + (Σ_{a≥i} mₐ) g lᵢ q̂ᵢ²e₃`.
    ///
    /// `q` need not be exactly unit length (Runge–Kutta stages drift off the
    /// sphere); `q̇ᵢ = ωᵢ × qᵢ` is used for the centripetal term.
    fn solve_translational(
        &self,
        rot: &Matrix3<T>,
        q: &[Vector3<T>],
        w: &[Vector3<T>],
        thrust: T,
    ) -> Result<(Vector3<T>, Vec<Vector3<T>>)> {
        let n = q.len();
        let dim = 3 + 3 * n;
        let m = &self.coeffs;
        let g = self.quad.gravity;
        let e3 = Vector3::z();
        let mut lhs = DMatrix::<T>::zeros(dim, dim);
        let mut rhs = DVector::<T>::zeros(dim);

        let id = Matrix3::<T>::identity();
        lhs.fixed_view_mut::<3, 3>(0, 0).copy_from(&(id * m.get(0, 0)));
        for j in 1..=n {
            lhs.fixed_view_mut::<3, 3>(0, 3 * j)
                .copy_from(&(id * m.get(0, j)));
        }
        let top = rot * e3 * thrust - e3 * (m.get(0, 0) * g);
        rhs.fixed_rows_mut::<3>(0).copy_from(&top);

        let lengths = self.cable.lengths();
        for i in 1..=n {
            let qi = &q[i - 1];
            let qh = hat(qi);
            let qh2 = qh * qh;
            lhs.fixed_view_mut::<3, 3>(3 * i, 0)
                .copy_from(&(-qh2 * m.get(i, 0)));
            for j in 1..=n {
                let block = if i == j {
                    id * m.get(i, i)
                } else {
                    -qh2 * m.get(i, j)
                };
                lhs.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(&block);
            }
            let qdot = w[i - 1].cross(qi);
            let r = -qi * (qdot.norm_squared() * m.get(i, i))
                + qh2 * e3 * (self.cable.mass_below(i - 1) * g * lengths[i - 1]);
            rhs.fixed_rows_mut::<3>(3 * i).copy_from(&r);
        }

        let sol = lhs.lu().solve(&rhs).ok_or(Error::SingularMassMatrix)?;
        let a0 = Vector3::new(sol[0], sol[1], sol[2]);
        let q_ddot = (1..=n)
            .map(|i| Vector3::new(sol[3 * i], sol[3 * i + 1], sol[3 * i + 2]))
            .collect();
        Ok((a0, q_ddot))
    }

    fn accel_raw(
        &self,
        rot: &Matrix3<T>,
        omega: &Vector3<T>,
        q: &[Vector3<T>],
        w: &[Vector3<T>],
        u: &ControlInput<T>,
    ) -> Result<Accelerations<T>> {
        let (v0_dot, q_ddot) = self.solve_translational(rot, q, w, u.thrust)?;
        let w_dot = q.iter().zip(&q_ddot).map(|(q, a)| q.cross(a)).collect();
        let j = &self.quad.inertia;
        let omega_dot = self.inertia_inv * (u.moment - omega.cross(&(j * omega)));
        Ok(Accelerations {
            v0_dot,
            omega_dot,
            w_dot,
            q_ddot,
        })
    }

    /// Accelerations of the full system under input `u`.
    pub fn accel(&self, s: &SingleSystemState<T>, u: &ControlInput<T>) -> Result<Accelerations<T>> {
        let q: Vec<_> = s.q.iter().map(|q| q.into_inner()).collect();
        self.accel_raw(s.rot.as_mat(), &s.omega, &q, &s.w, u)
    }

    /// Accelerations of the lumped masses, `ẍⱼ = ẍ₀ + Σ_{k≤j} lₖ q̈ₖ`, with
    /// `q̈ₖ = ω̇ₖ × qₖ + ωₖ × (ωₖ × qₖ)`.
    pub fn mass_accelerations(
        &self,
        s: &SingleSystemState<T>,
        acc: &Accelerations<T>,
    ) -> Vec<Vector3<T>> {
        let mut a = acc.v0_dot;
        s.q.iter()
            .zip(&s.w)
            .zip(&acc.w_dot)
            .zip(self.cable.lengths())
            .map(|(((q, w), wd), &l)| {
                let q = q.as_vec();
                let qdd = wd.cross(q) + w.cross(&w.cross(q));
                a += qdd * l;
                a
            })
            .collect()
    }

    /// Tensions implied by the accelerations, walking up from the load:
    /// `Tₙqₙ = −mₙ(ẍₙ + g e₃)`, `Tⱼqⱼ = Tⱼ₊₁qⱼ₊₁ − mⱼ(ẍⱼ + g e₃)`.
    pub fn tensions_from_accel(
        &self,
        s: &SingleSystemState<T>,
        acc: &Accelerations<T>,
    ) -> TensionProfile<T> {
        let n = self.links();
        let a = self.mass_accelerations(s, acc);
        let ge3 = Vector3::z() * self.quad.gravity;
        let masses = self.cable.masses();
        let mut vectors = vec![Vector3::zeros(); n];
        let mut below = Vector3::zeros();
        for j in (0..n).rev() {
            below -= (a[j] + ge3) * masses[j];
            vectors[j] = below;
        }
        let magnitudes = vectors
            .iter()
            .zip(&s.q)
            .map(|(tq, q)| {
                let norm = tq.norm();
                if tq.dot(q) < T::zero() {
                    -norm
                } else {
                    norm
                }
            })
            .collect();
        TensionProfile {
            vectors,
            magnitudes,
        }
    }

    /// Checks the tension-form equations against accelerations produced by
    /// any route (compact model, flatness, finite differences).
    pub fn newton_euler_residual(
        &self,
        s: &SingleSystemState<T>,
        u: &ControlInput<T>,
        acc: &Accelerations<T>,
    ) -> SingleResidual<T> {
        let tp = self.tensions_from_accel(s, acc);
        let ge3 = Vector3::z() * self.quad.gravity;
        let quad_force = ((acc.v0_dot + ge3) * self.quad.mass
            - s.rot.as_mat() * Vector3::z() * u.thrust
            - tp.vectors[0])
            .norm();
        let tension_alignment = tp
            .vectors
            .iter()
            .zip(&s.q)
            .map(|(tq, q)| tq.cross(q).norm())
            .fold(T::zero(), |a, b| a.max(b));
        let j = &self.quad.inertia;
        let attitude =
            (j * acc.omega_dot + s.omega.cross(&(j * s.omega)) - u.moment).norm();
        SingleResidual {
            quad_force,
            tension_alignment,
            attitude,
        }
    }

    /// Kinetic plus gravitational energy of quadrotor and lumped masses.
    pub fn energy(&self, s: &SingleSystemState<T>) -> T {
        let half = cast::<T>(0.5);
        let g = self.quad.gravity;
        let mut e = half * self.quad.mass * s.v0.norm_squared()
            + half * s.omega.dot(&(self.quad.inertia * s.omega))
            + self.quad.mass * g * s.x0.z;
        let pos = s.mass_positions(&self.cable);
        let vel = s.mass_velocities(&self.cable);
        for ((x, v), &m) in pos.iter().zip(&vel).zip(self.cable.masses()) {
            e += half * m * v.norm_squared() + m * g * x.z;
        }
        e
    }

    /// One fixed-step RK4 update under a constant input, followed by
    /// projection back onto the manifold.
    pub fn step(
        &self,
        s: &SingleSystemState<T>,
        u: &ControlInput<T>,
        dt: T,
    ) -> Result<SingleSystemState<T>> {
        self.step_with(s, T::zero(), dt, |_, _| Ok(*u))
    }

    /// RK4 step whose input is re-evaluated at every stage from the stage
    /// time and the stage state (projected onto the manifold).
    pub fn step_with<F>(
        &self,
        s: &SingleSystemState<T>,
        t: T,
        dt: T,
        mut input: F,
    ) -> Result<SingleSystemState<T>>
    where
        F: FnMut(T, &SingleSystemState<T>) -> Result<ControlInput<T>>,
    {
        let half = cast::<T>(0.5);
        let y0 = RawState::from_state(s);
        let k1 = self.raw_rate(&y0, input(t, s)?)?;
        let y1 = y0.axpy(dt * half, &k1);
        let k2 = self.raw_rate(&y1, input(t + dt * half, &y1.to_state())?)?;
        let y2 = y0.axpy(dt * half, &k2);
        let k3 = self.raw_rate(&y2, input(t + dt * half, &y2.to_state())?)?;
        let y3 = y0.axpy(dt, &k3);
        let k4 = self.raw_rate(&y3, input(t + dt, &y3.to_state())?)?;
        let sixth = dt / cast::<T>(6.0);
        let two = cast::<T>(2.0);
        let y = y0
            .axpy(sixth, &k1)
            .axpy(sixth * two, &k2)
            .axpy(sixth * two, &k3)
            .axpy(sixth, &k4);
        Ok(y.to_state())
    }

    fn raw_rate(&self, y: &RawState<T>, u: ControlInput<T>) -> Result<RawState<T>> {
        let acc = self.accel_raw(&y.rot, &y.omega, &y.q, &y.w, &u)?;
        Ok(RawState {
            x0: y.v0,
            v0: acc.v0_dot,
            rot: y.rot * hat(&y.omega),
            omega: acc.omega_dot,
            q: y.q.iter().zip(&y.w).map(|(q, w)| w.cross(q)).collect(),
            w: acc.w_dot,
        })
    }
}

/// Unconstrained embedding of the state used inside Runge–Kutta stages.
#[derive(Debug, Clone)]
struct RawState<T: Real> {
    x0: Vector3<T>,
    v0: Vector3<T>,
    rot: Matrix3<T>,
    omega: Vector3<T>,
    q: Vec<Vector3<T>>,
    w: Vec<Vector3<T>>,
}

impl<T: Real> RawState<T> {
    fn from_state(s: &SingleSystemState<T>) -> Self {
        Self {
            x0: s.x0,
            v0: s.v0,
            rot: s.rot.into_inner(),
            omega: s.omega,
            q: s.q.iter().map(|q| q.into_inner()).collect(),
            w: s.w.clone(),
        }
    }

    fn axpy(&self, a: T, d: &Self) -> Self {
        Self {
            x0: self.x0 + d.x0 * a,
            v0: self.v0 + d.v0 * a,
            rot: self.rot + d.rot * a,
            omega: self.omega + d.omega * a,
            q: self.q.iter().zip(&d.q).map(|(x, y)| x + y * a).collect(),
            w: self.w.iter().zip(&d.w).map(|(x, y)| x + y * a).collect(),
        }
    }

    fn to_state(&self) -> SingleSystemState<T> {
        let q: Vec<UnitVec<T>> = self.q.iter().map(|q| UnitVec::new_normalize(*q)).collect();
        let w = q
            .iter()
            .zip(&self.w)
            .map(|(q, w)| q.project_tangent(w))
            .collect();
        SingleSystemState {
            x0: self.x0,
            v0: self.v0,
            rot: RotMat::new_orthonormalize(orthonormalize(&self.rot)),
            omega: self.omega,
            q,
            w,
        }
    }
}

/// Accelerations of the compact model; see [`SingleModel::accel`].
pub fn accel_single<T: Real>(
    s: &SingleSystemState<T>,
    u: &ControlInput<T>,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
) -> Result<Accelerations<T>> {
    SingleModel::new(qp.clone(), cp.clone()).accel(s, u)
}

/// See [`SingleModel::tensions_from_accel`].
pub fn tensions_from_accel<T: Real>(
    s: &SingleSystemState<T>,
    acc: &Accelerations<T>,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
) -> TensionProfile<T> {
    SingleModel::new(qp.clone(), cp.clone()).tensions_from_accel(s, acc)
}

/// See [`SingleModel::step`].
pub fn step<T: Real>(
    s: &SingleSystemState<T>,
    u: &ControlInput<T>,
    dt: T,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
) -> Result<SingleSystemState<T>> {
    SingleModel::new(qp.clone(), cp.clone()).step(s, u, dt)
}

/// Degrees of freedom of one quadrotor with an n-link cable.
pub fn dof_single(links: usize) -> usize {
    6 + 2 * links
}

/// Degrees of freedom of p quadrotors sharing a point-mass load.
pub fn dof_multi_point(links: &[usize]) -> usize {
    3 + 3 * links.len() + 2 * links.iter().sum::<usize>()
}

/// Degrees of freedom of p quadrotors sharing a rigid-body load.
pub fn dof_multi_rigid(links: &[usize]) -> usize {
    6 + 3 * links.len() + 2 * links.iter().sum::<usize>()
}

/// Degrees of freedom minus the four inputs of every quadrotor.
pub fn degrees_of_underactuation(dof: usize, quadrotors: usize) -> isize {
    dof as isize - 4 * quadrotors as isize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type V = Vector3<f64>;

    #[test]
    fn mass_coefficients_reference() {
        let m = mass_coeffs(&QuadParams::<f64>::reference(), &CableParams::reference());
        assert_relative_eq!(m.get(0, 0), 1.35, epsilon = 1e-15);
        assert_relative_eq!(m.get(0, 5), 0.025, epsilon = 1e-15);
        assert_relative_eq!(m.get(0, 1), 0.5 * 0.25, epsilon = 1e-15);
        assert_eq!(m.matrix(), &m.matrix().transpose());
    }

    #[test]
    fn single_pendulum_inertia() {
        let cp = CableParams::new(vec![0.3], vec![0.7]).unwrap();
        let m = mass_coeffs(&QuadParams::reference(), &cp);
        assert_relative_eq!(m.get(1, 1), 0.3 * 0.49, epsilon = 1e-15);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(CableParams::<f64>::new(vec![], vec![]).is_err());
        assert!(CableParams::new(vec![0.1, -0.1], vec![0.2, 0.2]).is_err());
        assert!(CableParams::new(vec![0.1], vec![0.2, 0.2]).is_err());
        assert!(QuadParams::new(-1.0, Matrix3::identity(), 9.81).is_err());
        assert!(QuadParams::new(1.0, -Matrix3::<f64>::identity(), 9.81).is_err());
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let model = SingleModel::reference();
        let s = SingleSystemState::hanging(V::new(0.0, 0.0, 1.25), 5);
        let u = ControlInput::new(model.hover_thrust(), V::zeros());
        assert_relative_eq!(model.hover_thrust(), 1.35 * 9.81, epsilon = 1e-12);
        let a = model.accel(&s, &u).unwrap();
        assert!(a.v0_dot.norm() < 1e-13);
        assert!(a.omega_dot.norm() < 1e-13);
        assert!(a.w_dot.iter().all(|w| w.norm() < 1e-13));

        let tp = model.tensions_from_accel(&s, &a);
        assert_relative_eq!(tp.magnitudes[4], 0.981, epsilon = 1e-12);
        assert_relative_eq!(tp.magnitudes[0], 4.905, epsilon = 1e-12);
    }

    #[test]
    fn free_fall_has_no_tension() {
        let model = SingleModel::reference();
        let mut s = SingleSystemState::hanging(V::zeros(), 5);
        s.q[2] = UnitVec::new_normalize(V::new(0.3, 0.1, -1.0));
        s.rot = RotMat::about(&V::new(1.0, 2.0, 0.0), 0.4);
        let a = model.accel(&s, &ControlInput::zero()).unwrap();
        assert_relative_eq!(a.v0_dot, V::new(0.0, 0.0, -9.81), epsilon = 1e-12);
        assert!(a.w_dot.iter().all(|w| w.norm() < 1e-12));
        let tp = model.tensions_from_accel(&s, &a);
        assert!(tp.magnitudes.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn angular_accelerations_are_tangent() {
        let model = SingleModel::reference();
        let mut s = SingleSystemState::hanging(V::zeros(), 5);
        for i in 0..5 {
            let q = UnitVec::new_normalize(V::new(0.2 * i as f64, -0.1, -1.0));
            s.w[i] = q.project_tangent(&V::new(0.5, 1.0 - i as f64, 0.3));
            s.q[i] = q;
        }
        let a = model
            .accel(&s, &ControlInput::new(15.0, V::new(0.01, 0.0, -0.02)))
            .unwrap();
        for (q, wd) in s.q.iter().zip(&a.w_dot) {
            assert!(wd.dot(q).abs() < 1e-12);
        }
    }

    #[test]
    fn hover_holds_for_one_second() {
        let model = SingleModel::reference();
        let s0 = SingleSystemState::hanging(V::new(0.0, 0.0, 1.25), 5);
        let u = ControlInput::new(model.hover_thrust(), V::zeros());
        let mut s = s0.clone();
        for _ in 0..1000 {
            s = model.step(&s, &u, 1e-3).unwrap();
        }
        assert!((s.x0 - s0.x0).norm() < 1e-9);
    }

    #[test]
    fn free_fall_parabola() {
        let model = SingleModel::reference();
        let mut s = SingleSystemState::hanging(V::zeros(), 5);
        for _ in 0..1000 {
            s = model.step(&s, &ControlInput::zero(), 1e-3).unwrap();
        }
        assert!((s.x0.z + 4.905).abs() < 1e-6, "{}", s.x0.z);
    }

    #[test]
    fn dof_bookkeeping() {
        assert_eq!(dof_single(5), 16);
        assert_eq!(degrees_of_underactuation(dof_single(5), 1), 12);
        assert_eq!(dof_multi_point(&[5; 4]), 55);
        assert_eq!(degrees_of_underactuation(55, 4), 39);
        assert_eq!(dof_multi_rigid(&[5; 4]), 58);
        assert_eq!(degrees_of_underactuation(58, 4), 42);
    }

    #[test]
    fn hover_in_single_precision() {
        let model = SingleModel::<f32>::reference();
        let s = SingleSystemState::hanging(Vector3::new(0.0f32, 0.0, 1.25), 5);
        let u = ControlInput::new(model.hover_thrust(), Vector3::zeros());
        let a = model.accel(&s, &u).unwrap();
        assert!(a.v0_dot.norm() < 1e-5);
    }
}
