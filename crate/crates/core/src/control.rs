//! Finite-horizon LQR about a flat reference: backward Riccati sweep, stored
//! gain table and the tracking law `u = u_d − K(t) s`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, SingleModel, SingleSystemState};
use crate::flatness::{flat_single, DesiredPoint, FlatOutputsSingle};
use crate::linearize::{build_lin_with, error_coords, StateLayout};
use crate::scalar::{cast, from_usize, to_f64, tol, Real};
use crate::{Error, Result};

/// Smallest eigenvalue of a stored `P` before the sweep is declared unstable.
pub const PSD_TOLERANCE: f64 = -1e-8;

/// Default number of RK4 substeps per grid interval of the sweep.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// Cost weights and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights<T: Real = f64> {
    pub q1: DMatrix<T>,
    pub q2: DMatrix<T>,
    pub p_terminal: DMatrix<T>,
    pub horizon: T,
}

impl<T: Real> LqrWeights<T> {
    pub fn new(q1: DMatrix<T>, q2: DMatrix<T>, p_terminal: DMatrix<T>, horizon: T) -> Result<Self> {
        let n = q1.nrows();
        if !q1.is_square() || p_terminal.shape() != (n, n) || !q2.is_square() {
            return Err(Error::Dimension(format!(
                "Q1 {:?}, Q2 {:?}, P_T {:?}",
                q1.shape(),
                q2.shape(),
                p_terminal.shape()
            )));
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        check_psd(&q1, "Q1")?;
        check_psd(&p_terminal, "P_T")?;
        check_symmetric(&q2, "Q2")?;
        if q2.clone().cholesky().is_none() {
            return Err(Error::InvalidParams("Q2 must be positive definite".into()));
        }
        Ok(Self {
            q1,
            q2,
            p_terminal,
            horizon,
        })
    }

    /// `Q₁ = diag(0.5 I₆, 0.75 I₆, I₃ₙ, 0.75 I₃ₙ)`, `Q₂ = 0.2 I₄`,
    /// `P_T = 0.01 I`, in the state ordering of [`StateLayout`].
    pub fn tracking_defaults(links: usize, horizon: T) -> Result<Self> {
        let lay = StateLayout::new(links);
        let dim = lay.dim();
        let mut diag = Vec::with_capacity(dim);
        diag.extend(std::iter::repeat_n(0.5, 6));
        diag.extend(std::iter::repeat_n(0.75, 6));
        diag.extend(std::iter::repeat_n(1.0, 3 * links));
        diag.extend(std::iter::repeat_n(0.75, 3 * links));
        let q1 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            diag.into_iter().map(cast::<T>),
        ));
        let q2 = DMatrix::identity(4, 4) * cast::<T>(0.2);
        let pt = DMatrix::identity(dim, dim) * cast::<T>(0.01);
        Self::new(q1, q2, pt, horizon)
    }

    pub fn state_dim(&self) -> usize {
        self.q1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.q2.nrows()
    }
}

fn check_symmetric<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > tol::<T>(1e-12) * (T::one() + m.amax()) {
        return Err(Error::InvalidParams(format!(
            "{name} is not symmetric (asymmetry {:e})",
            to_f64(asym)
        )));
    }
    Ok(())
}

fn check_psd<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    check_symmetric(m, name)?;
    if m.nrows() == 0 {
        return Ok(());
    }
    let min = min_eigenvalue(m);
    if min < -tol::<T>(1e-12) * (T::one() + m.amax()) {
        return Err(Error::InvalidParams(format!(
            "{name} is not positive semi-definite (min eigenvalue {:e})",
            to_f64(min)
        )));
    }
    Ok(())
}

fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b))
}

/// Source of `A(t)`, `B(t)` for the sweep.
pub trait LinearProvider<T: Real> {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn matrices(&mut self, t: T) -> Result<(DMatrix<T>, DMatrix<T>)>;
}

/// Linearization of the single-quadrotor model about its flat reference.
#[derive(Debug, Clone)]
pub struct ReferenceLinearization<'a, T: Real = f64> {
    pub model: &'a SingleModel<T>,
    pub outputs: &'a FlatOutputsSingle,
}

impl<'a, T: Real> ReferenceLinearization<'a, T> {
    pub fn new(model: &'a SingleModel<T>, outputs: &'a FlatOutputsSingle) -> Self {
        Self { model, outputs }
    }
}

impl<T: Real> LinearProvider<T> for ReferenceLinearization<'_, T> {
    fn state_dim(&self) -> usize {
        StateLayout::new(self.model.links()).dim()
    }

    fn input_dim(&self) -> usize {
        4
    }

    fn matrices(&mut self, t: T) -> Result<(DMatrix<T>, DMatrix<T>)> {
        let dp = flat_single(self.outputs, &self.model.quad, &self.model.cable, t)?;
        let lin = build_lin_with(&dp, self.model)?;
        Ok((lin.a, lin.b))
    }
}

/// Closure-backed provider, mostly for tests and scalar problems.
pub struct FnLinear<F> {
    pub states: usize,
    pub inputs: usize,
    pub f: F,
}

impl<T, F> LinearProvider<T> for FnLinear<F>
where
    T: Real,
    F: FnMut(T) -> Result<(DMatrix<T>, DMatrix<T>)>,
{
    fn state_dim(&self) -> usize {
        self.states
    }

    fn input_dim(&self) -> usize {
        self.inputs
    }

    fn matrices(&mut self, t: T) -> Result<(DMatrix<T>, DMatrix<T>)> {
        (self.f)(t)
    }
}

/// Sampled `P(t_k)` and `K(t_k)` on a uniform grid, `K` linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable<T: Real = f64> {
    t0: T,
    dt: T,
    p: Vec<DMatrix<T>>,
    k: Vec<DMatrix<T>>,
}

impl<T: Real> GainTable<T> {
    pub fn new(t0: T, dt: T, p: Vec<DMatrix<T>>, k: Vec<DMatrix<T>>) -> Result<Self> {
        if p.len() != k.len() || p.len() < 2 {
            return Err(Error::Dimension(format!(
                "{} P samples, {} K samples",
                p.len(),
                k.len()
            )));
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidParams("grid step must be positive".into()));
        }
        let (n, m) = (p[0].nrows(), k[0].nrows());
        if p.iter().any(|x| x.shape() != (n, n)) || k.iter().any(|x| x.shape() != (m, n)) {
            return Err(Error::Dimension("inconsistent sample shapes".into()));
        }
        Ok(Self { t0, dt, p, k })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn start(&self) -> T {
        self.t0
    }

    pub fn end(&self) -> T {
        self.time(self.len() - 1)
    }

    pub fn step(&self) -> T {
        self.dt
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + from_usize::<T>(k) * self.dt
    }

    pub fn state_dim(&self) -> usize {
        self.p[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.k[0].nrows()
    }

    pub fn p(&self) -> &[DMatrix<T>] {
        &self.p
    }

    pub fn k(&self) -> &[DMatrix<T>] {
        &self.k
    }

    /// `K(t)`, linear between the bracketing samples.
    pub fn gain(&self, t: T) -> Result<DMatrix<T>> {
        let (i, f) = self.locate(t)?;
        if f == T::zero() {
            return Ok(self.k[i].clone());
        }
        if f == T::one() {
            return Ok(self.k[i + 1].clone());
        }
        Ok(&self.k[i] * (T::one() - f) + &self.k[i + 1] * f)
    }

    fn locate(&self, t: T) -> Result<(usize, T)> {
        let slack = tol::<T>(1e-9) * (T::one() + self.end().abs());
        if !(t >= self.t0 - slack && t <= self.end() + slack) {
            return Err(Error::HorizonExceeded {
                t: to_f64(t),
                start: to_f64(self.t0),
                end: to_f64(self.end()),
            });
        }
        let last = self.len() - 1;
        let s = ((t - self.t0) / self.dt).max(T::zero());
        let nearest = s.round();
        if (s - nearest).abs() <= tol::<T>(1e-9) {
            let k = nearest.to_usize().unwrap_or(0).min(last);
            return Ok(if k == last { (last - 1, T::one()) } else { (k, T::zero()) });
        }
        let i = s.floor().to_usize().unwrap_or(0).min(last - 1);
        let f = (s - from_usize::<T>(i)).max(T::zero()).min(T::one());
        Ok((i, f))
    }
}

/// Plain-data form of a gain table: grid metadata and row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainArtifact {
    pub t0: f64,
    pub dt: f64,
    pub samples: usize,
    pub state_dim: usize,
    pub input_dim: usize,
    pub p: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
}

const MAGIC: &[u8; 4] = b"FCGT";
const FORMAT_VERSION: u32 = 1;

fn row_major<T: Real>(m: &DMatrix<T>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(to_f64(m[(r, c)]));
        }
    }
    out
}

fn from_row_major<T: Real>(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<T>> {
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "expected {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows,
        cols,
        data.iter().map(|&x| cast::<T>(x)),
    ))
}

impl<T: Real> GainTable<T> {
    pub fn to_artifact(&self) -> GainArtifact {
        GainArtifact {
            t0: to_f64(self.t0),
            dt: to_f64(self.dt),
            samples: self.len(),
            state_dim: self.state_dim(),
            input_dim: self.input_dim(),
            p: self.p.iter().map(row_major).collect(),
            k: self.k.iter().map(row_major).collect(),
        }
    }

    pub fn from_artifact(a: &GainArtifact) -> Result<Self> {
        if a.p.len() != a.samples || a.k.len() != a.samples {
            return Err(Error::Dimension("sample count mismatch".into()));
        }
        let p = a
            .p
            .iter()
            .map(|d| from_row_major(a.state_dim, a.state_dim, d))
            .collect::<Result<_>>()?;
        let k = a
            .k
            .iter()
            .map(|d| from_row_major(a.input_dim, a.state_dim, d))
            .collect::<Result<_>>()?;
        Self::new(cast(a.t0), cast(a.dt), p, k)
    }

    /// Little-endian binary form: `FCGT`, version, sample count, state and
    /// input dimension, `t0`, `dt`, then every `P` and every `K` row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (n, m) = (self.state_dim(), self.input_dim());
        let mut out = Vec::with_capacity(48 + 8 * self.len() * (n * n + m * n));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for d in [self.len(), n, m] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for x in [to_f64(self.t0), to_f64(self.dt)] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for mat in self.p.iter().chain(&self.k) {
            for x in row_major(mat) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParams(format!("gain table: {msg}"));
        let mut pos = 0usize;
        let mut take = |len: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + len).ok_or_else(|| bad("truncated"))?;
            pos += len;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad("unsupported version"));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        }
        let [samples, n, m] = dims;
        let t0 = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        let dt = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        let mut read = |rows: usize, cols: usize| -> Result<Vec<f64>> {
            let raw = take(8 * rows * cols)?;
            Ok(raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let mut p = Vec::with_capacity(samples);
        for _ in 0..samples {
            p.push(read(n, n)?);
        }
        let mut k = Vec::with_capacity(samples);
        for _ in 0..samples {
            k.push(read(m, n)?);
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Self::from_artifact(&GainArtifact {
            t0,
            dt,
            samples,
            state_dim: n,
            input_dim: m,
            p,
            k,
        })
    }
}

/// Grid step and substeps of the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions<T: Real = f64> {
    pub dt: T,
    pub substeps: usize,
}

impl<T: Real> RiccatiOptions<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

/// `−Ṗ = Q₁ − P B Q₂⁻¹ Bᵀ P + AᵀP + P A` integrated backwards from
/// `P(T) = P_T` with a grid step of `dt`.
pub fn riccati_backward<T, L>(provider: &mut L, w: &LqrWeights<T>, dt: T) -> Result<GainTable<T>>
where
    T: Real,
    L: LinearProvider<T> + ?Sized,
{
    riccati_backward_with(provider, w, RiccatiOptions::new(dt))
}

/// [`riccati_backward`] with explicit substeps.
///
/// Each grid interval is split into `substeps` classical RK4 steps; `P` is
/// symmetrized after every substep and checked for definiteness at every
/// stored sample.
pub fn riccati_backward_with<T, L>(
    provider: &mut L,
    w: &LqrWeights<T>,
    opts: RiccatiOptions<T>,
) -> Result<GainTable<T>>
where
    T: Real,
    L: LinearProvider<T> + ?Sized,
{
    let (n, m) = (w.state_dim(), w.input_dim());
    if provider.state_dim() != n || provider.input_dim() != m {
        return Err(Error::Dimension(format!(
            "weights are {n}×{m}, system is {}×{}",
            provider.state_dim(),
            provider.input_dim()
        )));
    }
    if !(opts.dt > T::zero()) || opts.substeps == 0 {
        return Err(Error::InvalidParams(
            "Riccati grid step and substeps must be positive".into(),
        ));
    }
    let steps_f = (w.horizon / opts.dt).round();
    let steps = steps_f.to_usize().unwrap_or(0);
    if steps == 0 || (steps_f * opts.dt - w.horizon).abs() > tol::<T>(1e-9) * w.horizon {
        return Err(Error::InvalidParams(format!(
            "horizon {} is not a multiple of the grid step {}",
            to_f64(w.horizon),
            to_f64(opts.dt)
        )));
    }
    let r_inv = w
        .q2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParams("Q2 must be positive definite".into()))?
        .inverse();

    let time = |k: usize| from_usize::<T>(k) * opts.dt;
    let h = opts.dt / from_usize::<T>(opts.substeps);
    let half = cast::<T>(0.5);
    let sixth = h / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    let check = |p: &DMatrix<T>, t: T| -> Result<()> {
        let min = if p.iter().all(|x| x.is_finite()) {
            min_eigenvalue(p)
        } else {
            cast::<T>(f64::NAN)
        };
        if !(min >= cast::<T>(PSD_TOLERANCE)) {
            return Err(Error::RiccatiBlowup {
                t: to_f64(t),
                min_eigenvalue: to_f64(min),
            });
        }
        Ok(())
    };

    let mut ps = vec![DMatrix::<T>::zeros(0, 0); steps + 1];
    let mut ks = vec![DMatrix::<T>::zeros(0, 0); steps + 1];
    let mut p = w.p_terminal.clone();
    let mut t = time(steps);
    let (mut a_t, mut b_t) = provider.matrices(t)?;
    ks[steps] = gain_from(&r_inv, &b_t, &p);
    ps[steps] = p.clone();

    for k in (0..steps).rev() {
        let t_hi = time(k + 1);
        for j in 0..opts.substeps {
            let t_mid = t_hi - h * (from_usize::<T>(j) + half);
            let t_lo = if j + 1 == opts.substeps {
                time(k)
            } else {
                t_hi - h * from_usize::<T>(j + 1)
            };
            let (a_m, b_m) = provider.matrices(t_mid)?;
            let (a_l, b_l) = provider.matrices(t_lo)?;
            let k1 = riccati_rhs(&a_t, &b_t, &w.q1, &r_inv, &p);
            let k2 = riccati_rhs(&a_m, &b_m, &w.q1, &r_inv, &(&p + &k1 * (h * half)));
            let k3 = riccati_rhs(&a_m, &b_m, &w.q1, &r_inv, &(&p + &k2 * (h * half)));
            let k4 = riccati_rhs(&a_l, &b_l, &w.q1, &r_inv, &(&p + &k3 * h));
            p += (k1 + k4) * sixth + (k2 + k3) * (sixth * two);
            symmetrize(&mut p);
            a_t = a_l;
            b_t = b_l;
            t = t_lo;
        }
        check(&p, t)?;
        ks[k] = gain_from(&r_inv, &b_t, &p);
        ps[k] = p.clone();
    }
    GainTable::new(T::zero(), opts.dt, ps, ks)
}

/// Right-hand side of `−Ṗ` (the rate in reversed time).
pub fn riccati_rhs<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q1: &DMatrix<T>,
    r_inv: &DMatrix<T>,
    p: &DMatrix<T>,
) -> DMatrix<T> {
    let atp = a.tr_mul(p);
    let pb = p * b;
    let mut out = q1 + &atp + atp.transpose();
    out -= &pb * r_inv * pb.transpose();
    out
}

fn gain_from<T: Real>(r_inv: &DMatrix<T>, b: &DMatrix<T>, p: &DMatrix<T>) -> DMatrix<T> {
    r_inv * b.tr_mul(p)
}

fn symmetrize<T: Real>(p: &mut DMatrix<T>) {
    let half = cast::<T>(0.5);
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (p[(i, j)] + p[(j, i)]) * half;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// `δu = −K(t) s` with `s` the tracking errors of `actual` about `dp`.
pub fn feedback<T: Real>(
    actual: &SingleSystemState<T>,
    dp: &DesiredPoint<T>,
    table: &GainTable<T>,
    t: T,
) -> Result<ControlInput<T>> {
    let s = error_coords(actual, dp);
    let k = table.gain(t)?;
    if k.shape() != (4, s.len()) {
        return Err(Error::Dimension(format!(
            "gain is {:?}, error state has {} entries",
            k.shape(),
            s.len()
        )));
    }
    let du = -(k * s);
    Ok(ControlInput::from_array([du[0], du[1], du[2], du[3]]))
}

/// `u = u_d + δu`.
pub fn tracking_control<T: Real>(
    actual: &SingleSystemState<T>,
    dp: &DesiredPoint<T>,
    table: &GainTable<T>,
    t: T,
) -> Result<ControlInput<T>> {
    let du = feedback(actual, dp, table, t)?;
    Ok(add_inputs(&dp.input(), &du))
}

fn add_inputs<T: Real>(a: &ControlInput<T>, b: &ControlInput<T>) -> ControlInput<T> {
    ControlInput::new(a.thrust + b.thrust, a.moment + b.moment)
}

/// One step of the closed loop.
#[derive(Debug, Clone)]
pub struct TrackerStep<T: Real = f64> {
    pub state: SingleSystemState<T>,
    /// Reference at the start of the step.
    pub desired: DesiredPoint<T>,
    /// Input applied at the start of the step.
    pub input: ControlInput<T>,
    pub feedback: ControlInput<T>,
}

/// Closed-loop stepper.
///
/// The feedback `δu` is computed once per step from the state at its start
/// and held; the feedforward `u_d` follows the reference at every RK4 stage,
/// so a run started on the reference stays on it.
pub struct Tracker<'a, T: Real = f64> {
    model: &'a SingleModel<T>,
    outputs: &'a FlatOutputsSingle,
    table: &'a GainTable<T>,
    cache: Vec<DesiredPoint<T>>,
}

impl<'a, T: Real> Tracker<'a, T> {
    pub fn new(
        model: &'a SingleModel<T>,
        outputs: &'a FlatOutputsSingle,
        table: &'a GainTable<T>,
    ) -> Result<Self> {
        let dim = StateLayout::new(model.links()).dim();
        if table.state_dim() != dim || table.input_dim() != 4 {
            return Err(Error::Dimension(format!(
                "gain table is {}×{}, model needs 4×{dim}",
                table.input_dim(),
                table.state_dim()
            )));
        }
        Ok(Self {
            model,
            outputs,
            table,
            cache: Vec::with_capacity(4),
        })
    }

    pub fn desired(&mut self, t: T) -> Result<DesiredPoint<T>> {
        desired_cached(&mut self.cache, self.model, self.outputs, t)
    }

    pub fn step(&mut self, s: &SingleSystemState<T>, t: T, dt: T) -> Result<TrackerStep<T>> {
        let desired = self.desired(t)?;
        let du = feedback(s, &desired, self.table, t)?;
        let input = add_inputs(&desired.input(), &du);
        let (model, outputs) = (self.model, self.outputs);
        let cache = &mut self.cache;
        let state = model.step_with(s, t, dt, |tau, _| {
            let dp = desired_cached(cache, model, outputs, tau)?;
            Ok(add_inputs(&dp.input(), &du))
        })?;
        Ok(TrackerStep {
            state,
            desired,
            input,
            feedback: du,
        })
    }
}

fn desired_cached<T: Real>(
    cache: &mut Vec<DesiredPoint<T>>,
    model: &SingleModel<T>,
    outputs: &FlatOutputsSingle,
    t: T,
) -> Result<DesiredPoint<T>> {
    let eps = tol::<T>(1e-12) * (T::one() + t.abs());
    if let Some(dp) = cache.iter().find(|dp| (dp.t - t).abs() <= eps) {
        return Ok(dp.clone());
    }
    let dp = flat_single(outputs, &model.quad, &model.cable, t)?;
    if cache.len() == 4 {
        cache.remove(0);
    }
    cache.push(dp.clone());
    Ok(dp)
}
