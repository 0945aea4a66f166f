//! Geometric linearization of the single-quadrotor system about a reference.
//!
//! The error state `s ∈ R^{12+6n}` is ordered
//! `[η, δΩ, δx₀, ξ₁ … ξₙ, δv₀, δω₁ … δωₙ]`, where `η` and `ξᵢ` are the
//! tangent-space variations of the attitude and link directions. The
//! dynamics of `s` are `ṡ = A(t)s + B(t)δu` subject to `C(t)s = 0`.
//!
//! [`build_lin`] assembles the analytic block matrices. [`finite_diff_lin`]
//! recovers the same Jacobians numerically by perturbing the nonlinear model
//! along each coordinate and is used to validate the analytic form.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::dynamics::{CableParams, ControlInput, QuadParams, SingleModel, SingleSystemState};
use crate::error::{Error, Result};
use crate::flatness::DesiredPoint;
use crate::geom::{err_s2, err_so3, exp_so3, hat, vee_skew, RotMat, UnitVec};
use crate::scalar::{cast, Real};

/// Offsets of each component inside the error state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub links: usize,
}

impl StateLayout {
    pub fn new(links: usize) -> Self {
        Self { links }
    }

    pub fn dim(&self) -> usize {
        12 + 6 * self.links
    }

    pub const ETA: usize = 0;
    pub const OMEGA: usize = 3;
    pub const X0: usize = 6;

    pub fn xi(&self, i: usize) -> usize {
        9 + 3 * i
    }

    pub fn v0(&self) -> usize {
        9 + 3 * self.links
    }

    pub fn w(&self, i: usize) -> usize {
        12 + 3 * self.links + 3 * i
    }

    /// Three-row groups in state order, with display labels.
    pub fn groups(&self) -> Vec<(String, usize)> {
        let n = self.links;
        let mut g = vec![
            ("η".to_string(), Self::ETA),
            ("δΩ".to_string(), Self::OMEGA),
            ("δx0".to_string(), Self::X0),
        ];
        g.extend((0..n).map(|i| (format!("ξ{}", i + 1), self.xi(i))));
        g.push(("δv0".to_string(), self.v0()));
        g.extend((0..n).map(|i| (format!("δω{}", i + 1), self.w(i))));
        g
    }
}

/// Named blocks of the linearized dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct LinBlocks<T: Real = f64> {
    pub delta1: Matrix3<T>,
    pub delta2: Matrix3<T>,
    pub alpha: Vec<Matrix3<T>>,
    pub beta: Vec<Matrix3<T>>,
    pub a: Vec<Matrix3<T>>,
    pub b: Vec<Matrix3<T>>,
    /// `c[i][j]`
    pub c: Vec<Vec<Matrix3<T>>>,
    pub d: Vec<Vec<Matrix3<T>>>,
    /// Mass matrix multiplying `(δv̇₀, δω̇₁ … δω̇ₙ)`.
    pub nmass: DMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem<T: Real = f64> {
    pub t: T,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    /// `2n × (12+6n)`: rows `ξᵢ·q_id = 0`, then `−ω_idᵀq̂_id ξᵢ + q_idᵀδωᵢ = 0`.
    pub c: DMatrix<T>,
    pub blocks: LinBlocks<T>,
}

impl<T: Real> LinearizedSystem<T> {
    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self.blocks.alpha.len())
    }
}

/// Block formulas evaluated on the reference.
pub fn lin_blocks<T: Real>(dp: &DesiredPoint<T>, model: &SingleModel<T>) -> LinBlocks<T> {
    let n = model.links();
    let m = model.coeffs();
    let g = model.quad.gravity;
    let id = Matrix3::<T>::identity();
    let j = &model.quad.inertia;
    let jinv = model.inertia_inv();
    let rd = dp.rot.as_mat();
    let e3h = hat(&Vector3::z());

    let delta1 = jinv * (hat(&(j * dp.omega)) - hat(&dp.omega) * j);
    let delta2 = -(rd * e3h) * dp.thrust;

    let q: Vec<Vector3<T>> = dp.q.iter().map(|q| q.into_inner()).collect();
    let qh: Vec<Matrix3<T>> = q.iter().map(hat).collect();
    let w = &dp.w;
    let wd = &dp.w_dot;
    let w2: Vec<T> = w.iter().map(|w| w.norm_squared()).collect();

    let alpha = (0..n).map(|i| q[i] * q[i].transpose() * hat(&w[i])).collect();
    let beta = (0..n).map(|i| id - q[i] * q[i].transpose()).collect();
    let a = (0..n)
        .map(|i| (hat(&wd[i]) - id * w2[i]) * qh[i] * m.get(0, i + 1))
        .collect();
    let b = (0..n)
        .map(|i| q[i] * w[i].transpose() * (m.get(0, i + 1) + m.get(0, i + 1)))
        .collect();

    let lengths = model.cable.lengths();
    let mut c = vec![vec![Matrix3::zeros(); n]; n];
    let mut d = vec![vec![Matrix3::zeros(); n]; n];
    for i in 0..n {
        let mii = i + 1;
        for jj in 0..n {
            let mj = jj + 1;
            if i == jj {
                let mut acc = hat(&dp.a0) * m.get(mii, 0)
                    + e3h * (model.cable.mass_below(i) * g * lengths[i]);
                for k in 0..n {
                    if k != i {
                        acc -= (hat(&(qh[k] * wd[k])) + qh[k] * w2[k]) * m.get(mii, k + 1);
                    }
                }
                c[i][i] = -(acc * qh[i]);
            } else {
                c[i][jj] = qh[i] * (hat(&wd[jj]) - id * w2[jj]) * qh[jj] * m.get(mii, mj);
                d[i][jj] = qh[i] * q[jj] * w[jj].transpose() * (m.get(mii, mj) + m.get(mii, mj));
            }
        }
    }

    let dim = 3 + 3 * n;
    let mut nmass = DMatrix::zeros(dim, dim);
    nmass
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(id * m.get(0, 0)));
    for i in 0..n {
        let r = 3 + 3 * i;
        nmass
            .fixed_view_mut::<3, 3>(0, r)
            .copy_from(&(-qh[i] * m.get(0, i + 1)));
        nmass
            .fixed_view_mut::<3, 3>(r, 0)
            .copy_from(&(qh[i] * m.get(i + 1, 0)));
        for jj in 0..n {
            let blk = if i == jj {
                id * m.get(i + 1, i + 1)
            } else {
                -(qh[i] * qh[jj]) * m.get(i + 1, jj + 1)
            };
            nmass
                .fixed_view_mut::<3, 3>(r, 3 + 3 * jj)
                .copy_from(&blk);
        }
    }

    LinBlocks {
        delta1,
        delta2,
        alpha,
        beta,
        a,
        b,
        c,
        d,
        nmass,
    }
}

/// Assembles `A(t)`, `B(t)` and `C(t)` on the reference point.
pub fn build_lin_with<T: Real>(
    dp: &DesiredPoint<T>,
    model: &SingleModel<T>,
) -> Result<LinearizedSystem<T>> {
    let n = model.links();
    let lay = StateLayout::new(n);
    let dim = lay.dim();
    let blk = lin_blocks(dp, model);
    let id = Matrix3::<T>::identity();

    let mut a = DMatrix::<T>::zeros(dim, dim);
    let put = |m: &mut DMatrix<T>, r: usize, c: usize, v: &Matrix3<T>| {
        m.fixed_view_mut::<3, 3>(r, c).copy_from(v);
    };
    put(&mut a, StateLayout::ETA, StateLayout::ETA, &-hat(&dp.omega));
    put(&mut a, StateLayout::ETA, StateLayout::OMEGA, &id);
    put(&mut a, StateLayout::OMEGA, StateLayout::OMEGA, &blk.delta1);
    put(&mut a, StateLayout::X0, lay.v0(), &id);
    for i in 0..n {
        put(&mut a, lay.xi(i), lay.xi(i), &blk.alpha[i]);
        put(&mut a, lay.xi(i), lay.w(i), &blk.beta[i]);
    }

    // Right-hand side of the mass-matrix rows, solved by N below.
    let rows = 3 + 3 * n;
    let mut g = DMatrix::<T>::zeros(rows, dim + 4);
    put(&mut g, 0, StateLayout::ETA, &blk.delta2);
    for j in 0..n {
        put(&mut g, 0, lay.xi(j), &blk.a[j]);
        put(&mut g, 0, lay.w(j), &blk.b[j]);
    }
    for i in 0..n {
        for j in 0..n {
            put(&mut g, 3 + 3 * i, lay.xi(j), &blk.c[i][j]);
            put(&mut g, 3 + 3 * i, lay.w(j), &blk.d[i][j]);
        }
    }
    let thrust_dir = dp.rot.as_mat() * Vector3::z();
    g.fixed_view_mut::<3, 1>(0, dim).copy_from(&thrust_dir);

    let lu = blk.nmass.clone().lu();
    let sol = lu.solve(&g).ok_or(Error::SingularMassMatrix)?;
    a.view_mut((lay.v0(), 0), (rows, dim))
        .copy_from(&sol.view((0, 0), (rows, dim)));

    let mut b = DMatrix::<T>::zeros(dim, 4);
    b.view_mut((StateLayout::OMEGA, 1), (3, 3))
        .copy_from(model.inertia_inv());
    b.view_mut((lay.v0(), 0), (rows, 1))
        .copy_from(&sol.view((0, dim), (rows, 1)));

    let mut c = DMatrix::<T>::zeros(2 * n, dim);
    for i in 0..n {
        let q = dp.q[i].into_inner();
        let c2 = -(dp.w[i].transpose() * hat(&q));
        c.view_mut((i, lay.xi(i)), (1, 3)).copy_from(&q.transpose());
        c.view_mut((n + i, lay.xi(i)), (1, 3)).copy_from(&c2);
        c.view_mut((n + i, lay.w(i)), (1, 3)).copy_from(&q.transpose());
    }

    Ok(LinearizedSystem {
        t: dp.t,
        a,
        b,
        c,
        blocks: blk,
    })
}

/// See [`build_lin_with`].
pub fn build_lin<T: Real>(
    dp: &DesiredPoint<T>,
    qp: &QuadParams<T>,
    cp: &CableParams<T>,
) -> Result<LinearizedSystem<T>> {
    build_lin_with(dp, &SingleModel::new(qp.clone(), cp.clone()))
}

/// Tracking errors used by the controller: `η = e_R`, `δΩ = e_Ω`,
/// `ξᵢ = e_qᵢ = q_id × qᵢ`, `δωᵢ = e_ωᵢ`, plain differences for `x₀`, `v₀`.
pub fn error_coords<T: Real>(actual: &SingleSystemState<T>, dp: &DesiredPoint<T>) -> DVector<T> {
    let n = dp.links();
    let lay = StateLayout::new(n);
    let mut s = DVector::zeros(lay.dim());
    let so3 = err_so3(&actual.rot, &dp.rot, &actual.omega, &dp.omega);
    s.fixed_rows_mut::<3>(StateLayout::ETA).copy_from(&so3.e_r);
    s.fixed_rows_mut::<3>(StateLayout::OMEGA).copy_from(&so3.e_omega);
    s.fixed_rows_mut::<3>(StateLayout::X0)
        .copy_from(&(actual.x0 - dp.x0));
    s.fixed_rows_mut::<3>(lay.v0())
        .copy_from(&(actual.v0 - dp.v0));
    for i in 0..n {
        let (e_q, e_w) = err_s2(&actual.q[i], &dp.q[i], &actual.w[i], &dp.w[i]);
        s.fixed_rows_mut::<3>(lay.xi(i)).copy_from(&e_q);
        s.fixed_rows_mut::<3>(lay.w(i)).copy_from(&e_w);
    }
    s
}

/// Coordinates of a state relative to the reference that agree with the
/// variations to first order and are smooth everywhere the reference is:
/// `η = ½(R_dᵀR − RᵀR_d)^∨`, `δΩ = Ω − Ω_d`, `ξᵢ = q_id × qᵢ`,
/// `δωᵢ = ωᵢ − ω_id`.
pub fn variation_coords<T: Real>(
    actual: &SingleSystemState<T>,
    dp: &DesiredPoint<T>,
) -> DVector<T> {
    let n = dp.links();
    let lay = StateLayout::new(n);
    let mut s = DVector::zeros(lay.dim());
    let e = dp.rot.transpose().as_mat() * actual.rot.as_mat();
    s.fixed_rows_mut::<3>(StateLayout::ETA).copy_from(&vee_skew(&e));
    s.fixed_rows_mut::<3>(StateLayout::OMEGA)
        .copy_from(&(actual.omega - dp.omega));
    s.fixed_rows_mut::<3>(StateLayout::X0)
        .copy_from(&(actual.x0 - dp.x0));
    s.fixed_rows_mut::<3>(lay.v0())
        .copy_from(&(actual.v0 - dp.v0));
    for i in 0..n {
        s.fixed_rows_mut::<3>(lay.xi(i))
            .copy_from(&dp.q[i].cross(&actual.q[i]));
        s.fixed_rows_mut::<3>(lay.w(i))
            .copy_from(&(actual.w[i] - dp.w[i]));
    }
    s
}

/// The state reached by moving along `s` from the reference:
/// `R = R_d exp(η̂)`, `qᵢ = exp(ξ̂ᵢ) q_id` with `ξᵢ` projected onto the
/// tangent plane of `q_id`, and additive velocities. Link angular velocities
/// are not re-projected, so normal components of `δωᵢ` are kept.
pub fn apply_variation<T: Real>(dp: &DesiredPoint<T>, s: &DVector<T>) -> SingleSystemState<T> {
    let n = dp.links();
    let lay = StateLayout::new(n);
    let v = |k: usize| Vector3::new(s[k], s[k + 1], s[k + 2]);
    let rot = RotMat::new_orthonormalize(dp.rot.as_mat() * exp_so3(&v(StateLayout::ETA)));
    let q = (0..n)
        .map(|i| {
            let xi = dp.q[i].project_tangent(&v(lay.xi(i)));
            UnitVec::new_normalize(exp_so3(&xi) * dp.q[i].as_vec())
        })
        .collect();
    let w = (0..n).map(|i| dp.w[i] + v(lay.w(i))).collect();
    SingleSystemState {
        x0: dp.x0 + v(StateLayout::X0),
        v0: dp.v0 + v(lay.v0()),
        rot,
        omega: dp.omega + v(StateLayout::OMEGA),
        q,
        w,
    }
}

/// Projects `s` onto the kernel of `C(t)`: each `ξᵢ` onto the tangent plane
/// of `q_id`, and the normal part of `δωᵢ` set to `ω_idᵀ(q_id × ξᵢ)`.
pub fn constrain_variation<T: Real>(dp: &DesiredPoint<T>, s: &DVector<T>) -> DVector<T> {
    let lay = StateLayout::new(dp.links());
    let mut out = s.clone();
    for i in 0..dp.links() {
        let q = dp.q[i].as_vec();
        let xi = dp.q[i].project_tangent(&s.fixed_rows::<3>(lay.xi(i)).into_owned());
        let dw = dp.q[i].project_tangent(&s.fixed_rows::<3>(lay.w(i)).into_owned())
            + q * dp.w[i].dot(&q.cross(&xi));
        out.fixed_rows_mut::<3>(lay.xi(i)).copy_from(&xi);
        out.fixed_rows_mut::<3>(lay.w(i)).copy_from(&dw);
    }
    out
}

/// Time derivative of [`variation_coords`] along the nonlinear flow.
pub fn variation_rates<T: Real>(
    model: &SingleModel<T>,
    x: &SingleSystemState<T>,
    u: &ControlInput<T>,
    dp: &DesiredPoint<T>,
) -> Result<DVector<T>> {
    let n = dp.links();
    let lay = StateLayout::new(n);
    let acc = model.accel(x, u)?;
    let mut r = DVector::zeros(lay.dim());

    let e = dp.rot.transpose().as_mat() * x.rot.as_mat();
    let e_dot = -hat(&dp.omega) * e + e * hat(&x.omega);
    r.fixed_rows_mut::<3>(StateLayout::ETA)
        .copy_from(&vee_skew(&e_dot));
    r.fixed_rows_mut::<3>(StateLayout::OMEGA)
        .copy_from(&(acc.omega_dot - dp.omega_dot));
    r.fixed_rows_mut::<3>(StateLayout::X0)
        .copy_from(&(x.v0 - dp.v0));
    r.fixed_rows_mut::<3>(lay.v0())
        .copy_from(&(acc.v0_dot - dp.a0));
    for i in 0..n {
        let qd = dp.q[i].as_vec();
        let q = x.q[i].as_vec();
        let qd_dot = dp.w[i].cross(qd);
        let q_dot = x.w[i].cross(q);
        r.fixed_rows_mut::<3>(lay.xi(i))
            .copy_from(&(qd_dot.cross(q) + qd.cross(&q_dot)));
        r.fixed_rows_mut::<3>(lay.w(i))
            .copy_from(&(acc.w_dot[i] - dp.w_dot[i]));
    }
    Ok(r)
}

/// Central-difference Jacobians of the variation rates with respect to the
/// error state and the input, at the reference point.
pub fn finite_diff_lin<T: Real>(
    dp: &DesiredPoint<T>,
    model: &SingleModel<T>,
    h: T,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let dim = StateLayout::new(dp.links()).dim();
    let two_h = h + h;
    let u_d = dp.input();
    let mut a = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let mut s = DVector::zeros(dim);
        s[k] = h;
        let plus = variation_rates(model, &apply_variation(dp, &s), &u_d, dp)?;
        s[k] = -h;
        let minus = variation_rates(model, &apply_variation(dp, &s), &u_d, dp)?;
        a.set_column(k, &((plus - minus) / two_h));
    }
    let x = dp.state();
    let mut b = DMatrix::zeros(dim, 4);
    for k in 0..4 {
        let mut up = u_d.as_array();
        let mut um = u_d.as_array();
        up[k] += h;
        um[k] -= h;
        let plus = variation_rates(model, &x, &ControlInput::from_array(up), dp)?;
        let minus = variation_rates(model, &x, &ControlInput::from_array(um), dp)?;
        b.set_column(k, &((plus - minus) / two_h));
    }
    Ok((a, b))
}

/// Worst block-wise disagreement between two Jacobians.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockComparison {
    pub max_rel_a: f64,
    pub max_rel_b: f64,
    /// Row and column group of the worst `A` block.
    pub worst_a: (String, String),
    pub worst_b: (String, String),
}

/// Relative error of every 3×3 block of `A` and 3×1 / 3×3 block of `B`.
///
/// Each block's error is `‖Δ‖ / max(‖blk‖, ‖blk_fd‖, 1e-6 ‖M‖)`, so blocks
/// that are zero in both matrices do not blow up the ratio.
pub fn compare_blocks<T: Real>(
    layout: StateLayout,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    a_fd: &DMatrix<T>,
    b_fd: &DMatrix<T>,
) -> BlockComparison {
    use crate::scalar::to_f64;
    let groups = layout.groups();
    let floor_a = to_f64(a.norm()) * 1e-6;
    let floor_b = to_f64(b.norm()) * 1e-6;
    let rel = |x: &DMatrix<T>, y: &DMatrix<T>, r: usize, c: usize, w: usize, floor: f64| {
        let bx = x.view((r, c), (3, w));
        let by = y.view((r, c), (3, w));
        let d = to_f64((bx - by).norm());
        let scale = to_f64(bx.norm()).max(to_f64(by.norm())).max(floor);
        if scale == 0.0 {
            0.0
        } else {
            d / scale
        }
    };
    let mut out = BlockComparison {
        max_rel_a: 0.0,
        max_rel_b: 0.0,
        worst_a: (String::new(), String::new()),
        worst_b: (String::new(), String::new()),
    };
    for (rn, r) in &groups {
        for (cn, c) in &groups {
            let e = rel(a, a_fd, *r, *c, 3, floor_a);
            if e >= out.max_rel_a {
                out.max_rel_a = e;
                out.worst_a = (rn.clone(), cn.clone());
            }
        }
        for (cn, c, w) in [("δf", 0usize, 1usize), ("δM", 1, 3)] {
            let e = rel(b, b_fd, *r, c, w, floor_b);
            if e >= out.max_rel_b {
                out.max_rel_b = e;
                out.worst_b = (rn.clone(), cn.to_string());
            }
        }
    }
    out
}

/// RK4 propagation of `ṡ = A(t)s` from `t0` over `steps` steps of `dt`,
/// recording the state after every step.
pub fn propagate_linear<T, F>(
    mut a_of: F,
    s0: &DVector<T>,
    t0: T,
    dt: T,
    steps: usize,
) -> Result<Vec<DVector<T>>>
where
    T: Real,
    F: FnMut(T) -> Result<DMatrix<T>>,
{
    let half = cast::<T>(0.5);
    let mut s = s0.clone();
    let mut out = Vec::with_capacity(steps);
    let mut t = t0;
    let mut a_start = a_of(t)?;
    for _ in 0..steps {
        let a_mid = a_of(t + dt * half)?;
        let a_end = a_of(t + dt)?;
        let k1 = &a_start * &s;
        let k2 = &a_mid * (&s + &k1 * (dt * half));
        let k3 = &a_mid * (&s + &k2 * (dt * half));
        let k4 = &a_end * (&s + &k3 * dt);
        s += (k1 + (k2 + k3) * cast::<T>(2.0) + k4) * (dt / cast::<T>(6.0));
        out.push(s.clone());
        t += dt;
        a_start = a_end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatness::{flat_single, FlatOutputsSingle};
    use approx::assert_relative_eq;

    fn hover() -> (SingleModel, DesiredPoint) {
        let model = SingleModel::reference();
        let dp = flat_single(&FlatOutputsSingle::hover([0.0; 3]), &model.quad, &model.cable, 0.0)
            .unwrap();
        (model, dp)
    }

    #[test]
    fn hover_blocks() {
        let (model, dp) = hover();
        let blk = lin_blocks(&dp, &model);
        assert_relative_eq!(blk.delta2, -hat(&Vector3::z()) * (1.35 * 9.81), epsilon = 1e-12);
        let proj = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
        for i in 0..5 {
            assert!(blk.alpha[i].amax() < 1e-15);
            assert!(blk.b[i].amax() < 1e-15);
            assert_relative_eq!(blk.beta[i], proj, epsilon = 1e-15);
            assert_eq!(blk.d[i][i], Matrix3::zeros());
        }
    }

    #[test]
    fn kinematic_rows_and_thrust_column() {
        let (model, dp) = hover();
        let lin = build_lin_with(&dp, &model).unwrap();
        let lay = lin.layout();
        let rows = lin.a.view((StateLayout::X0, 0), (3, lay.dim()));
        for c in 0..lay.dim() {
            for r in 0..3 {
                let expect = if c == lay.v0() + r { 1.0 } else { 0.0 };
                assert_eq!(rows[(r, c)], expect);
            }
        }
        // At hover only the quadrotor accelerates under extra thrust, and the
        // links are pulled along rigidly: δv̇₀ = e₃/M₀₀.
        assert_relative_eq!(lin.b[(lay.v0() + 2, 0)], 1.0 / 1.35, epsilon = 1e-12);
        assert_eq!(lin.b.clone().rank(1e-9), 4);
    }

    #[test]
    fn fd_matches_at_hover() {
        let (model, dp) = hover();
        let lin = build_lin_with(&dp, &model).unwrap();
        let (a_fd, b_fd) = finite_diff_lin(&dp, &model, 1e-5).unwrap();
        let cmp = compare_blocks(lin.layout(), &lin.a, &lin.b, &a_fd, &b_fd);
        assert!(cmp.max_rel_a < 1e-4 && cmp.max_rel_b < 1e-4, "{cmp:?}");
    }

    #[test]
    fn fd_matches_on_moving_reference() {
        let model = SingleModel::reference();
        let dp = flat_single(&FlatOutputsSingle::reference(), &model.quad, &model.cable, 0.5)
            .unwrap();
        let lin = build_lin_with(&dp, &model).unwrap();
        let (a_fd, b_fd) = finite_diff_lin(&dp, &model, 1e-5).unwrap();
        let cmp = compare_blocks(lin.layout(), &lin.a, &lin.b, &a_fd, &b_fd);
        assert!(cmp.max_rel_a < 1e-4 && cmp.max_rel_b < 1e-4, "{cmp:?}");
    }

    #[test]
    fn error_coords_vanish_on_reference() {
        let (_, dp) = hover();
        assert_eq!(error_coords(&dp.state(), &dp).amax(), 0.0);
    }

    #[test]
    fn tilted_link_error() {
        let (_, dp) = hover();
        let mut x = dp.state();
        x.q[2] = UnitVec::new_normalize(crate::geom::rotation_about(&Vector3::x(), 0.1) * -Vector3::z());
        let s = error_coords(&x, &dp);
        let lay = StateLayout::new(5);
        assert_relative_eq!(s.fixed_rows::<3>(lay.xi(2)).norm(), 0.1f64.sin(), epsilon = 1e-15);
        assert!(s.fixed_rows::<3>(lay.xi(2)).dot(dp.q[2].as_vec()).abs() < 1e-15);
    }

    #[test]
    fn constrained_variation_satisfies_c() {
        let model = SingleModel::reference();
        let fo = FlatOutputsSingle::reference();
        let dp = flat_single(&fo, &model.quad, &model.cable, 2.3).unwrap();
        let lin = build_lin_with(&dp, &model).unwrap();
        let raw = DVector::from_fn(lin.a.nrows(), |i, _| ((i * 7 % 11) as f64 - 5.0) / 10.0);
        assert!((&lin.c * &raw).norm() > 1e-3);
        let s = constrain_variation(&dp, &raw);
        assert!((&lin.c * &s).norm() < 1e-12);
        assert!((constrain_variation(&dp, &s) - &s).norm() < 1e-14);
    }

    #[test]
    fn variation_roundtrip_is_first_order() {
        let model = SingleModel::reference();
        let dp = flat_single(&FlatOutputsSingle::reference(), &model.quad, &model.cable, 1.1)
            .unwrap();
        let lay = StateLayout::new(5);
        let mut dir = DVector::from_fn(lay.dim(), |k, _| ((k * 7 % 11) as f64 - 5.0) / 5.0);
        for i in 0..5 {
            let xi = dp.q[i].project_tangent(&dir.fixed_rows::<3>(lay.xi(i)).into_owned());
            dir.fixed_rows_mut::<3>(lay.xi(i)).copy_from(&xi);
        }
        // the variation chart inverts apply_variation to first order, with
        // an odd remainder
        let gap = |eps: f64| {
            (variation_coords(&apply_variation(&dp, &(&dir * eps)), &dp) - &dir * eps).norm()
        };
        let ratio = gap(1e-3) / gap(5e-4);
        assert!((7.5..8.5).contains(&ratio), "{ratio}");

        // tracking errors are smooth in the perturbation: s(ε) − 2 s(ε/2) = O(ε²)
        let curv = |eps: f64| {
            let full = error_coords(&apply_variation(&dp, &(&dir * eps)), &dp);
            let half = error_coords(&apply_variation(&dp, &(&dir * (eps / 2.0))), &dp);
            (full - half * 2.0).norm()
        };
        let ratio = curv(1e-3) / curv(5e-4);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }
}
