//! Numerical self-checks shared by the CLI and the test suites.

use flexcable::dynamics::{ControlInput, SingleModel, SingleSystemState};
use flexcable::flatness::{flat_single, FlatOutputsSingle};
use flexcable::geom::{RotMat, UnitVec};
use flexcable::linearize::{
    apply_variation, build_lin_with, compare_blocks, constrain_variation, finite_diff_lin,
    propagate_linear, variation_coords, StateLayout,
};
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct LinSample {
    pub t: f64,
    pub max_rel_a: f64,
    pub max_rel_b: f64,
    pub worst_a: (String, String),
    pub worst_b: (String, String),
}

#[derive(Debug, Clone, Serialize)]
pub struct LinReport {
    pub state_dim: usize,
    pub samples: Vec<LinSample>,
    pub max_rel: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Assembled `A`, `B` against central differences of the nonlinear model at
/// `checks.lincheck_times` points spread over the horizon.
pub fn lincheck(cfg: &RunConfig) -> Result<LinReport> {
    let model = cfg.single_model()?;
    let outputs = cfg.flat_outputs();
    let m = cfg.checks.lincheck_times.max(1);
    let layout = StateLayout::new(model.links());
    let mut samples = Vec::with_capacity(m);
    for k in 0..m {
        let t = cfg.sim.horizon * (k as f64 + 0.5) / m as f64;
        let dp = flat_single(&outputs, &model.quad, &model.cable, t)?;
        let lin = build_lin_with(&dp, &model)?;
        let (a_fd, b_fd) = finite_diff_lin(&dp, &model, cfg.checks.lincheck_step)?;
        let cmp = compare_blocks(layout, &lin.a, &lin.b, &a_fd, &b_fd);
        samples.push(LinSample {
            t,
            max_rel_a: cmp.max_rel_a,
            max_rel_b: cmp.max_rel_b,
            worst_a: cmp.worst_a,
            worst_b: cmp.worst_b,
        });
    }
    let max_rel = samples
        .iter()
        .map(|s| s.max_rel_a.max(s.max_rel_b))
        .fold(0.0, f64::max);
    Ok(LinReport {
        state_dim: layout.dim(),
        samples,
        max_rel,
        tolerance: cfg.checks.lincheck_tolerance,
        passed: max_rel < cfg.checks.lincheck_tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub cases: usize,
    pub links: Vec<usize>,
    pub max_residual: f64,
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(-r..r))
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> SingleSystemState {
    let mut q = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for _ in 0..n {
        let dir = loop {
            let v = random_vec(rng, 1.0);
            if v.norm() > 0.1 {
                break UnitVec::new_normalize(v);
            }
        };
        w.push(dir.project_tangent(&random_vec(rng, 4.0)));
        q.push(dir);
    }
    SingleSystemState {
        x0: random_vec(rng, 2.0),
        v0: random_vec(rng, 2.0),
        rot: RotMat::exp(&random_vec(rng, 3.0)),
        omega: random_vec(rng, 3.0),
        q,
        w,
    }
}

/// Compact-form accelerations checked against the tension form on random
/// states and inputs (`cases` per link count).
pub fn equivalence(cfg: &RunConfig, cases: usize, links: &[usize]) -> Result<EquivalenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let qp = cfg.quad.params()?;
    let mut max_residual: f64 = 0.0;
    for &n in links {
        let masses = (0..n).map(|i| 0.05 + 0.03 * i as f64).collect();
        let lengths = (0..n).map(|i| 0.2 + 0.05 * i as f64).collect();
        let model = SingleModel::new(
            qp.clone(),
            flexcable::dynamics::CableParams::new(masses, lengths)?,
        );
        for _ in 0..cases {
            let s = random_state(&mut rng, n);
            let u = ControlInput::new(rng.gen_range(0.0..30.0), random_vec(&mut rng, 0.05));
            let acc = model.accel(&s, &u)?;
            max_residual = max_residual.max(model.newton_euler_residual(&s, &u, &acc).max());
        }
    }
    Ok(EquivalenceReport {
        cases,
        links: links.to_vec(),
        max_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionReport {
    pub t0: f64,
    pub duration: f64,
    pub eps: f64,
    pub deviation: f64,
    pub deviation_half: f64,
    pub ratio: f64,
}

/// A fixed unit direction in the error space, projected onto the linear
/// constraint at `t0`.
fn probe_direction(dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| ((i * 7 + 3) % 11) as f64 / 10.0 - 0.5)
}

/// Largest gap between the nonlinear and the linearized error over
/// `duration`, starting from an error of size `eps`.
fn prediction_gap(
    model: &SingleModel,
    outputs: &FlatOutputsSingle,
    t0: f64,
    duration: f64,
    dt: f64,
    eps: f64,
) -> Result<f64> {
    let dp = |t: f64| flat_single(outputs, &model.quad, &model.cable, t);
    let dp0 = dp(t0)?;
    let dim = StateLayout::new(model.links()).dim();
    let dir = constrain_variation(&dp0, &probe_direction(dim));
    let s0 = &dir * (eps / dir.norm());
    let steps = (duration / dt).round() as usize;

    let linear = propagate_linear(
        |t| Ok(build_lin_with(&dp(t)?, model)?.a),
        &s0,
        t0,
        dt,
        steps,
    )?;

    let mut perturbed = apply_variation(&dp0, &s0).projected();
    let mut nominal = dp0.state();
    let mut gap: f64 = 0.0;
    for (k, lin) in linear.iter().enumerate() {
        let t = t0 + k as f64 * dt;
        let ff = |tau: f64, _: &SingleSystemState| Ok(dp(tau)?.input());
        perturbed = model.step_with(&perturbed, t, dt, ff)?;
        nominal = model.step_with(&nominal, t, dt, ff)?;
        let d = dp(t + dt)?;
        let s_nl = variation_coords(&perturbed, &d) - variation_coords(&nominal, &d);
        gap = gap.max((s_nl - lin).norm());
    }
    Ok(gap)
}

/// Ratio of prediction gaps for initial errors `eps` and `eps/2`; a
/// consistent linearization leaves a quadratic remainder and a ratio near 4.
pub fn prediction_order(
    cfg: &RunConfig,
    t0: f64,
    duration: f64,
    eps: f64,
) -> Result<PredictionReport> {
    let model = cfg.single_model()?;
    let outputs = cfg.flat_outputs();
    let dt = cfg.sim.dt;
    let deviation = prediction_gap(&model, &outputs, t0, duration, dt, eps)?;
    let deviation_half = prediction_gap(&model, &outputs, t0, duration, dt, eps / 2.0)?;
    Ok(PredictionReport {
        t0,
        duration,
        eps,
        deviation,
        deviation_half,
        ratio: deviation / deviation_half,
    })
}

/// Load position drift after running the feedforward alone from the exact
/// reference state.
pub fn feedforward_drift(cfg: &RunConfig, duration: f64, dt: f64) -> Result<f64> {
    let model = cfg.single_model()?;
    let outputs = cfg.flat_outputs();
    let dp = |t: f64| flat_single(&outputs, &model.quad, &model.cable, t);
    let mut s = dp(0.0)?.state();
    let steps = (duration / dt).round() as usize;
    for k in 0..steps {
        s = model.step_with(&s, k as f64 * dt, dt, |t, _| Ok(dp(t)?.input()))?;
    }
    let end = dp(steps as f64 * dt)?;
    Ok((s.load_position(&model.cable) - end.load()).norm())
}

/// Largest relative energy change of an unforced swinging system.
pub fn energy_drift(cfg: &RunConfig, duration: f64) -> Result<f64> {
    let model = cfg.single_model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = model.links();
    let mut s = SingleSystemState::hanging(Vector3::new(0.0, 0.0, 1.5), n);
    s.omega = random_vec(&mut rng, 1.0);
    for i in 0..n {
        let tilt = random_vec(&mut rng, 0.3);
        s.q[i] = UnitVec::new_normalize(Vector3::new(tilt.x, tilt.y, -1.0));
        s.w[i] = s.q[i].project_tangent(&random_vec(&mut rng, 1.0));
    }
    let e0 = model.energy(&s);
    let dt = cfg.sim.dt;
    let u = ControlInput::zero();
    let mut worst: f64 = 0.0;
    for _ in 0..(duration / dt).round() as usize {
        s = model.step(&s, &u, dt)?;
        worst = worst.max((model.energy(&s) - e0).abs() / e0.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DofReport {
    pub single: usize,
    pub single_underactuation: isize,
    pub multi_point: usize,
    pub multi_point_underactuation: isize,
    pub multi_rigid: usize,
    pub multi_rigid_underactuation: isize,
}

/// Degrees of freedom of the configured systems.
pub fn dof(cfg: &RunConfig) -> DofReport {
    use flexcable::dynamics::{degrees_of_underactuation, dof_multi_point, dof_multi_rigid, dof_single};
    let single = dof_single(cfg.cable.links());
    let mp = &cfg.multi_point.links;
    let mr = &cfg.multi_rigid.links;
    DofReport {
        single,
        single_underactuation: degrees_of_underactuation(single, 1),
        multi_point: dof_multi_point(mp),
        multi_point_underactuation: degrees_of_underactuation(dof_multi_point(mp), mp.len()),
        multi_rigid: dof_multi_rigid(mr),
        multi_rigid_underactuation: degrees_of_underactuation(dof_multi_rigid(mr), mr.len()),
    }
}
