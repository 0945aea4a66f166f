//! Sampling the flat reference: plan files and the flatness self-check.

use flexcable::dynamics::SingleModel;
use flexcable::flatness::{flat_single, DesiredPoint, FlatOutputsSingle};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

/// Largest Newton–Euler residual of the model evaluated on a reference point.
pub fn reference_residual(model: &SingleModel, dp: &DesiredPoint) -> f64 {
    model
        .newton_euler_residual(&dp.state(), &dp.input(), &dp.model_accelerations())
        .max()
}

/// Reference samples with their dynamics residual.
#[derive(Debug, Clone)]
pub struct Plan {
    pub points: Vec<DesiredPoint>,
    pub residuals: Vec<f64>,
}

impl Plan {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn header(links: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for c in ["x", "y", "z"] {
            h.push(format!("xn_d_{c}"));
        }
        for c in ["x", "y", "z"] {
            h.push(format!("x0_d_{c}"));
        }
        for i in 1..=links {
            for c in ["x", "y", "z"] {
                h.push(format!("q{i}_d_{c}"));
            }
        }
        for r in 1..=3 {
            for c in 1..=3 {
                h.push(format!("R_d_{r}{c}"));
            }
        }
        h.push("f_d".into());
        for c in ["x", "y", "z"] {
            h.push(format!("M_d_{c}"));
        }
        for i in 1..=links {
            h.push(format!("T{i}"));
        }
        h.push("residual".into());
        h
    }

    pub fn row(dp: &DesiredPoint, residual: f64) -> Vec<f64> {
        let mut r = vec![dp.t];
        r.extend(dp.load().iter());
        r.extend(dp.x0.iter());
        for q in &dp.q {
            r.extend(q.as_vec().iter());
        }
        r.extend(dp.rot.to_row_major());
        r.push(dp.thrust);
        r.extend(dp.moment.iter());
        r.extend(dp.tensions.magnitudes.iter());
        r.push(residual);
        r
    }
}

/// Samples `t = 0, Δ, 2Δ, … ≤ T`.
pub fn sample_times(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

pub fn plan_at(
    model: &SingleModel,
    outputs: &FlatOutputsSingle,
    times: &[f64],
) -> Result<Plan> {
    let mut points = Vec::with_capacity(times.len());
    let mut residuals = Vec::with_capacity(times.len());
    for &t in times {
        let dp = flat_single(outputs, &model.quad, &model.cable, t)?;
        residuals.push(reference_residual(model, &dp));
        points.push(dp);
    }
    Ok(Plan { points, residuals })
}

/// The reference sampled every `sim.plan_dt` over the horizon.
pub fn plan(cfg: &RunConfig) -> Result<Plan> {
    let model = cfg.single_model()?;
    plan_at(
        &model,
        &cfg.flat_outputs(),
        &sample_times(cfg.sim.horizon, cfg.sim.plan_dt),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatReport {
    pub samples: usize,
    pub max_residual: f64,
    pub worst_time: f64,
    pub min_tension: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Dynamics residuals at `checks.flatcheck_samples` evenly spaced times in
/// `[0, T]`.
pub fn flatcheck(cfg: &RunConfig) -> Result<FlatReport> {
    let model = cfg.single_model()?;
    let n = cfg.checks.flatcheck_samples.max(2);
    let times: Vec<f64> = (0..n)
        .map(|k| cfg.sim.horizon * k as f64 / (n - 1) as f64)
        .collect();
    let plan = plan_at(&model, &cfg.flat_outputs(), &times)?;
    let (worst, &max_residual) = plan
        .residuals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least two samples");
    let min_tension = plan
        .points
        .iter()
        .map(|p| p.tensions.min_tension())
        .fold(f64::INFINITY, f64::min);
    Ok(FlatReport {
        samples: n,
        max_residual,
        worst_time: times[worst],
        min_tension,
        tolerance: cfg.checks.flatcheck_tolerance,
        passed: max_residual < cfg.checks.flatcheck_tolerance,
    })
}
