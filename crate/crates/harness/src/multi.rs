//! Planning for several quadrotors sharing one load, with residual reports.

use flexcable::dynamics::multi::{residual_multi_point, residual_multi_rigid, MultiResidual};
use flexcable::flatness::multi::{
    flat_multi_point, flat_multi_rigid_with_map, FlatOutputsRigid, TensionMap,
};
use flexcable::flatness::DesiredPoint;
use flexcable::signal::Signal;
use nalgebra::DVector;
use serde::Serialize;

use crate::config::{RunConfig, SystemKind};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct WarningRecord {
    pub t: f64,
    pub cable: usize,
    pub link: usize,
    pub tension: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiReport {
    pub system: SystemKind,
    pub quadrotors: usize,
    pub links: Vec<usize>,
    pub dof: usize,
    pub samples: usize,
    pub max_residual: f64,
    pub worst_time: f64,
    /// Rigid loads only: largest `‖Φ𝕋 − W‖`.
    pub max_wrench_residual: Option<f64>,
    /// Rigid loads only: largest change of `Φ𝕋` over a sweep of Λ.
    pub kernel_invariance: Option<f64>,
    pub min_tension: f64,
    pub warnings: Vec<WarningRecord>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Sampled references, one CSV row per sample.
#[derive(Debug, Clone)]
pub struct MultiPlan {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub report: MultiReport,
}

const WRENCH_TOLERANCE: f64 = 1e-10;

fn header(links: &[usize], rigid: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for c in ["x", "y", "z"] {
        h.push(format!("load_{c}"));
    }
    if rigid {
        for r in 1..=3 {
            for c in 1..=3 {
                h.push(format!("R_L_{r}{c}"));
            }
        }
    }
    for (i, &n) in links.iter().enumerate() {
        let i = i + 1;
        for c in ["x", "y", "z"] {
            h.push(format!("quad{i}_x0_{c}"));
        }
        for j in 1..=n {
            for c in ["x", "y", "z"] {
                h.push(format!("quad{i}_q{j}_{c}"));
            }
        }
        for r in 1..=3 {
            for c in 1..=3 {
                h.push(format!("quad{i}_R_{r}{c}"));
            }
        }
        h.push(format!("quad{i}_f"));
        for c in ["x", "y", "z"] {
            h.push(format!("quad{i}_M_{c}"));
        }
        for j in 1..=n {
            h.push(format!("quad{i}_T{j}"));
        }
    }
    h.push("residual".into());
    h
}

fn push_cable(row: &mut Vec<f64>, dp: &DesiredPoint) {
    row.extend(dp.x0.iter());
    for q in &dp.q {
        row.extend(q.as_vec().iter());
    }
    row.extend(dp.rot.to_row_major());
    row.push(dp.thrust);
    row.extend(dp.moment.iter());
    row.extend(dp.tensions.magnitudes.iter());
}

fn min_tension(cables: &[DesiredPoint]) -> f64 {
    cables
        .iter()
        .map(|c| c.tensions.min_tension())
        .fold(f64::INFINITY, f64::min)
}

struct Acc {
    rows: Vec<Vec<f64>>,
    max_residual: f64,
    worst_time: f64,
    min_tension: f64,
    warnings: Vec<WarningRecord>,
}

impl Acc {
    fn new(samples: usize) -> Self {
        Self {
            rows: Vec::with_capacity(samples),
            max_residual: 0.0,
            worst_time: 0.0,
            min_tension: f64::INFINITY,
            warnings: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, res: &MultiResidual, cables: &[DesiredPoint], mut row: Vec<f64>) {
        let r = res.max();
        if r >= self.max_residual {
            self.max_residual = r;
            self.worst_time = t;
        }
        self.min_tension = self.min_tension.min(min_tension(cables));
        self.warnings.extend(res.warnings.iter().map(|w| WarningRecord {
            t,
            cable: w.cable,
            link: w.link,
            tension: w.tension,
        }));
        row.push(r);
        self.rows.push(row);
    }
}

fn sample_times(cfg: &RunConfig) -> Vec<f64> {
    let n = cfg.checks.multi_samples.max(2);
    (0..n)
        .map(|k| cfg.checks.multi_duration * k as f64 / (n - 1) as f64)
        .collect()
}

/// Point-mass load: the configured scenario sampled over
/// `checks.multi_duration`.
pub fn plan_multi_point(cfg: &RunConfig) -> Result<MultiPlan> {
    let mp = &cfg.multi_point;
    let params = mp.params(&cfg.quad)?;
    let fo = mp.outputs();
    let times = sample_times(cfg);
    let mut acc = Acc::new(times.len());
    for &t in &times {
        let r = flat_multi_point(&fo, &params, t)?;
        let res = residual_multi_point(&r.snapshot(), &params)?;
        let mut row = vec![t];
        row.extend(r.load.iter());
        for c in &r.cables {
            push_cable(&mut row, c);
        }
        acc.record(t, &res, &r.cables, row);
    }
    let tolerance = cfg.checks.multi_tolerance;
    Ok(MultiPlan {
        header: header(&mp.links, false),
        report: MultiReport {
            system: SystemKind::MultiPoint,
            quadrotors: mp.links.len(),
            links: mp.links.clone(),
            dof: flexcable::dynamics::dof_multi_point(&mp.links),
            samples: times.len(),
            max_residual: acc.max_residual,
            worst_time: acc.worst_time,
            max_wrench_residual: None,
            kernel_invariance: None,
            min_tension: acc.min_tension,
            warnings: acc.warnings,
            tolerance,
            passed: acc.max_residual < tolerance,
        },
        rows: acc.rows,
    })
}

/// Largest change of `Φ𝕋` when the kernel coordinates are swept at `t`,
/// together with the worst dynamics residual seen during the sweep.
pub fn kernel_sweep(cfg: &RunConfig, t: f64) -> Result<(f64, f64)> {
    let mr = &cfg.multi_rigid;
    let params = mr.params(&cfg.quad)?;
    let map = TensionMap::new(&params.attachments)?;
    let base = flat_multi_rigid_with_map(&mr.outputs(), &params, &map, t)?;
    let w = DVector::from_column_slice(base.distribution.wrench.as_slice());
    let mut worst: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for s in [-0.3, 0.1, 0.5] {
        let lambda = (0..map.kernel_dim())
            .map(|k| Signal::constant(s * (k as f64 + 1.0) / map.kernel_dim() as f64))
            .collect();
        let fo = FlatOutputsRigid {
            lambda,
            ..mr.outputs()
        };
        let r = flat_multi_rigid_with_map(&fo, &params, &map, t)?;
        worst = worst.max((&map.phi * &r.distribution.tensions - &w).norm());
        worst_res = worst_res.max(residual_multi_rigid(&r.snapshot(), &params)?.max());
    }
    Ok((worst, worst_res))
}

/// Rigid load: the configured scenario sampled over `checks.multi_duration`.
pub fn plan_multi_rigid(cfg: &RunConfig) -> Result<MultiPlan> {
    let mr = &cfg.multi_rigid;
    let params = mr.params(&cfg.quad)?;
    let map = TensionMap::new(&params.attachments)?;
    let fo = mr.outputs();
    let times = sample_times(cfg);
    let mut acc = Acc::new(times.len());
    let mut wrench: f64 = 0.0;
    for &t in &times {
        let r = flat_multi_rigid_with_map(&fo, &params, &map, t)?;
        wrench = wrench.max(r.distribution.residual());
        let res = residual_multi_rigid(&r.snapshot(), &params)?;
        let mut row = vec![t];
        row.extend(r.load.iter());
        row.extend(r.load_rot.to_row_major());
        for c in &r.cables {
            push_cable(&mut row, c);
        }
        acc.record(t, &res, &r.cables, row);
    }
    let (sweep, sweep_res) = kernel_sweep(cfg, cfg.checks.multi_duration / 2.0)?;
    let tolerance = cfg.checks.multi_tolerance;
    let max_residual = acc.max_residual.max(sweep_res);
    Ok(MultiPlan {
        header: header(&mr.links, true),
        report: MultiReport {
            system: SystemKind::MultiRigid,
            quadrotors: mr.links.len(),
            links: mr.links.clone(),
            dof: flexcable::dynamics::dof_multi_rigid(&mr.links),
            samples: times.len(),
            max_residual,
            worst_time: acc.worst_time,
            max_wrench_residual: Some(wrench),
            kernel_invariance: Some(sweep),
            min_tension: acc.min_tension,
            warnings: acc.warnings,
            tolerance,
            passed: max_residual < tolerance
                && wrench < WRENCH_TOLERANCE
                && sweep < WRENCH_TOLERANCE,
        },
        rows: acc.rows,
    })
}

pub fn plan_multi(cfg: &RunConfig, system: SystemKind) -> Result<MultiPlan> {
    match system {
        SystemKind::MultiPoint => plan_multi_point(cfg),
        SystemKind::MultiRigid => plan_multi_rigid(cfg),
        SystemKind::Single => Err(HarnessError::Config(
            "multi-plan needs system = multi-point or multi-rigid".into(),
        )),
    }
}
