//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero if any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use flexcable::control::{riccati_backward, FnLinear, LqrWeights};
use flexcable::flatness::flat_single;
use flexcable::linearize::build_lin_with;
use flexcable::GainTable;
use flexcable_harness::checks;
use flexcable_harness::multi;
use flexcable_harness::plan;
use flexcable_harness::sim::{self, RunRecord};
use flexcable_harness::{Result, RunConfig};
use nalgebra::{DMatrix, SymmetricEigen};

type Outcome = Result<(bool, String)>;

struct Report {
    failures: usize,
}

impl Report {
    fn run(&mut self, n: usize, name: &str, budget: f64, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && secs < budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            self.failures += 1;
        }
        println!(
            "criterion {n} ({name}): {} | {detail} | {secs:.2} s of {budget:.0} s",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn equivalence(cfg: &RunConfig) -> Outcome {
    let r = checks::equivalence(cfg, 100, &[1, 2, 5])?;
    Ok((
        r.max_residual < 1e-8,
        format!("{} cases for n in {:?}, max residual {:.2e}", r.cases, r.links, r.max_residual),
    ))
}

fn flatness(cfg: &RunConfig) -> Outcome {
    let r = plan::flatcheck(cfg)?;
    let drift = checks::feedforward_drift(cfg, 1.0, 1e-4)?;
    Ok((
        r.samples == 300 && r.max_residual < 1e-6 && drift < 1e-3,
        format!(
            "{} samples, max residual {:.2e}; open-loop drift over 1 s {:.2e} m",
            r.samples, r.max_residual, drift
        ),
    ))
}

fn multi_systems(cfg: &RunConfig) -> Outcome {
    let point = multi::plan_multi_point(cfg)?.report;
    let mut ok = point.quadrotors == 2 && point.passed && point.samples == 100;
    let mut detail = format!("point p=2 residual {:.2e}", point.max_residual);
    for p in [3, 4] {
        let mut c = cfg.clone();
        c.multi_rigid.links = vec![5; p];
        c.multi_rigid.attachments.clear();
        c.multi_rigid.yaws.clear();
        if c.multi_rigid.lambda.len() != 3 * p - 6 {
            c.multi_rigid.lambda.clear();
        }
        let r = multi::plan_multi_rigid(&c)?.report;
        let wrench = r.max_wrench_residual.unwrap_or(f64::INFINITY);
        let sweep = r.kernel_invariance.unwrap_or(f64::INFINITY);
        ok &= r.passed && r.max_residual < 1e-6 && wrench < 1e-10 && sweep < 1e-10;
        detail += &format!(
            "; rigid p={p} residual {:.2e}, |Phi T - W| {:.2e}, kernel sweep {:.2e}",
            r.max_residual, wrench, sweep
        );
    }
    Ok((ok, detail))
}

fn linearization(cfg: &RunConfig) -> Outcome {
    let r = checks::lincheck(cfg)?;
    Ok((
        r.samples.len() == 20 && r.state_dim == 42 && r.max_rel < 1e-4,
        format!(
            "{} times, {}x{} A and {}x4 B, max relative block error {:.2e}",
            r.samples.len(),
            r.state_dim,
            r.state_dim,
            r.state_dim,
            r.max_rel
        ),
    ))
}

fn prediction(cfg: &RunConfig) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for t0 in [0.0, 7.3] {
        let r = checks::prediction_order(cfg, t0, 0.5, 1e-3)?;
        ok &= (3.0..=5.0).contains(&r.ratio);
        parts.push(format!(
            "t0 = {t0}: {:.3e} / {:.3e} = {:.3}",
            r.deviation, r.deviation_half, r.ratio
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn min_eigen(p: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(p.clone()).eigenvalues.min()
}

fn riccati(cfg: &RunConfig, table: &mut Option<GainTable>) -> Outcome {
    let mut scalar = FnLinear {
        states: 1,
        inputs: 1,
        f: |_t: f64| Ok((DMatrix::zeros(1, 1), DMatrix::identity(1, 1))),
    };
    let w = LqrWeights::new(
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        DMatrix::zeros(1, 1),
        2.0,
    )?;
    let st = riccati_backward(&mut scalar, &w, 0.01)?;
    let tanh_err = st
        .p()
        .iter()
        .enumerate()
        .map(|(k, p)| (p[(0, 0)] - (2.0 - st.time(k)).tanh()).abs())
        .fold(0.0, f64::max);

    let t = sim::compute_gains(cfg)?;
    let mut asym: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for p in t.p() {
        asym = asym.max((p - p.transpose()).norm() / p.norm());
        min_eig = min_eig.min(min_eigen(p));
    }
    let last = t.len() - 1;
    let n = t.state_dim();
    let terminal_exact = t.p()[last] == DMatrix::identity(n, n) * 0.01;
    let model = cfg.single_model()?;
    let dp_t = flat_single(&cfg.flat_outputs(), &model.quad, &model.cable, t.end())?;
    let b_t = build_lin_with(&dp_t, &model)?.b;
    let k_t = &t.k()[last];
    let k_err = (k_t - b_t.transpose() * 0.05).norm();
    let ok = tanh_err < 1e-8
        && n == 42
        && t.len() == 3001
        && asym < 1e-12
        && min_eig > -1e-8
        && terminal_exact
        && k_t.norm() <= 0.05 * b_t.norm() / 0.2
        && k_err < 1e-12;
    let detail = format!(
        "scalar error {tanh_err:.1e}; {} samples of {n}x{n} P, asymmetry {asym:.1e}, min eigenvalue {min_eig:.2e}, P(T) = 0.01 I {terminal_exact}, |K(T) - 0.05 B(T)^T| {k_err:.1e}",
        t.len()
    );
    *table = Some(t);
    Ok((ok, detail))
}

fn tracking(cfg: &RunConfig, table: Option<&GainTable>, records: &mut Vec<RunRecord>) -> Outcome {
    let owned;
    let table = match table {
        Some(t) => t,
        None => {
            owned = sim::compute_gains(cfg)?;
            &owned
        }
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for trial in &cfg.trials {
        let start = Instant::now();
        let rec = sim::simulate(cfg, trial, table)?;
        let secs = start.elapsed().as_secs_f64();
        let s = &rec.summary;
        ok &= s.passed && secs < 120.0;
        let fmt = |t: Option<f64>| t.map_or("never".into(), |t| format!("{t:.2}"));
        parts.push(if trial.is_exact_start() {
            format!("{} max error {:.1e} m ({secs:.1} s)", s.trial, s.max_load_error)
        } else {
            format!(
                "{} settled at {}/{}/{} s ({secs:.1} s)",
                s.trial,
                fmt(s.load_settled_at),
                fmt(s.psi_r_settled_at),
                fmt(s.psi_q_last_settled_at)
            )
        });
        records.push(rec);
    }
    Ok((ok, parts.join("; ")))
}

fn structure(cfg: &RunConfig, records: &[RunRecord]) -> Outcome {
    let worst = records
        .iter()
        .map(|r| r.summary.max_constraint_violation)
        .fold(0.0, f64::max);
    let full = records
        .iter()
        .all(|r| (r.rows.last().map_or(0.0, |row| row.t) - cfg.sim.horizon).abs() < 1e-9);
    let drift = checks::energy_drift(cfg, 5.0)?;
    Ok((
        !records.is_empty() && full && worst < 1e-9 && drift < 1e-5,
        format!(
            "{} runs, max constraint violation {worst:.1e}; zero-input energy drift over 5 s {drift:.1e}",
            records.len()
        ),
    ))
}

fn dof(cfg: &RunConfig) -> Outcome {
    let mut c = cfg.clone();
    c.cable.masses = vec![0.1; 5];
    c.cable.lengths = vec![0.25; 5];
    c.multi_point.links = vec![5; 4];
    c.multi_rigid.links = vec![5; 4];
    let d = checks::dof(&c);
    Ok((
        d.single == 16 && d.single_underactuation == 12 && d.multi_point == 55 && d.multi_rigid == 58,
        format!(
            "single {} (underactuation {}), point-mass p=4 {}, rigid p=4 {}",
            d.single, d.single_underactuation, d.multi_point, d.multi_rigid
        ),
    ))
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let mut report = Report { failures: 0 };
    let mut table = None;
    let mut records = Vec::new();

    report.run(1, "formulation equivalence", 5.0, || equivalence(&cfg));
    report.run(2, "flatness self-consistency", 30.0, || flatness(&cfg));
    report.run(3, "multi-system flatness", 30.0, || multi_systems(&cfg));
    report.run(4, "linearization oracle", 60.0, || linearization(&cfg));
    report.run(5, "linear prediction order", 60.0, || prediction(&cfg));
    report.run(6, "riccati correctness", 120.0, || riccati(&cfg, &mut table));
    report.run(7, "closed-loop tracking", 360.0, || {
        tracking(&cfg, table.as_ref(), &mut records)
    });
    report.run(8, "structure preservation", 60.0, || structure(&cfg, &records));
    report.run(9, "degrees of freedom", 1.0, || dof(&cfg));

    if report.failures == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 9 criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
