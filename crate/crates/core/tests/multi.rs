use flexcable::dynamics::multi::{
    residual_multi_point, residual_multi_rigid, CableUnit, MultiPointParams, RigidLoadParams,
};
use flexcable::dynamics::{CableParams, QuadParams};
use flexcable::flatness::multi::{
    flat_multi_point, flat_multi_rigid_with_map, FlatOutputsMultiPoint, FlatOutputsRigid,
    TensionMap,
};
use flexcable::signal::{RotationSignal, Signal, Signal3};
use nalgebra::{DVector, Matrix3, Vector3};

fn unit(n: usize) -> CableUnit {
    CableUnit::new(
        QuadParams::reference(),
        CableParams::uniform(n, 0.1, 0.25).unwrap(),
    )
}

fn ring(p: usize, radius: f64) -> Vec<Vector3<f64>> {
    (0..p)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
            Vector3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
        .collect()
}

fn slow_orbit() -> Signal3 {
    Signal3::new(
        Signal::one_minus_cos(0.6, 0.1),
        Signal::sin(0.5, 0.08),
        Signal::cos(0.3, 0.05),
    )
}

#[test]
fn two_quadrotors_share_a_point_load() {
    let params = MultiPointParams::new(vec![unit(3), unit(4)], 0.5).unwrap();
    let fo = FlatOutputsMultiPoint {
        load: slow_orbit(),
        tensions: vec![Signal3::new(
            Signal::Sum {
                terms: vec![Signal::constant(1.0), Signal::sin(0.2, 0.1)],
            },
            Signal::constant(0.2),
            Signal::constant(-0.25 * 9.81),
        )],
        yaws: vec![Signal::zero(), Signal::sin(0.3, 0.05)],
    };
    for k in 0..100 {
        let t = 0.2 * k as f64;
        let r = flat_multi_point(&fo, &params, t).unwrap();
        let res = residual_multi_point(&r.snapshot(), &params).unwrap();
        assert!(res.max() < 1e-6, "t = {t}: {res:?}");
        assert!(res.warnings.is_empty());
    }
}

fn rigid(p: usize) -> RigidLoadParams {
    RigidLoadParams::new(
        vec![unit(3); p],
        0.6,
        Matrix3::from_diagonal(&Vector3::new(0.02, 0.02, 0.035)),
        ring(p, 0.3),
    )
    .unwrap()
}

fn rigid_outputs(p: usize, lambda: Vec<Signal>) -> FlatOutputsRigid {
    FlatOutputsRigid {
        load: slow_orbit(),
        attitude: RotationSignal {
            base: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            axis: [0.0, 0.0, 1.0],
            angle: Signal::sin(0.4, 0.05),
        },
        lambda,
        yaws: vec![Signal::zero(); p],
    }
}

#[test]
fn rigid_load_residuals_vanish() {
    for p in [3, 4] {
        let params = rigid(p);
        let map = TensionMap::new(&params.attachments).unwrap();
        let fo = rigid_outputs(p, vec![]);
        for k in 0..100 {
            let t = 0.2 * k as f64;
            let r = flat_multi_rigid_with_map(&fo, &params, &map, t).unwrap();
            assert!(r.distribution.residual() < 1e-10);
            let res = residual_multi_rigid(&r.snapshot(), &params).unwrap();
            assert!(res.max() < 1e-6, "p = {p}, t = {t}: {res:?}");
        }
    }
}

#[test]
fn kernel_sweep_leaves_wrench_fixed() {
    let params = rigid(4);
    let map = TensionMap::new(&params.attachments).unwrap();
    let base = flat_multi_rigid_with_map(&rigid_outputs(4, vec![]), &params, &map, 3.0).unwrap();
    for s in [-0.3, 0.1, 0.5] {
        let lambda = (0..map.kernel_dim())
            .map(|k| Signal::constant(s * (k as f64 - 2.0)))
            .collect();
        let r = flat_multi_rigid_with_map(&rigid_outputs(4, lambda), &params, &map, 3.0).unwrap();
        let phi_t = &map.phi * &r.distribution.tensions;
        let w = DVector::from_column_slice(base.distribution.wrench.as_slice());
        assert!((phi_t - w).norm() < 1e-10);
        let res = residual_multi_rigid(&r.snapshot(), &params).unwrap();
        assert!(res.max() < 1e-6, "{res:?}");
    }
}
