//! The compact mass-matrix model against the tension (Newton–Euler) form.

use flexcable::dynamics::{CableParams, ControlInput, QuadParams, SingleModel, SingleSystemState};
use flexcable::geom::{RotMat, UnitVec};
use nalgebra::Vector3;
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn direction() -> impl Strategy<Value = UnitVec<f64>> {
    vec3(1.0)
        .prop_filter("nonzero", |v| v.norm() > 0.1)
        .prop_map(UnitVec::new_normalize)
}

fn state(n: usize) -> impl Strategy<Value = SingleSystemState<f64>> {
    (
        vec3(2.0),
        vec3(2.0),
        vec3(3.0),
        vec3(3.0),
        proptest::collection::vec((direction(), vec3(4.0)), n),
    )
        .prop_map(|(x0, v0, rv, omega, links)| {
            let (q, w): (Vec<_>, Vec<_>) = links
                .into_iter()
                .map(|(q, w)| {
                    let w = q.project_tangent(&w);
                    (q, w)
                })
                .unzip();
            SingleSystemState {
                x0,
                v0,
                rot: RotMat::exp(&rv),
                omega,
                q,
                w,
            }
        })
}

fn input() -> impl Strategy<Value = ControlInput<f64>> {
    (0.0..30.0, vec3(0.05)).prop_map(|(f, m)| ControlInput::new(f, m))
}

fn model(n: usize) -> SingleModel {
    let masses = (0..n).map(|i| 0.05 + 0.03 * i as f64).collect();
    let lengths = (0..n).map(|i| 0.2 + 0.05 * i as f64).collect();
    SingleModel::new(
        QuadParams::reference(),
        CableParams::new(masses, lengths).unwrap(),
    )
}

fn check(n: usize, s: &SingleSystemState<f64>, u: &ControlInput<f64>) -> Result<(), TestCaseError> {
    let m = model(n);
    let acc = m.accel(s, u).unwrap();
    let res = m.newton_euler_residual(s, u, &acc);
    prop_assert!(res.max() < 1e-8, "n = {n}: {res:?}");
    for (q, wd) in s.q.iter().zip(&acc.w_dot) {
        prop_assert!(q.dot(wd).abs() < 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn one_link(s in state(1), u in input()) {
        check(1, &s, &u)?;
    }

    #[test]
    fn two_links(s in state(2), u in input()) {
        check(2, &s, &u)?;
    }

    #[test]
    fn five_links(s in state(5), u in input()) {
        check(5, &s, &u)?;
    }
}
