use flexcable::dynamics::SingleModel;
use flexcable::flatness::{flat_single, FlatOutputsSingle};
use flexcable::geom::vee_skew;
use flexcable::jet::Jet;
use nalgebra::Vector3;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// k-th derivative of sin at t.
fn dsin(k: usize, t: f64) -> f64 {
    match k % 4 {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    }
}

/// j-th derivative of t³.
fn dcube(j: usize, t: f64) -> f64 {
    match j {
        0 => t.powi(3),
        1 => 3.0 * t * t,
        2 => 6.0 * t,
        3 => 6.0,
        _ => 0.0,
    }
}

#[test]
fn product_rule_oracle() {
    let t = 0.7;
    let tau = Jet::time(t, 10);
    let jet = &tau.sin() * &(&(&tau * &tau) * &tau);
    for k in 0..=10 {
        let leibniz: f64 = (0..=k.min(3))
            .map(|j| binom(k, j) * dcube(j, t) * dsin(k - j, t))
            .sum();
        let got = jet.derivative(k);
        assert!(
            (got - leibniz).abs() < 1e-12 * (1.0 + leibniz.abs()),
            "order {k}: {got} vs {leibniz}"
        );
    }
}

const FORNBERG8: [f64; 9] = [
    1.0 / 280.0,
    -4.0 / 105.0,
    1.0 / 5.0,
    -4.0 / 5.0,
    0.0,
    4.0 / 5.0,
    -1.0 / 5.0,
    4.0 / 105.0,
    -1.0 / 280.0,
];

fn fd<T, F>(f: F, t: f64, h: f64) -> T
where
    F: Fn(f64) -> T,
    T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let mut acc: Option<T> = None;
    for (i, w) in FORNBERG8.iter().enumerate() {
        let term = f(t + (i as f64 - 4.0) * h) * (w / h);
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.unwrap()
}

#[test]
fn flat_reference_is_kinematically_consistent() {
    let model = SingleModel::reference();
    let fo = FlatOutputsSingle::reference();
    let dp = |t: f64| flat_single(&fo, &model.quad, &model.cable, t).unwrap();
    let h = 5e-3;
    let close = |a: Vector3<f64>, b: Vector3<f64>, what: &str| {
        let err = (a - b).norm();
        assert!(err < 1e-6 * (1.0 + b.norm()), "{what}: {a} vs {b} ({err:e})");
    };
    for t in [0.0, 1.3, 4.7, 11.2] {
        let d = dp(t);
        close(fd(|s| dp(s).x0, t, h), d.v0, "ẋ0");
        close(fd(|s| dp(s).v0, t, h), d.a0, "v̇0");
        close(fd(|s| dp(s).omega, t, h), d.omega_dot, "Ω̇");
        let rdot = fd(|s| dp(s).rot.into_inner(), t, h);
        close(vee_skew(&(d.rot.transpose().into_inner() * rdot)), d.omega, "Ω");
        for i in 0..d.links() {
            let qdot = fd(|s| dp(s).q[i].into_inner(), t, h);
            close(d.q[i].cross(&qdot), d.w[i], "ω");
            close(fd(|s| dp(s).w[i], t, h), d.w_dot[i], "ω̇");
        }
        let n = d.links();
        close(fd(|s| dp(s).positions[n - 1], t, h), d.velocities[n - 1], "load velocity");
    }
}
