//! Closed library of smooth time signals with exact derivatives.
//!
//! Flat outputs must be differentiated up to fourteen times for a five-link
//! cable, so trajectories are restricted to an algebra of polynomials and
//! sinusoids whose jets are exact. Coefficients are stored as `f64` (they
//! come from configuration files) and converted at evaluation time.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{hat, RotMat};
use crate::jet::{Jet, Jet3, JetMat3};
use crate::scalar::{cast, Real};

/// Highest derivative order the library will produce.
pub const MAX_JET_ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Const { value: f64 },
    /// `Σ coeffs[k] t^k`
    Poly { coeffs: Vec<f64> },
    /// `amp sin(2π freq_hz t + phase)`
    Sin {
        amp: f64,
        freq_hz: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp cos(2π freq_hz t + phase)`
    Cos {
        amp: f64,
        freq_hz: f64,
        #[serde(default)]
        phase: f64,
    },
    Sum { terms: Vec<Signal> },
    Product { factors: Vec<Signal> },
    Scale { gain: f64, signal: Box<Signal> },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Const { value }
    }

    pub fn zero() -> Self {
        Signal::constant(0.0)
    }

    pub fn sin(amp: f64, freq_hz: f64) -> Self {
        Signal::Sin {
            amp,
            freq_hz,
            phase: 0.0,
        }
    }

    pub fn cos(amp: f64, freq_hz: f64) -> Self {
        Signal::Cos {
            amp,
            freq_hz,
            phase: 0.0,
        }
    }

    /// `a (1 − cos 2π f t)`
    pub fn one_minus_cos(a: f64, freq_hz: f64) -> Self {
        Signal::Sum {
            terms: vec![Signal::constant(a), Signal::cos(-a, freq_hz)],
        }
    }

    /// Exact jet of order `order` at time `t`.
    pub fn jet<T: Real>(&self, t: T, order: usize) -> Result<Jet<T>> {
        if order > MAX_JET_ORDER {
            return Err(Error::UnsupportedSignal(format!(
                "derivative order {order} exceeds the library limit {MAX_JET_ORDER}"
            )));
        }
        Ok(match self {
            Signal::Const { value } => Jet::constant(cast(*value), order),
            Signal::Poly { coeffs } => poly_jet(coeffs, t, order),
            Signal::Sin {
                amp,
                freq_hz,
                phase,
            } => sinusoid_jet(*amp, *freq_hz, *phase, t, order, false),
            Signal::Cos {
                amp,
                freq_hz,
                phase,
            } => sinusoid_jet(*amp, *freq_hz, *phase, t, order, true),
            Signal::Sum { terms } => {
                let mut acc = Jet::constant(T::zero(), order);
                for s in terms {
                    acc += &s.jet(t, order)?;
                }
                acc
            }
            Signal::Product { factors } => {
                let mut acc = Jet::constant(T::one(), order);
                for s in factors {
                    acc = &acc * &s.jet(t, order)?;
                }
                acc
            }
            Signal::Scale { gain, signal } => signal.jet(t, order)?.scale(cast(*gain)),
        })
    }

    pub fn value<T: Real>(&self, t: T) -> Result<T> {
        Ok(self.jet(t, 0)?.value())
    }
}

/// Exact jet evaluation; see [`Signal::jet`].
pub fn jet_eval<T: Real>(signal: &Signal, t: T, order: usize) -> Result<Jet<T>> {
    signal.jet(t, order)
}

fn poly_jet<T: Real>(coeffs: &[f64], t: T, order: usize) -> Jet<T> {
    // Taylor coefficients of p(t + τ) in τ: Σ_j C(j,k) c_j t^{j-k}
    let n = coeffs.len();
    let mut taylor = vec![T::zero(); order + 1];
    for (k, slot) in taylor.iter_mut().enumerate() {
        let mut acc = T::zero();
        for j in (k..n).rev() {
            acc = acc * t + cast::<T>(coeffs[j] * binomial(j, k));
        }
        *slot = acc;
    }
    Jet::from_taylor(taylor)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sinusoid_jet<T: Real>(amp: f64, freq_hz: f64, phase: f64, t: T, order: usize, cosine: bool) -> Jet<T> {
    let w = cast::<T>(2.0 * PI * freq_hz);
    let arg = w * t + cast::<T>(phase);
    let (s, c) = (arg.sin(), arg.cos());
    // d^k/dt^k sin(w t + φ) cycles through sin, cos, −sin, −cos scaled by w^k
    let cycle = if cosine { [c, -s, -c, s] } else { [s, c, -s, -c] };
    let mut derivs = Vec::with_capacity(order + 1);
    let mut wk = cast::<T>(amp);
    for k in 0..=order {
        derivs.push(cycle[k % 4] * wk);
        wk *= w;
    }
    Jet::from_derivatives(&derivs)
}

/// Three independent scalar signals forming an R³ trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal3 {
    pub x: Signal,
    pub y: Signal,
    pub z: Signal,
}

impl Signal3 {
    pub fn new(x: Signal, y: Signal, z: Signal) -> Self {
        Self { x, y, z }
    }

    pub fn constant(v: [f64; 3]) -> Self {
        Self::new(
            Signal::constant(v[0]),
            Signal::constant(v[1]),
            Signal::constant(v[2]),
        )
    }

    pub fn jet<T: Real>(&self, t: T, order: usize) -> Result<Jet3<T>> {
        Ok(Jet3::new(
            self.x.jet(t, order)?,
            self.y.jet(t, order)?,
            self.z.jet(t, order)?,
        ))
    }

    pub fn value<T: Real>(&self, t: T) -> Result<Vector3<T>> {
        Ok(self.jet(t, 0)?.value())
    }
}

/// Rotation-valued signal `R(t) = R₀ exp(θ(t) â)` about a fixed body axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationSignal {
    /// `R₀`, row-major; identity when omitted.
    #[serde(default = "identity_row_major")]
    pub base: [f64; 9],
    pub axis: [f64; 3],
    pub angle: Signal,
}

fn identity_row_major() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

/// Rotation jets plus the body angular velocity and acceleration they imply.
#[derive(Debug, Clone)]
pub struct RotationJet<T: Real = f64> {
    pub rot: JetMat3<T>,
    /// Body-frame angular velocity jet, `θ̇ â`.
    pub omega: Jet3<T>,
}

impl RotationSignal {
    pub fn fixed(base: Matrix3<f64>) -> Self {
        let b = RotMat::try_new(base).expect("fixed rotation must be orthonormal");
        Self {
            base: b.to_row_major(),
            axis: [0.0, 0.0, 1.0],
            angle: Signal::zero(),
        }
    }

    pub fn identity() -> Self {
        Self::fixed(Matrix3::identity())
    }

    fn base_matrix<T: Real>(&self) -> Matrix3<T> {
        Matrix3::from_fn(|i, j| cast(self.base[3 * i + j]))
    }

    fn unit_axis<T: Real>(&self) -> Result<Vector3<T>> {
        let a = Vector3::new(cast::<T>(self.axis[0]), cast(self.axis[1]), cast(self.axis[2]));
        let n = a.norm();
        if n <= T::default_epsilon() {
            return Err(Error::UnsupportedSignal("rotation axis is zero".into()));
        }
        Ok(a / n)
    }

    pub fn jet<T: Real>(&self, t: T, order: usize) -> Result<RotationJet<T>> {
        let theta = self.angle.jet(t, order)?;
        let axis = self.unit_axis::<T>()?;
        let (s, c) = theta.sin_cos();
        let k = hat(&axis);
        let k2 = k * k;
        let base = self.base_matrix::<T>();
        // exp(θ K) = I + sin θ K + (1 − cos θ) K²
        let one_minus_c = (-&c).add_const(T::one());
        let entry = |i: usize, j: usize| {
            let id = if i == j { T::one() } else { T::zero() };
            &s.scale(k[(i, j)]) + &one_minus_c.scale(k2[(i, j)]).add_const(id)
        };
        let e: Vec<Jet<T>> = (0..9).map(|n| entry(n / 3, n % 3)).collect();
        let col = |j: usize| {
            let raw = Jet3::new(e[j].clone(), e[3 + j].clone(), e[6 + j].clone());
            raw.transform(&base)
        };
        let rot = JetMat3::from_columns(col(0), col(1), col(2));
        let theta_dot = theta.diff();
        let omega = Jet3::new(
            theta_dot.scale(axis.x),
            theta_dot.scale(axis.y),
            theta_dot.scale(axis.z),
        );
        Ok(RotationJet { rot, omega })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_minus_cos_at_origin() {
        let s = Signal::one_minus_cos(2.0, 0.25);
        let j = s.jet(0.0f64, 4).unwrap();
        assert_eq!(j.derivative(0), 0.0);
        assert_eq!(j.derivative(1), 0.0);
        assert_relative_eq!(j.derivative(2), 2.0 * (PI / 2.0).powi(2), epsilon = 1e-14);
        assert_relative_eq!(j.derivative(2), 4.934_802_200_544_679, epsilon = 1e-12);
    }

    #[test]
    fn constant_has_no_motion() {
        let j = Signal::constant(3.5).jet(1.7f64, 6).unwrap();
        assert_eq!(j.derivatives(), vec![3.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn polynomial_derivatives() {
        // p = 1 + 2t − t³ ; p' = 2 − 3t² ; p'' = −6t ; p''' = −6
        let p = Signal::Poly {
            coeffs: vec![1.0, 2.0, 0.0, -1.0],
        };
        let j = p.jet(2.0f64, 5).unwrap();
        let d = j.derivatives();
        assert_relative_eq!(d[0], -3.0);
        assert_relative_eq!(d[1], -10.0);
        assert_relative_eq!(d[2], -12.0);
        assert_relative_eq!(d[3], -6.0);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn order_limit_is_enforced() {
        let e = Signal::zero().jet(0.0f64, MAX_JET_ORDER + 1).unwrap_err();
        assert!(matches!(e, Error::UnsupportedSignal(_)));
    }

    #[test]
    fn rotation_signal_matches_rodrigues() {
        let r = RotationSignal {
            base: identity_row_major(),
            axis: [0.0, 0.0, 2.0],
            angle: Signal::Poly {
                coeffs: vec![0.1, 0.5],
            },
        };
        let j = r.jet(1.0f64, 2).unwrap();
        let expect = RotMat::about(&Vector3::z(), 0.6);
        assert_relative_eq!(j.rot.derivative(0), *expect.as_mat(), epsilon = 1e-14);
        // Ṙ = R Ω̂ with Ω = θ̇ ẑ
        let rdot = j.rot.derivative(1);
        let omega = j.omega.value();
        assert_relative_eq!(rdot, expect.as_mat() * hat(&omega), epsilon = 1e-14);
        assert_relative_eq!(omega, Vector3::new(0.0, 0.0, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn config_roundtrip() {
        let s = Signal::Sum {
            terms: vec![
                Signal::one_minus_cos(2.0, 0.25),
                Signal::Scale {
                    gain: 0.5,
                    signal: Box::new(Signal::Product {
                        factors: vec![Signal::sin(1.0, 0.1), Signal::Poly { coeffs: vec![0.0, 1.0] }],
                    }),
                },
            ],
        };
        let text = serde_json::to_string(&s).unwrap();
        let back: Signal = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
