//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] carries a signal's value and its first `K` time derivatives at a
//! fixed instant. Internally the normalized Taylor coefficients
//! `f⁽ᵏ⁾(t)/k!` are stored, which keeps the product and composition
//! recurrences free of binomial factors. Binary operations truncate to the
//! lower of the two operand orders, and [`Jet::diff`] drops one order, so a
//! computation that differentiates more often than its inputs allow ends
//! with a visibly short jet rather than silently wrong numbers.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T: Real = f64> {
    coeffs: Vec<T>,
}

fn factorial<T: Real>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, i| acc * from_usize::<T>(i))
}

impl<T: Real> Jet<T> {
    /// Constant signal, all derivatives zero.
    pub fn constant(value: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The identity signal `τ ↦ τ` expanded at `t`.
    pub fn time(t: T, order: usize) -> Self {
        let mut j = Self::constant(t, order);
        if order >= 1 {
            j.coeffs[1] = T::one();
        }
        j
    }

    /// Builds a jet from derivative values `[f, f', f'', ...]`.
    pub fn from_derivatives(derivs: &[T]) -> Self {
        assert!(!derivs.is_empty(), "jet needs at least a value");
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, &d)| d / factorial::<T>(k))
            .collect();
        Self { coeffs }
    }

    pub fn from_taylor(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "jet needs at least a value");
        Self { coeffs }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn taylor(&self) -> &[T] {
        &self.coeffs
    }

    /// k-th time derivative. Panics when `k > order()`.
    pub fn derivative(&self, k: usize) -> T {
        self.coeffs[k] * factorial::<T>(k)
    }

    pub fn derivatives(&self) -> Vec<T> {
        (0..self.coeffs.len()).map(|k| self.derivative(k)).collect()
    }

    /// Time derivative; the result has one order less.
    pub fn diff(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::constant(T::zero(), 0);
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(k, &c)| c * from_usize::<T>(k + 1))
            .collect();
        Self { coeffs }
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = (order + 1).min(self.coeffs.len());
        Self {
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add_const(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn recip(&self) -> Self {
        Self::constant(T::one(), self.order()) / self
    }

    pub fn sqrt(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut s = vec![T::zero(); n];
        s[0] = a[0].sqrt();
        let two_s0 = s[0] + s[0];
        for k in 1..n {
            let mut acc = a[k];
            for i in 1..k {
                acc -= s[i] * s[k - i];
            }
            s[k] = acc / two_s0;
        }
        Self { coeffs: s }
    }

    /// `(sin u, cos u)` for the signal `u` carried by this jet.
    pub fn sin_cos(&self) -> (Self, Self) {
        let u = &self.coeffs;
        let n = u.len();
        let mut s = vec![T::zero(); n];
        let mut c = vec![T::zero(); n];
        s[0] = u[0].sin();
        c[0] = u[0].cos();
        for k in 1..n {
            let mut ds = T::zero();
            let mut dc = T::zero();
            for j in 1..=k {
                let ju = from_usize::<T>(j) * u[j];
                ds += ju * c[k - j];
                dc -= ju * s[k - j];
            }
            let kk = from_usize::<T>(k);
            s[k] = ds / kk;
            c[k] = dc / kk;
        }
        (Self { coeffs: s }, Self { coeffs: c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        Self {
            coeffs: (0..n).map(|k| f(self.coeffs[k], other.coeffs[k])).collect(),
        }
    }
}

impl<T: Real> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let a = &self.coeffs;
        let b = &rhs.coeffs;
        let coeffs = (0..n)
            .map(|k| (0..=k).fold(T::zero(), |acc, i| acc + a[i] * b[k - i]))
            .collect();
        Jet { coeffs }
    }
}

impl<T: Real> Div for &Jet<T> {
    type Output = Jet<T>;
    fn div(self, rhs: &Jet<T>) -> Jet<T> {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let a = &self.coeffs;
        let b = &rhs.coeffs;
        let mut q = vec![T::zero(); n];
        for k in 0..n {
            let mut acc = a[k];
            for i in 1..=k {
                acc -= b[i] * q[k - i];
            }
            q[k] = acc / b[0];
        }
        Jet { coeffs: q }
    }
}

impl<T: Real> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<T: Real> $tr for Jet<T> {
            type Output = Jet<T>;
            fn $m(self, rhs: Jet<T>) -> Jet<T> {
                (&self).$m(&rhs)
            }
        }
        impl<T: Real> $tr<&Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $m(self, rhs: &Jet<T>) -> Jet<T> {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl<T: Real> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        -&self
    }
}

impl<T: Real> AddAssign<&Jet<T>> for Jet<T> {
    fn add_assign(&mut self, rhs: &Jet<T>) {
        *self = &*self + rhs;
    }
}

/// Jet of an R³-valued signal, one scalar jet per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet3<T: Real = f64> {
    pub x: Jet<T>,
    pub y: Jet<T>,
    pub z: Jet<T>,
}

impl<T: Real> Jet3<T> {
    pub fn new(x: Jet<T>, y: Jet<T>, z: Jet<T>) -> Self {
        Self { x, y, z }
    }

    pub fn constant(v: &Vector3<T>, order: usize) -> Self {
        Self::new(
            Jet::constant(v.x, order),
            Jet::constant(v.y, order),
            Jet::constant(v.z, order),
        )
    }

    pub fn order(&self) -> usize {
        self.x.order().min(self.y.order()).min(self.z.order())
    }

    pub fn value(&self) -> Vector3<T> {
        Vector3::new(self.x.value(), self.y.value(), self.z.value())
    }

    pub fn derivative(&self, k: usize) -> Vector3<T> {
        Vector3::new(
            self.x.derivative(k),
            self.y.derivative(k),
            self.z.derivative(k),
        )
    }

    pub fn diff(&self) -> Self {
        Self::new(self.x.diff(), self.y.diff(), self.z.diff())
    }

    fn map(&self, f: impl Fn(&Jet<T>) -> Jet<T>) -> Self {
        Self::new(f(&self.x), f(&self.y), f(&self.z))
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|j| j.scale(s))
    }

    /// Componentwise product with a scalar signal.
    pub fn mul_scalar(&self, s: &Jet<T>) -> Self {
        self.map(|j| j * s)
    }

    pub fn div_scalar(&self, s: &Jet<T>) -> Self {
        let inv = s.recip();
        self.mul_scalar(&inv)
    }

    pub fn add_const(&self, v: &Vector3<T>) -> Self {
        Self::new(self.x.add_const(v.x), self.y.add_const(v.y), self.z.add_const(v.z))
    }

    pub fn dot(&self, o: &Self) -> Jet<T> {
        &(&(&self.x * &o.x) + &(&self.y * &o.y)) + &(&self.z * &o.z)
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            &(&self.y * &o.z) - &(&self.z * &o.y),
            &(&self.z * &o.x) - &(&self.x * &o.z),
            &(&self.x * &o.y) - &(&self.y * &o.x),
        )
    }

    pub fn norm(&self) -> Jet<T> {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Self {
        self.div_scalar(&self.norm())
    }

    /// Product with a constant matrix.
    pub fn transform(&self, m: &Matrix3<T>) -> Self {
        let row = |i: usize| {
            &(&self.x.scale(m[(i, 0)]) + &self.y.scale(m[(i, 1)])) + &self.z.scale(m[(i, 2)])
        };
        Self::new(row(0), row(1), row(2))
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map(|j| j.truncate(order))
    }

    pub fn components(&self) -> [&Jet<T>; 3] {
        [&self.x, &self.y, &self.z]
    }
}

impl<T: Real> Add for &Jet3<T> {
    type Output = Jet3<T>;
    fn add(self, o: &Jet3<T>) -> Jet3<T> {
        Jet3::new(&self.x + &o.x, &self.y + &o.y, &self.z + &o.z)
    }
}

impl<T: Real> Sub for &Jet3<T> {
    type Output = Jet3<T>;
    fn sub(self, o: &Jet3<T>) -> Jet3<T> {
        Jet3::new(&self.x - &o.x, &self.y - &o.y, &self.z - &o.z)
    }
}

impl<T: Real> Neg for &Jet3<T> {
    type Output = Jet3<T>;
    fn neg(self) -> Jet3<T> {
        self.scale(-T::one())
    }
}

impl<T: Real> Add for Jet3<T> {
    type Output = Jet3<T>;
    fn add(self, o: Jet3<T>) -> Jet3<T> {
        &self + &o
    }
}

impl<T: Real> Sub for Jet3<T> {
    type Output = Jet3<T>;
    fn sub(self, o: Jet3<T>) -> Jet3<T> {
        &self - &o
    }
}

/// Jet of a 3×3 matrix-valued signal, stored by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct JetMat3<T: Real = f64> {
    pub cols: [Jet3<T>; 3],
}

impl<T: Real> JetMat3<T> {
    pub fn from_columns(c0: Jet3<T>, c1: Jet3<T>, c2: Jet3<T>) -> Self {
        Self { cols: [c0, c1, c2] }
    }

    pub fn order(&self) -> usize {
        self.cols.iter().map(Jet3::order).min().unwrap_or(0)
    }

    pub fn derivative(&self, k: usize) -> Matrix3<T> {
        let c: Vec<Vector3<T>> = self.cols.iter().map(|c| c.derivative(k)).collect();
        Matrix3::from_columns(&c)
    }

    /// `M(t) v(t)`.
    pub fn mul_vec(&self, v: &Jet3<T>) -> Jet3<T> {
        let a = self.cols[0].mul_scalar(&v.x);
        let b = self.cols[1].mul_scalar(&v.y);
        let c = self.cols[2].mul_scalar(&v.z);
        &(&a + &b) + &c
    }

    /// `M(t)ᵀ v(t)`.
    pub fn tr_mul_vec(&self, v: &Jet3<T>) -> Jet3<T> {
        Jet3::new(self.cols[0].dot(v), self.cols[1].dot(v), self.cols[2].dot(v))
    }

    /// `M(t) c` for a constant vector `c`.
    pub fn mul_const(&self, c: &Vector3<T>) -> Jet3<T> {
        let a = self.cols[0].scale(c.x);
        let b = self.cols[1].scale(c.y);
        let d = self.cols[2].scale(c.z);
        &(&a + &b) + &d
    }
}

/// Fails with [`Error::InsufficientOrder`] when `available < required`.
pub fn require_order(available: usize, required: usize, context: &'static str) -> Result<()> {
    if available < required {
        Err(Error::InsufficientOrder {
            required,
            available,
            context,
        })
    } else {
        Ok(())
    }
}

/// `k!` as a scalar; exposed for oracles that compare against Taylor data.
pub fn factorial_of<T: Real>(k: usize) -> T {
    factorial(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn time_jet_derivatives() {
        let t = Jet::time(2.0, 4);
        assert_eq!(t.derivatives(), vec![2.0, 1.0, 0.0, 0.0, 0.0]);
        let t2 = &t * &t;
        assert_eq!(t2.derivatives(), vec![4.0, 4.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn quotient_matches_geometric_series() {
        // 1/(1 - τ) about τ = 0 has all Taylor coefficients equal to one
        let one = Jet::constant(1.0, 6);
        let q = &one / &(&one - &Jet::time(0.0, 6));
        for &c in q.taylor() {
            assert_relative_eq!(c, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let u = Jet::from_derivatives(&[4.0, 1.0, -0.5, 2.0, 0.3]);
        let s = u.sqrt();
        let back = &s * &s;
        for (a, b) in back.taylor().iter().zip(u.taylor()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn sin_cos_of_time() {
        let (s, c) = Jet::time(0.0, 5).sin_cos();
        assert_eq!(s.derivatives(), vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(c.derivatives(), vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn diff_drops_one_order() {
        let u = Jet::from_derivatives(&[1.0, 2.0, 3.0, 4.0]);
        let d = u.diff();
        assert_eq!(d.order(), 2);
        assert_eq!(d.derivatives(), vec![2.0, 3.0, 4.0]);
        assert_eq!(d.diff().diff().diff().order(), 0);
    }

    #[test]
    fn mixed_orders_truncate() {
        let a = Jet::constant(1.0, 5);
        let b = Jet::constant(2.0, 2);
        assert_eq!((&a + &b).order(), 2);
        assert_eq!((&a * &b).order(), 2);
    }

    #[test]
    fn vector_normalize_is_unit_to_all_orders() {
        let t = Jet::time(0.3f64, 6);
        let (s, c) = t.sin_cos();
        let v = Jet3::new(&s + &Jet::constant(2.0, 6), &c * &t, Jet::constant(-1.0, 6));
        let u = v.normalize();
        let n2 = u.dot(&u);
        assert_relative_eq!(n2.value(), 1.0, epsilon = 1e-14);
        for k in 1..=6 {
            assert!(n2.derivative(k).abs() < 1e-11, "order {k}: {}", n2.derivative(k));
        }
    }

    #[test]
    fn cross_is_antisymmetric() {
        let t = Jet::time(0.7, 3);
        let a = Jet3::new(t.clone(), t.sin(), Jet::constant(1.0, 3));
        let b = Jet3::new(t.cos(), &t * &t, t.clone());
        let s = &a.cross(&b) + &b.cross(&a);
        for k in 0..=3 {
            assert!(s.derivative(k).norm() < 1e-14);
        }
    }

    #[test]
    fn require_order_reports_shortfall() {
        assert!(require_order(3, 2, "test").is_ok());
        assert_eq!(
            require_order(1, 2, "test"),
            Err(Error::InsufficientOrder {
                required: 2,
                available: 1,
                context: "test"
            })
        );
    }

    #[test]
    fn single_precision_jets() {
        let (s, _) = Jet::<f32>::time(0.0, 3).sin_cos();
        assert!((s.derivative(3) + 1.0).abs() < 1e-6);
    }
}
