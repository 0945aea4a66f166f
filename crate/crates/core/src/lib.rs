//! Quadrotors carrying loads on flexible cables.
//!
//! The cable is modelled as a chain of rigid links with point masses at the
//! joints. This crate provides the Newton–Euler dynamics on
//! SO(3) × R³ × (S²)ⁿ, differential-flatness maps that turn a load trajectory
//! into full reference states and feedforward inputs, a geometric
//! linearization about that reference, and a finite-horizon LQR tracker.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the higher layers use.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod flatness;
pub mod geom;
pub mod jet;
pub mod linearize;
pub mod scalar;
pub mod signal;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec3f = nalgebra::Vector3<f32>;
pub type Mat3f = nalgebra::Matrix3<f32>;

pub type UnitVec = geom::UnitVec<f64>;
pub type RotMat = geom::RotMat<f64>;
pub type SingleSystemState = dynamics::SingleSystemState<f64>;
pub type ControlInput = dynamics::ControlInput<f64>;
pub type SingleModel = dynamics::SingleModel<f64>;
pub type DesiredPoint = flatness::DesiredPoint<f64>;
pub type LinearizedSystem = linearize::LinearizedSystem<f64>;
pub type GainTable = control::GainTable<f64>;
pub type LqrWeights = control::LqrWeights<f64>;


