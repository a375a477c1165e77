#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod dist;
mod double_double;
pub mod error;
pub mod frac_ops;
pub mod sample;
pub mod scalar;
pub mod special_fn;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{DoubleDouble, Real};

pub type MassVector32 = frac_ops::MassVector<f32>;
pub type MassVector64 = frac_ops::MassVector<f64>;
pub type MassVectorDd = frac_ops::MassVector<DoubleDouble>;
pub type EvalResult64 = special_fn::EvalResult<f64>;
pub type EvalResultDd = special_fn::EvalResult<DoubleDouble>;
