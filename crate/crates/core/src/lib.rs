//! Schur parametrization of correlation matrices, the rotation matrices that
//! dilate them, and elastic shape analysis of the resulting curves on `SO(n)`.
//!
//! - [`corr`]: correlation matrices, estimation and synthetic processes.
//! - [`dilation`]: Schur parameters, Givens products, Naimark and Levinson.
//! - [`liegroup`]: `exp`, `log` and the metric on `SO(n)`.
//! - [`curves`]: discrete curves, spline resampling, velocities.
//! - [`shape`]: square-root velocities, curve and shape distances, means.
//! - [`io`]: file formats.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corr;
pub mod curves;
pub mod dilation;
pub mod error;
pub mod io;
pub mod liegroup;
pub mod shape;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/parameters.md")]
    mod parameters {}
    #[doc = include_str!("../../../book/src/dilation.md")]
    mod dilation {}
    #[doc = include_str!("../../../book/src/rotation-group.md")]
    mod rotation_group {}
    #[doc = include_str!("../../../book/src/curves.md")]
    mod curves {}
    #[doc = include_str!("../../../book/src/shapes.md")]
    mod shapes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
