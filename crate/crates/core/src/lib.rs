//! Computational toolkit for Weil bundles.
//!
//! Finite Weil algebras, infinitely near points on chart-described manifolds,
//! weighted metrics on the bundle `M^A`, lifting of paths and maps, fixed
//! points of lifted diffeomorphisms and a small real-coefficient simplicial
//! cohomology engine.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod apoint;
pub mod atlas;
pub mod dynamics;
pub mod error;
pub mod lifting;
pub mod smooth_expr;
pub mod topology;
pub mod weighted_metric;
pub mod weil_algebra;

pub use apoint::{APoint, RealCoords};
pub use atlas::{BasePoint, Manifold};
pub use error::{Error, Result};
pub use smooth_expr::{Expr, Primitive};
pub use weighted_metric::{BundleMetric, MetricConfig};
pub use weil_algebra::{AlgebraElement, Monomial, WeilAlgebra};
