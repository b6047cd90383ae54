// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hybrid;
pub mod linalg;
pub mod position;
pub mod qp;
pub mod rates;
pub mod scene;
pub mod solver;
pub mod wmmse;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/secrecy.md")]
    mod secrecy {}
    #[doc = include_str!("../../../book/src/hybrid.md")]
    mod hybrid {}
    #[doc = include_str!("../../../book/src/positions.md")]
    mod positions {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
