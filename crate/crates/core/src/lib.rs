//! Multifrequency electrical impedance tomography in two dimensions.
//!
//! The crate simulates boundary voltages for a frequency-dependent
//! conductivity anomaly and inverts them in two stages: first the
//! frequency-independent perfect-conductor trace and the conductivity profile
//! are separated from multifrequency data, then the anomaly shape is
//! recovered from that trace by Fourier-parameterized shape descent.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod forward;
pub mod layer_potentials;
pub mod periodic;
pub mod pipeline;
pub mod separation;
pub mod shape;
pub mod spectrum;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{Curve, CurveSource, EllipseDomain, Point2, StarShape};
