//! Topological event rates of isotropic, stationary Gaussian random
//! wavefields `ψ = f + i g`.
//!
//! Closed forms for the rate of vortex-pair events in two dimensions and of
//! vortex reconnections, loop births and loop deaths in three dimensions,
//! together with three independent checks: quadrature of the intermediate
//! integrals, Monte-Carlo evaluation of the starting averages, and direct
//! event counting in synthesized plane-wave fields.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod error;
pub mod field;
pub mod gaussian_model;
pub mod linalg;
pub mod mc;
pub mod quadrature;
pub mod rates;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
pub use gaussian_model::{build_2d, build_3d, CorrelationModel2D, CorrelationModel3D};

pub use rates::{rate_2d, rates_3d, EventRates, Method};
pub use spectra::{moments, Dimension, SpectralMoments, Spectrum, SpectrumKind};
