//! Simulation and analysis toolkit for coupled cavity-waveguide-cavity
//! photonic networks with an embedded two-level emitter.
//!
//! The crate models a source cavity coupled through a terminated waveguide
//! to a target cavity. It covers:
//!
//! * [`dynamics`] — coupled-mode equations of the three-mode network:
//!   time-domain integration, steady states, frequency response, and the
//!   closed-form source/target transfer ratio.
//! * [`emitter`] — a quantum dot driving the source cavity: joint
//!   exciton/network evolution, Purcell and beta-factor arithmetic,
//!   coupling-regime classification, and emission-time sampling.
//! * [`counting`] — Monte Carlo photodetection: pulsed Hanbury Brown-Twiss
//!   experiments, coincidence histograms, and pulsed `g²(0)` estimation.
//! * [`hom`] — Hong-Ou-Mandel two-photon interference: analytic five-peak
//!   cluster areas, interferometer simulation, and mean-wavepacket-overlap
//!   estimation.
//! * [`fitting`] — synthesis of pump/collect spectra and nonlinear
//!   least-squares extraction of the coupling rates from them.
//! * [`network`] and [`units`] — domain types, loss bookkeeping, mode
//!   volume, parameter presets, and rate/quality-factor conversions.
//!
//! # Units
//!
//! All internal rates are angular and carried in rad/ns. Named "GHz"
//! values follow the lab convention of quoting an angular rate in units of
//! 10⁹ rad/s, so a rate labelled 455 GHz is stored as 455.0 rad/ns with no
//! 2π factor applied. Optical carrier frequencies are rad/s; times are ns
//! except where a field name says otherwise (e.g. lifetimes in ps).
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature enables `std::error::Error` integration and faster float paths.

#![cfg_attr(not(feature = "std"), no_std)]
// Validation uses `!(x > 0.0)` so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod counting;
pub mod dynamics;
pub mod emitter;
mod error;
pub mod fitting;
pub mod hom;
mod linalg;
pub mod network;
pub mod rng;
pub mod units;

pub use error::{Error, Result};

/// The complex amplitude type used throughout the public API.
pub use num_complex::Complex64;
