//! Compact-model circuit simulator for iontronic diode networks.
//!
//! The simulator is built around a two-region compact model of the iontronic
//! bipolar diode: a series access resistance feeding a parallel RC pair whose
//! resistance and capacitance switch between forward and reverse values with
//! the sign of the internal junction voltage. On top of the device model sit:
//!
//! - [`netlist`] — a SPICE-flavored text circuit format with parser,
//!   serializer, and structural validator;
//! - [`engine`] — DC operating point, DC sweeps, and fixed-step implicit
//!   transient analysis via modified nodal analysis with charge-conserving
//!   companion models;
//! - [`stochastic`] — seeded log-normal parameter sampling and Monte Carlo
//!   ensembles over a circuit template;
//! - [`circuits`] — generators for diode-resistor logic (OR/AND gates,
//!   dual-rail composites, cascaded chains, a 3-to-8 decoder) and a diode
//!   bridge rectifier;
//! - [`metrics`] — circuit quality figures: logic margins, settle time,
//!   average power, chain-length-vs-rectification-ratio and bridge
//!   frequency-vs-capacitance studies;
//! - [`calibrate`] — extraction of the five model parameters from IV and
//!   step-response measurement data.
//!
//! Monte Carlo runs and study grid points are data-parallel. With the
//! `parallel` feature (on by default) they can execute on a rayon pool; a
//! sequential executor is always available and is the only executor when the
//! feature is disabled.

pub mod calibrate;
pub mod circuits;
pub mod cli;
pub mod engine;
pub mod exec;
mod fitting;
pub mod metrics;
pub mod model;
pub mod netlist;
pub mod plot;
pub mod stochastic;

pub use engine::{dc_operating_point, dc_sweep, transient};
pub use model::DiodeParams;
pub use netlist::Circuit;
