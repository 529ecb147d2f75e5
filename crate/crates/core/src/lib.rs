//! Time-domain interference alignment for K-user line-of-sight interference
//! channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] holds channel instances, delay quantization and the D-path
//!   to line-of-sight expansion.
//! * [`graph`] builds the time-indexed interference graph and provides the
//!   exhaustive independent-set oracle.
//! * [`dp`] is the stationary dynamic program: state enumeration, the
//!   Viterbi-style finite horizon solver and the asymptotic independence rate
//!   via maximum mean cycles.
//! * [`numtheory`] contains the exact half-rate feasibility tests for three
//!   users and the chain-graph pattern construction.
//! * [`gap`] is the generalized arithmetic progression construction with its
//!   Monte Carlo harness.
//! * [`converse`] samples per-column conflict graphs and computes exact
//!   independence numbers.
//! * [`ofdm`] reconciles the three-user scheme with a cyclic-prefix OFDM
//!   front end and runs the rank-collapse experiment.

pub mod bitset;
pub mod channel;
pub mod converse;
pub mod dp;
pub mod error;
pub mod gap;
pub mod graph;
mod karp;
mod mis;
pub mod numtheory;
pub mod ofdm;
pub mod presets;
pub mod seed;

pub use channel::{ChannelInstance, DPathChannel, NormalizedChannel};
pub use dp::{Boundary, DpStateSpace, IndependenceRate, SolveResult, Weights};
pub use error::{Error, Result};
pub use graph::{InterferenceGraph, RateReport, TransmitPattern};
