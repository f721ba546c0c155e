//! Simulation and classification pipeline for non-contact respiration sensing
//! with reflected infrared light.
//!
//! Stages, in pipeline order: [`waveform`] synthesizes chest displacement for
//! eight breathing classes, [`channel`] turns it into a photodetector voltage,
//! [`dsp`] and [`features`] reduce each recording to a feature vector, [`ml`]
//! holds CART trees and random forests, and [`eval`] runs stratified
//! cross-validation and per-distance sweeps. [`io`] defines the on-disk formats.

pub mod channel;
pub mod dataset;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod io;
pub mod ml;
pub mod seed;
pub mod waveform;

#[cfg(test)]
mod testutil;
