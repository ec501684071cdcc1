//! Track-before-detect multi-target tracking on radar intensity cubes.
//!
//! The filter maintains a weighted set of label-set hypotheses with one
//! particle cloud per track and recurses directly on raw intensity data: no
//! detection threshold, no measurement-to-track assignment. The crate bundles
//! the tracker, a synthetic radar-cube simulator for a two-vehicle road
//! scenario, and an evaluation pipeline (OSPA, cardinality, label
//! consistency) behind both a library API and file-based batch tooling.

pub mod birth;
pub mod config;
pub mod cube_io;
pub mod error;
pub mod filter;
pub mod measurement;
pub mod metrics;
pub mod motion;
pub mod numeric;
pub mod pipeline;
pub mod resample;
pub mod rfs;
pub mod rng;
pub mod sim;

pub use config::RunConfig;
pub use error::{Result, TrackingError};
pub use filter::{extract_estimates, step, FilterParams, StepInputs, TbdGlmbFilter};
pub use measurement::{CellGrid, GainProfile, RadarCube, SensorModel};
pub use motion::MotionParams;
pub use rfs::{GlmbDensity, Hypothesis, Label, LabeledParticleTrack, State5};
