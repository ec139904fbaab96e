//! Shift-invariant integrated-gradients attribution for multi-lead
//! quasi-periodic signals.
//!
//! The crate computes per-(lead, time) attribution scores for a
//! differentiable scalar model over the straight-line path from a resting
//! baseline segment to a target segment. The baseline is made
//! shift-invariant by circular cross-correlation matching, pairwise lead
//! alignment and edge scores summarize how model sensitivity tracks signal
//! deviation, and scores aggregate into four bins per cardiac cycle.
//! A bundled model stack and a synthetic signal generator make every
//! quantity reproducible from scratch.

pub mod alignment;
pub mod attribution;
pub mod baseline;
pub mod binning;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod signal;
pub mod svg;
pub mod synth;

pub use alignment::{AlignmentMatrix, EdgeScoreMatrix, RegimeLabel, RegimeLabelMatrix};
pub use attribution::{AttributionMap, PathSpec, Scheme};
pub use baseline::AlignedBaseline;
pub use binning::{BinProfile, RPeakList, BIN_LABELS};
pub use error::{Error, Result};
pub use model::{Activation, DenseLayer, Differentiable, DifferentiableModel, GradientField, OutputMode};
pub use pipeline::{PipelineConfig, PipelineResult};
pub use report::AttributionReport;
pub use signal::{delta, normalize, DeltaMatrix, LeadTimeMatrix, Normalized};
pub use synth::{SynthConfig, WaveParams};
