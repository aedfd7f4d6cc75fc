//! Articulatory workbench core.
//!
//! Converts articulography pellet geometry into vocal tract variables,
//! runs and trains a small speech inversion network, aggregates clinician
//! perceptual ratings into per-file consensus labels, and tests
//! articulatory hypotheses with nested random-intercept mixed models.
//!
//! Module map:
//!
//! - [`kinematics`]: pellet geometry to the six oral tract variables, sign
//!   orientation and speaker min-max normalization.
//! - [`source`]: periodicity, aperiodicity and F0 stand-in estimators.
//! - [`inversion`]: conv/GRU inversion network with hand-written backprop.
//! - [`segments`]: alignment parsing and per-phone reduction.
//! - [`ratings`]: rating records, consensus, rater training and batching.
//! - [`stats`]: REML mixed models, marginal means, contrasts, FDR, MSD.
//! - [`service`]: transport-free state behind the rating HTTP service.
//! - [`synth`]: deterministic synthetic fixtures.
//! - [`formats`]: CSV and binary file formats shared by the CLI.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod formats;
pub mod inversion;
pub mod kinematics;
pub mod phones;
pub mod ratings;
pub mod segments;
pub mod service;
pub mod source;
pub mod stats;
pub mod synth;
pub mod tv;

pub use kinematics::{PalateTrace, PelletFrame, Point, SpeakerRange, TractVariableFrame};
pub use phones::{PhoneCategory, Target};
pub use segments::{PhoneInterval, PhoneObservation};
pub use tv::{Channel, TractVariableMatrix};
