//! Qubit-state discrimination for excited-state-promoted (ESP) readout.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`sim`]: a seeded N-qubit IQ-shot simulator with decay and readout crosstalk,
//! - [`dataprep`]: base-3 labels, elliptic-envelope outlier removal, scaling and
//!   stratified splits,
//! - [`discriminators`]: KNN, decision tree, Gaussian naive Bayes, LDA and QDA,
//! - [`neural`]: a fully connected softmax network trained with Adam,
//! - [`metrics`]: per-qubit assignment fidelity, geometric-mean system fidelity and
//!   the cross-fidelity matrix,
//! - [`experiment`]: manifests and the in-memory pipeline driving all of the above.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataprep;
pub mod discriminators;
pub mod error;
pub mod experiment;
mod linalg;
pub mod metrics;
pub mod neural;
pub mod sim;

pub use dataprep::labels::{decode_label, encode_label, num_states, one_hot};
pub use dataprep::{ScalerParams, SplitSpec};
pub use discriminators::{ClassifierKind, ClassifierSpec, TrainedModel};
pub use error::{Error, Result};
pub use metrics::{FidelityReport, QubitConfusion};
pub use neural::{FnnArchitecture, FnnModel, TrainConfig};
pub use sim::{Dataset, DeviceModel, ShotRecord};
