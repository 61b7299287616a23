//! Synthetic IQ-shot generation for N-qubit ESP readout.
//!
//! Each qubit's readout is a point in the IQ plane. The point is centred on a
//! state-dependent mean, may be dragged toward a lower state's mean by decay
//! during integration, is shifted by neighbouring excitations (crosstalk) and
//! finally receives Gaussian noise.

mod dataset;
mod device;
mod shot;

pub use dataset::{Dataset, ShotRecord, DATASET_FORMAT_VERSION};
pub use device::{Cov2, DeviceModel, QubitParams};
pub use shot::{simulate_dataset, simulate_dataset_with_limit, simulate_shot, DEFAULT_MAX_RECORDS};
