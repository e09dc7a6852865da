//! Resolution-balanced feature extraction for multichannel biosignals.
//!
//! Each recording becomes a `groups × time × frequency` power tensor whose
//! three resolutions share a fixed feature budget:
//!
//! ```text
//! SignalSample ─ segment ─ psd ─ pool_temporal ─ pool_spatial ─ flatten ─ SVM
//!                (half overlap) (Hanning)  (group means)  (spectral clusters)
//! ```
//!
//! [`harness`] sweeps every feasible `(n_f, n_t, n_g)` triple through
//! subject-grouped cross-validation and exports the accuracy surface.

pub mod features;
pub mod graph;
pub mod harness;
pub mod seed;
pub mod signal;
pub mod svm;

pub use features::{FeatureConfig, FeatureError};
pub use graph::GraphError;
pub use harness::{HarnessError, SweepResult};
pub use signal::{DatasetBundle, Label, SignalError, SignalSample};
pub use svm::{SvmError, SvmModel};
