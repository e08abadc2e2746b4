//! Offline signature verification by transfer learning.
//!
//! A small residual CNN is trained on a handwriting source task, its pooled
//! activations are reused as signature descriptors, and each enrolled writer
//! gets a kernel SVM trained against random forgeries. Verification quality
//! is measured by the equal error rate.

mod bytes;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod imaging;
pub mod nn;
pub mod resnet;
pub mod rng;
pub mod svm;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
pub use imaging::{CanonicalInput, GrayImage};
pub use nn::{SgdConfig, Tensor};
pub use resnet::{ResNetConfig, ResNetModel, SourceTask, SourceTaskKind};
pub use svm::{DualSolution, KernelKind, KernelSpec, TrainingSet, UserVerifier};
pub use transfer::{Extractor, FeatureVector, SampleLabel, StrategyKind, TransferStrategy};
pub use eval::{EvalReport, ProtocolConfig, ScoreSet};
