//! Desk-scale adversarial robustness laboratory.
//!
//! The crate trains a small convolutional classifier from scratch on
//! synthetic (or IDX/MNIST) images, generates adversarial examples with
//! three gradient-sign methods, applies standard defenses, and measures
//! everything with a deterministic epsilon-sweep protocol that emits CSV
//! reports and SVG plots.
//!
//! Pipeline overview:
//!
//! * [`tensor`]: dense `f64` arrays plus `sign`, `box_clamp`, `top_k`;
//! * [`network`]: the classifier, exact input/parameter gradients, SGD;
//! * [`datasets`]: IDX files, the synthetic corpus, seeded subsetting;
//! * [`attacks`]: FGSM and the iterative (non-)targeted methods;
//! * [`defenses`]: adversarial training, label smoothing, distillation,
//!   and an adversarial-input detector;
//! * [`evaluation`]: sweeps, relative/ground-truth top-k metrics,
//!   transfer runs, CSV/SVG emission.
//!
//! Every stochastic choice funnels through one explicit 64-bit seed, and
//! equal seeds reproduce results bit for bit.

pub mod attacks;
pub mod datasets;
pub mod defenses;
pub mod error;
pub mod evaluation;
pub mod network;
mod parallel;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
