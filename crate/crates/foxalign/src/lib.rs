//! Bottom-up multi-face alignment toolkit.
//!
//! The pieces, in pipeline order:
//!
//! - [`tensor`]: dense f32 tensors and the FXT1 file format.
//! - [`foxblock`]: multi-scale average-pooling block and the two-headed
//!   forward pass producing a heatmap and an embedding map.
//! - [`loss`]: cosine discriminative loss with analytic gradients and a
//!   finite-difference oracle.
//! - [`nms`]: local-maximum candidate extraction and embedding gather.
//! - [`meanshift`]: spherical mean-shift grouping of candidate embeddings.
//! - [`pipeline`]: synthetic scenes, toy embedding training, end-to-end
//!   face parsing.
//! - [`metrics`]: NME and detection F1.
//! - [`bench`]: runtime-scaling harness.

pub mod bench;
pub mod error;
pub mod foxblock;
pub mod loss;
pub mod meanshift;
pub mod metrics;
pub mod nms;
pub mod pipeline;
pub mod tensor;
pub mod types;

pub use error::{Error, Result};
pub use tensor::{EmbeddingMap, Heatmap, Tensor};
pub use types::{FaceGroup, FaceMask, LandmarkCandidate, LossConfig, SceneAnnotation};
