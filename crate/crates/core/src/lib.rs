//! Aggregation of convolutional feature tensors into compact global image
//! descriptors, co-weighted by an adaptive Gaussian spatial prior and
//! element-value sensitive channel weights, plus the retrieval evaluation
//! around it: PCA whitening, exact cosine search and mAP under the
//! good/ok/junk protocol.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases. Tensor files store
//! 32-bit values, and reductions accumulate in 64-bit regardless of the
//! scalar chosen.

pub mod aggregate;
pub mod channel;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod retrieval;
pub mod scalar;
pub mod spatial;
pub mod synthetic;
pub mod tensor;
pub mod viz;
pub mod whitening;

pub use aggregate::{aggregate, aggregate_batch, aggregate_raw, AggregationConfig, BatchOutput, ChannelMode, SpatialMode};
pub use channel::EpsilonConstant;
pub use error::{Error, Result};
pub use eval::{ApMode, EvalReport, QueryGroundTruth};
pub use retrieval::{DescriptorIndex, RankedResult};
pub use scalar::Scalar;
pub use spatial::{AlphaFraction, GaussianParams, SigmaRule};
pub use tensor::{grid_center, ChannelVector, FeatureTensor, GlobalDescriptor, SpatialMap, Stage};
pub use whitening::WhiteningModel;

pub type FeatureTensorF32 = FeatureTensor<f32>;
pub type FeatureTensorF64 = FeatureTensor<f64>;
pub type SpatialMapF64 = SpatialMap<f64>;
pub type ChannelVectorF64 = ChannelVector<f64>;
pub type DescriptorF32 = GlobalDescriptor<f32>;
pub type DescriptorF64 = GlobalDescriptor<f64>;
pub type DescriptorIndexF64 = DescriptorIndex<f64>;
