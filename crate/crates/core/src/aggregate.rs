//! The aggregation pipeline: spatial weighting, weighted channel sums,
//! channel weighting, L2 normalization, optional whitening and a second
//! normalization.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    echannel_weights, element_value_items, schannel_weights, sparsity_items, weighted_channel_sums, EpsilonConstant,
};
use crate::error::{Error, Result};
use crate::io::{load_tensor, DatasetManifest};
use crate::scalar::Scalar;
use crate::spatial::{adaptive_gaussian, fixed_gaussian, AlphaFraction, SigmaRule};
use crate::tensor::{ChannelVector, FeatureTensor, GlobalDescriptor, SpatialMap, Stage};
use crate::whitening::WhiteningModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialMode {
    /// All-ones map: plain sum pooling.
    None,
    /// Gaussian centered on the top-α responses.
    #[serde(rename = "agauss")]
    AGaussian,
    /// Gaussian fixed at the grid center.
    #[serde(rename = "ngauss")]
    NGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    None,
    /// Element-value sensitive weights.
    #[serde(rename = "echan")]
    EChannel,
    /// Sparsity weights.
    #[serde(rename = "schan")]
    SChannel,
}

impl std::fmt::Display for SpatialMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpatialMode::None => "none",
            SpatialMode::AGaussian => "agauss",
            SpatialMode::NGaussian => "ngauss",
        })
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelMode::None => "none",
            ChannelMode::EChannel => "echan",
            ChannelMode::SChannel => "schan",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregationConfig {
    pub alpha: AlphaFraction,
    pub eps: EpsilonConstant,
    pub spatial: SpatialMode,
    pub channel: ChannelMode,
    pub sigma_rule: SigmaRule,
    /// Output dimensionality after whitening.
    pub target_dim: Option<usize>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaFraction::default(),
            eps: EpsilonConstant::default(),
            spatial: SpatialMode::AGaussian,
            channel: ChannelMode::EChannel,
            sigma_rule: SigmaRule::Edge,
            target_dim: None,
        }
    }
}

impl AggregationConfig {
    pub fn with_modes(spatial: SpatialMode, channel: ChannelMode) -> Self {
        Self {
            spatial,
            channel,
            ..Self::default()
        }
    }
}

/// The spatial weight map selected by `cfg.spatial`.
pub fn spatial_weights<T: Scalar>(t: &FeatureTensor<T>, cfg: &AggregationConfig) -> SpatialMap<T> {
    match cfg.spatial {
        SpatialMode::None => SpatialMap::filled(t.height(), t.width(), T::one()),
        SpatialMode::AGaussian => adaptive_gaussian(t, cfg.alpha, cfg.sigma_rule),
        SpatialMode::NGaussian => fixed_gaussian(t.height(), t.width(), cfg.sigma_rule),
    }
}

/// The channel weight vector selected by `cfg.channel`, given channel sums
/// `omega` computed under the same config's spatial map.
pub fn channel_weights<T: Scalar>(
    t: &FeatureTensor<T>,
    omega: &ChannelVector<T>,
    cfg: &AggregationConfig,
) -> ChannelVector<T> {
    match cfg.channel {
        ChannelMode::None => vec![T::one(); t.channels()].into(),
        ChannelMode::EChannel => echannel_weights(&element_value_items(omega, t.height(), t.width()), cfg.eps),
        ChannelMode::SChannel => schannel_weights(&sparsity_items(t), cfg.eps),
    }
}

/// Steps one to five: returns the L2-normalized co-weighted channel sums.
pub fn aggregate_raw<T: Scalar>(t: &FeatureTensor<T>, cfg: &AggregationConfig) -> Result<GlobalDescriptor<T>> {
    let s = spatial_weights(t, cfg);
    let omega = weighted_channel_sums(t, &s)?;
    let b = channel_weights(t, &omega, cfg);
    let beta = b.values().iter().zip(omega.values()).map(|(&w, &o)| w * o).collect();
    GlobalDescriptor::normalized(t.image_id(), Stage::RawNormalized, beta)
}

/// Full pipeline: raw aggregation, whitening to `model.output_dim`, and
/// re-normalization.
pub fn aggregate<T: Scalar>(
    t: &FeatureTensor<T>,
    cfg: &AggregationConfig,
    model: &WhiteningModel,
) -> Result<GlobalDescriptor<T>> {
    if model.input_dim != t.channels() {
        return Err(Error::ModelDimMismatch {
            expected: model.input_dim,
            actual: t.channels(),
        });
    }
    if let Some(k) = cfg.target_dim {
        if k != model.output_dim {
            return Err(Error::ModelDimMismatch {
                expected: k,
                actual: model.output_dim,
            });
        }
    }
    model.apply(&aggregate_raw(t, cfg)?)
}

/// Descriptors in manifest order plus per-image failures.
#[derive(Debug)]
pub struct BatchOutput<T> {
    pub descriptors: Vec<GlobalDescriptor<T>>,
    pub failures: Vec<(String, Error)>,
}

impl<T> BatchOutput<T> {
    /// Converts any failure into an error.
    pub fn into_result(self) -> Result<Vec<GlobalDescriptor<T>>> {
        if self.failures.is_empty() {
            Ok(self.descriptors)
        } else {
            Err(Error::Batch(self.failures))
        }
    }
}

/// Loads and aggregates every manifest entry in parallel. Output order
/// follows the manifest; failures are collected with their image id.
pub fn aggregate_batch<T: Scalar>(
    manifest: &DatasetManifest,
    cfg: &AggregationConfig,
    model: Option<&WhiteningModel>,
) -> BatchOutput<T> {
    let results: Vec<(String, Result<GlobalDescriptor<T>>)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let result = load_tensor::<T>(&entry.path).and_then(|mut t| {
                t.set_image_id(entry.image_id.clone());
                match model {
                    Some(m) => aggregate(&t, cfg, m),
                    None => aggregate_raw(&t, cfg),
                }
            });
            (entry.image_id.clone(), result)
        })
        .collect();
    let mut out = BatchOutput {
        descriptors: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for (id, r) in results {
        match r {
            Ok(d) => out.descriptors.push(d),
            Err(e) => out.failures.push((id, e)),
        }
    }
    out
}
