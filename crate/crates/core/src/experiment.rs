//! Experiment harnesses: the α sweep (spatial weighting only) and the
//! weighting-scheme ablation, each re-fitting whitening per output
//! dimensionality.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{aggregate_raw, AggregationConfig, ChannelMode, SpatialMode};
use crate::channel::EpsilonConstant;
use crate::error::{Error, Result};
use crate::eval::{load_oxford_ground_truth, mean_average_precision, pair_queries, ApMode, QueryGroundTruth};
use crate::io::{load_manifest, load_tensor, DatasetManifest};
use crate::retrieval::DescriptorIndex;
use crate::spatial::{AlphaFraction, SigmaRule};
use crate::synthetic::SyntheticDataset;
use crate::tensor::{FeatureTensor, GlobalDescriptor};
use crate::whitening::{fit_whitening, Projection, DEFAULT_EPS_W};

/// The six weighting combinations compared in the ablation.
pub const SIX_GROUPS: [(SpatialMode, ChannelMode); 6] = [
    (SpatialMode::None, ChannelMode::None),
    (SpatialMode::NGaussian, ChannelMode::None),
    (SpatialMode::AGaussian, ChannelMode::None),
    (SpatialMode::None, ChannelMode::EChannel),
    (SpatialMode::NGaussian, ChannelMode::SChannel),
    (SpatialMode::AGaussian, ChannelMode::EChannel),
];

/// Every spatial × channel combination.
pub fn all_groups() -> Vec<(SpatialMode, ChannelMode)> {
    let spatial = [SpatialMode::None, SpatialMode::NGaussian, SpatialMode::AGaussian];
    let channel = [ChannelMode::None, ChannelMode::SChannel, ChannelMode::EChannel];
    spatial
        .iter()
        .flat_map(|&s| channel.iter().map(move |&c| (s, c)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub alphas: Vec<AlphaFraction>,
    pub dims: Vec<usize>,
    pub modes: Vec<(SpatialMode, ChannelMode)>,
    pub eps: EpsilonConstant,
    pub sigma_rule: SigmaRule,
    pub ap_mode: ApMode,
    pub eps_w: f64,
    pub projection: Projection,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            alphas: vec![AlphaFraction::default()],
            dims: vec![512],
            modes: SIX_GROUPS.to_vec(),
            eps: EpsilonConstant::default(),
            sigma_rule: SigmaRule::Edge,
            ap_mode: ApMode::Trapezoid,
            eps_w: DEFAULT_EPS_W,
            projection: Projection::Whiten,
        }
    }
}

/// Locations of the database, query and whitening manifests and the
/// ground-truth directory.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub database: PathBuf,
    pub queries: PathBuf,
    pub whitening: PathBuf,
    pub ground_truth: PathBuf,
}

/// Tensors held in memory for repeated pipeline runs.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub database: Vec<FeatureTensor<f64>>,
    pub queries: Vec<FeatureTensor<f64>>,
    pub whitening: Vec<FeatureTensor<f64>>,
    pub ground_truth: Vec<QueryGroundTruth>,
}

impl ExperimentData {
    pub fn load(paths: &DatasetPaths) -> Result<Self> {
        Ok(Self {
            database: load_set(&load_manifest(&paths.database)?)?,
            queries: load_set(&load_manifest(&paths.queries)?)?,
            whitening: load_set(&load_manifest(&paths.whitening)?)?,
            ground_truth: load_oxford_ground_truth(&paths.ground_truth)?,
        })
    }

    fn channels(&self) -> Option<usize> {
        self.database.first().map(|t| t.channels())
    }
}

impl From<SyntheticDataset> for ExperimentData {
    fn from(d: SyntheticDataset) -> Self {
        Self {
            database: d.database,
            queries: d.queries,
            whitening: d.whitening,
            ground_truth: d.ground_truth,
        }
    }
}

fn load_set(manifest: &DatasetManifest) -> Result<Vec<FeatureTensor<f64>>> {
    let loaded: Vec<(String, Result<FeatureTensor<f64>>)> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let t = load_tensor(&e.path).map(|mut t: FeatureTensor<f64>| {
                t.set_image_id(e.image_id.clone());
                t
            });
            (e.image_id.clone(), t)
        })
        .collect();
    let mut out = Vec::with_capacity(loaded.len());
    let mut failures = Vec::new();
    for (id, r) in loaded {
        match r {
            Ok(t) => out.push(t),
            Err(e) => failures.push((id, e)),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(Error::Batch(failures))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub dim: usize,
    #[serde(rename = "mAP")]
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub spatial: SpatialMode,
    pub channel: ChannelMode,
    pub dim: usize,
    #[serde(rename = "mAP")]
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSweep {
    pub ap_mode: ApMode,
    pub rows: Vec<AlphaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ablation {
    pub ap_mode: ApMode,
    pub rows: Vec<AblationRow>,
}

fn validate(spec: &ExperimentSpec, data: &ExperimentData, need_alphas: bool, need_modes: bool) -> Result<()> {
    if need_alphas && spec.alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha list is empty".into()));
    }
    if need_modes && spec.modes.is_empty() {
        return Err(Error::InvalidArgument("mode list is empty".into()));
    }
    if spec.dims.is_empty() {
        return Err(Error::InvalidArgument("dimension list is empty".into()));
    }
    let k = data
        .channels()
        .ok_or_else(|| Error::InvalidArgument("database is empty".into()))?;
    if let Some(&d) = spec.dims.iter().find(|&&d| d == 0 || d > k) {
        return Err(Error::InvalidArgument(format!("target dim {d} must lie in 1..={k}")));
    }
    if data.ground_truth.is_empty() {
        return Err(Error::InvalidArgument("no queries in ground truth".into()));
    }
    Ok(())
}

/// Raw descriptors for one configuration, shared across output dims.
struct RawSets {
    database: Vec<GlobalDescriptor<f64>>,
    queries: Vec<GlobalDescriptor<f64>>,
    whitening: Vec<GlobalDescriptor<f64>>,
}

fn raw_set(set: &[FeatureTensor<f64>], cfg: &AggregationConfig) -> Result<Vec<GlobalDescriptor<f64>>> {
    let results: Vec<Result<GlobalDescriptor<f64>>> = set.par_iter().map(|t| aggregate_raw(t, cfg)).collect();
    let mut out = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (t, r) in set.iter().zip(results) {
        match r {
            Ok(d) => out.push(d),
            Err(e) => failures.push((t.image_id().to_string(), e)),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(Error::Batch(failures))
    }
}

fn raw_sets(data: &ExperimentData, cfg: &AggregationConfig) -> Result<RawSets> {
    Ok(RawSets {
        database: raw_set(&data.database, cfg)?,
        queries: raw_set(&data.queries, cfg)?,
        whitening: raw_set(&data.whitening, cfg)?,
    })
}

/// Whitens everything to `dim` and returns the mAP.
fn evaluate_cell(raw: &RawSets, gts: &[QueryGroundTruth], dim: usize, spec: &ExperimentSpec) -> Result<f64> {
    let model = fit_whitening(&raw.whitening, dim, spec.eps_w, spec.projection)?;
    let whiten = |set: &[GlobalDescriptor<f64>]| set.iter().map(|d| model.apply(d)).collect::<Result<Vec<_>>>();
    let index = DescriptorIndex::build(&whiten(&raw.database)?)?;
    let queries = pair_queries(&whiten(&raw.queries)?, gts)?;
    Ok(mean_average_precision(&index, &queries, spec.ap_mode)?.map)
}

/// mAP for every `(α, dim)` with adaptive Gaussian spatial weighting and
/// no channel weighting. Rows follow `alphas` outer, `dims` inner.
pub fn run_alpha_sweep(spec: &ExperimentSpec, data: &ExperimentData) -> Result<AlphaSweep> {
    validate(spec, data, true, false)?;
    let mut rows = Vec::with_capacity(spec.alphas.len() * spec.dims.len());
    for &alpha in &spec.alphas {
        let cfg = AggregationConfig {
            alpha,
            eps: spec.eps,
            spatial: SpatialMode::AGaussian,
            channel: ChannelMode::None,
            sigma_rule: spec.sigma_rule,
            target_dim: None,
        };
        let raw = raw_sets(data, &cfg)?;
        for &dim in &spec.dims {
            rows.push(AlphaRow {
                alpha: alpha.value(),
                dim,
                map: evaluate_cell(&raw, &data.ground_truth, dim, spec)?,
            });
        }
    }
    Ok(AlphaSweep {
        ap_mode: spec.ap_mode,
        rows,
    })
}

/// mAP for every `(mode, dim)`; the adaptive Gaussian uses the first α of
/// the spec. Rows follow `modes` outer, `dims` inner.
pub fn run_ablation(spec: &ExperimentSpec, data: &ExperimentData) -> Result<Ablation> {
    validate(spec, data, true, true)?;
    let mut rows = Vec::with_capacity(spec.modes.len() * spec.dims.len());
    for &(spatial, channel) in &spec.modes {
        let cfg = AggregationConfig {
            alpha: spec.alphas[0],
            eps: spec.eps,
            spatial,
            channel,
            sigma_rule: spec.sigma_rule,
            target_dim: None,
        };
        let raw = raw_sets(data, &cfg)?;
        for &dim in &spec.dims {
            rows.push(AblationRow {
                spatial,
                channel,
                dim,
                map: evaluate_cell(&raw, &data.ground_truth, dim, spec)?,
            });
        }
    }
    Ok(Ablation {
        ap_mode: spec.ap_mode,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticConfig, Variant};

    fn data(variant: Variant, seed: u64) -> ExperimentData {
        generate(&SyntheticConfig {
            variant,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap()
        .into()
    }

    fn spec(alphas: &[f64], dims: &[usize]) -> ExperimentSpec {
        ExperimentSpec {
            alphas: alphas.iter().map(|&a| AlphaFraction::new(a).unwrap()).collect(),
            dims: dims.to_vec(),
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn full_alpha_sweep_on_clean_data_is_perfect() {
        let table = run_alpha_sweep(&spec(&[1.0], &[4, 8]), &data(Variant::Clean, 3)).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.map == 1.0), "{table:?}");
    }

    #[test]
    fn weighting_beats_plain_pooling_on_bursty_data() {
        for seed in [1, 2018] {
            let a = run_ablation(&spec(&[0.1], &[8]), &data(Variant::Bursty, seed)).unwrap();
            let map = |s, c| a.rows.iter().find(|r| r.spatial == s && r.channel == c).unwrap().map;
            let ours = map(SpatialMode::AGaussian, ChannelMode::EChannel);
            let plain = map(SpatialMode::None, ChannelMode::None);
            assert_eq!(ours, 1.0, "{a:?}");
            assert!(plain < ours, "{a:?}");
        }
    }

    #[test]
    fn sweep_grid_shape() {
        let d: ExperimentData = generate(&SyntheticConfig {
            channels: 512,
            height: 4,
            width: 4,
            per_class: 3,
            queries_per_class: 1,
            whitening_images: 12,
            ..SyntheticConfig::default()
        })
        .unwrap()
        .into();
        let table = run_alpha_sweep(&spec(&[0.05, 0.1, 0.5, 1.0], &[128, 256, 512]), &d).unwrap();
        assert_eq!(table.rows.len(), 12);
        assert_eq!((table.rows[4].alpha, table.rows[4].dim), (0.1, 256));
    }

    #[test]
    fn validation_errors() {
        let d = data(Variant::Clean, 1);
        assert!(matches!(run_alpha_sweep(&spec(&[], &[8]), &d), Err(Error::InvalidArgument(_))));
        assert!(matches!(run_alpha_sweep(&spec(&[0.1], &[]), &d), Err(Error::InvalidArgument(_))));
        assert!(matches!(run_alpha_sweep(&spec(&[0.1], &[17]), &d), Err(Error::InvalidArgument(_))));
        let mut s = spec(&[0.1], &[8]);
        s.modes.clear();
        assert!(matches!(run_ablation(&s, &d), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ablation_has_six_rows_and_is_deterministic() {
        let d = data(Variant::Bursty, 2018);
        let s = spec(&[0.1], &[8]);
        let a = run_ablation(&s, &d).unwrap();
        assert_eq!(a.rows.len(), 6);
        assert_eq!(a, run_ablation(&s, &d).unwrap());
    }

    #[test]
    fn all_groups_has_nine_cells() {
        let g = all_groups();
        assert_eq!(g.len(), 9);
        assert!(SIX_GROUPS.iter().all(|m| g.contains(m)));
    }
}
