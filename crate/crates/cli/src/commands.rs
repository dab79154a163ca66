use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use deepagg_core::channel::{echannel_weights, element_value_items, sparsity_items, weighted_channel_sums};
use deepagg_core::eval::{load_oxford_ground_truth, mean_average_precision, pair_queries};
use deepagg_core::experiment::{all_groups, run_ablation, run_alpha_sweep, DatasetPaths, ExperimentData, ExperimentSpec, SIX_GROUPS};
use deepagg_core::io::{load_manifest, load_tensor, read_descriptors, write_descriptors};
use deepagg_core::spatial::{adaptive_params, gaussian_map, response_map};
use deepagg_core::synthetic::{generate, write_dataset, SyntheticConfig};
use deepagg_core::viz::{channel_correlation, read_vector_csv, render_heatmap, weighted_response, write_vector_csv};
use deepagg_core::whitening::{fit_whitening, load_model, save_model, Projection};
use deepagg_core::{
    aggregate::spatial_weights, aggregate_batch, AggregationConfig, AlphaFraction, ChannelVectorF64,
    DescriptorIndexF64, EpsilonConstant, Error, FeatureTensorF64, Stage,
};
use serde::Serialize;
use serde_json::json;

use crate::args::*;

/// What a command hands back for printing: human text and its JSON form.
pub struct Output {
    pub text: String,
    pub json: serde_json::Value,
}

impl Output {
    fn new(text: String, json: serde_json::Value) -> Self {
        Self { text, json }
    }
}

fn config(w: &WeightingArgs, spatial: SpatialArg, channel: ChannelArg) -> Result<AggregationConfig> {
    Ok(AggregationConfig {
        alpha: AlphaFraction::new(w.alpha)?,
        eps: EpsilonConstant::new(w.eps)?,
        spatial: spatial.into(),
        channel: channel.into(),
        sigma_rule: w.sigma_rule.into(),
        target_dim: None,
    })
}

pub fn aggregate(a: &AggregateArgs) -> Result<Output> {
    let cfg = config(&a.weighting, a.spatial, a.channel)?;
    let manifest = load_manifest(&a.manifest)?;
    let model = a.whitening.as_ref().map(load_model).transpose()?;
    let batch = aggregate_batch::<f64>(&manifest, &cfg, model.as_ref());
    write_descriptors(&batch.descriptors, &a.out)?;
    let mut text = format!(
        "wrote {} descriptors (dim {}) to {}\n",
        batch.descriptors.len(),
        batch.descriptors.first().map_or(0, |d| d.dim()),
        a.out.display()
    );
    for (id, e) in &batch.failures {
        let _ = writeln!(text, "failed {id}: {e}");
    }
    let json = json!({
        "written": batch.descriptors.len(),
        "out": a.out,
        "failures": batch.failures.iter().map(|(id, e)| json!({"image_id": id, "error": e.to_string()})).collect::<Vec<_>>(),
    });
    if batch.failures.is_empty() {
        Ok(Output::new(text, json))
    } else {
        // the successful descriptors stay on disk; the run still reports a data error
        eprint!("{text}");
        Err(Error::Batch(batch.failures).into())
    }
}

pub fn whiten_train(a: &WhitenTrainArgs) -> Result<Output> {
    let descs = read_descriptors::<f64>(&a.descriptors, Stage::RawNormalized)?;
    let mode = if a.no_whiten_scale { Projection::PcaOnly } else { Projection::Whiten };
    let model = fit_whitening(&descs, a.dim, a.eps_w, mode)?;
    save_model(&model, &a.out)?;
    let deficient = model.rank_deficient_dims();
    let mut text = format!(
        "fitted {} -> {} on {} descriptors, wrote {}\n",
        model.input_dim,
        model.output_dim,
        descs.len(),
        a.out.display()
    );
    if deficient > 0 {
        let _ = writeln!(text, "warning: {deficient} retained directions have eigenvalue <= eps_w");
    }
    Ok(Output::new(
        text,
        json!({
            "input_dim": model.input_dim,
            "output_dim": model.output_dim,
            "samples": descs.len(),
            "eigenvalues": model.eigenvalues,
            "rank_deficient_dims": deficient,
            "out": a.out,
        }),
    ))
}

pub fn index(a: &IndexArgs) -> Result<Output> {
    let mut descs = read_descriptors::<f64>(&a.descriptors, Stage::RawNormalized)?;
    if let Some(path) = &a.whitening {
        let model = load_model(path)?;
        descs = descs.iter().map(|d| model.apply(d)).collect::<deepagg_core::Result<_>>()?;
    }
    let index = DescriptorIndexF64::build(&descs)?;
    write_descriptors(&descs, &a.out)?;
    Ok(Output::new(
        format!("indexed {} descriptors (dim {}) to {}\n", index.len(), index.dim(), a.out.display()),
        json!({"count": index.len(), "dim": index.dim(), "out": a.out}),
    ))
}

fn load_index(path: &Path) -> Result<DescriptorIndexF64> {
    let descs = read_descriptors::<f64>(path, Stage::WhitenedNormalized)?;
    DescriptorIndexF64::build(&descs).with_context(|| format!("building index from {}", path.display()))
}

pub fn search(a: &SearchArgs) -> Result<Output> {
    let index = load_index(&a.index)?;
    let mut queries = read_descriptors::<f64>(&a.queries, Stage::WhitenedNormalized)?;
    if let Some(id) = &a.query {
        queries.retain(|q| q.image_id() == id);
        if queries.is_empty() {
            return Err(Error::UnknownId(id.clone()).into());
        }
    }
    let mut text = String::new();
    let mut results = Vec::with_capacity(queries.len());
    for q in &queries {
        let ranked = index.search(q)?;
        let top: Vec<_> = ranked.entries.iter().take(a.top).collect();
        let _ = writeln!(text, "{}", q.image_id());
        for (rank, (id, score)) in top.iter().enumerate() {
            let _ = writeln!(text, "  {:>4}  {score:>9.6}  {id}", rank + 1);
        }
        results.push(json!({
            "query": q.image_id(),
            "results": top.iter().map(|(id, s)| json!({"image_id": id, "score": s})).collect::<Vec<_>>(),
        }));
    }
    Ok(Output::new(text, json!(results)))
}

pub fn evaluate(a: &EvaluateArgs) -> Result<Output> {
    let index = load_index(&a.index)?;
    let queries = read_descriptors::<f64>(&a.queries, Stage::WhitenedNormalized)?;
    let gts = load_oxford_ground_truth(&a.gt)?;
    let paired = pair_queries(&queries, &gts)?;
    let report = mean_average_precision(&index, &paired, a.ap_mode.into())?;
    let width = report.per_query.iter().map(|q| q.query_id.len()).max().unwrap_or(5).max(5);
    let mut text = format!("{:<width$}  AP\n", "query");
    for q in &report.per_query {
        let _ = writeln!(text, "{:<width$}  {:.4}", q.query_id, q.ap);
    }
    let _ = writeln!(text, "mAP {:.4}", report.map);
    Ok(Output::new(text, serde_json::to_value(&report)?))
}

fn dataset_paths(d: &DatasetArgs) -> Result<DatasetPaths> {
    let pick = |explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf> {
        match (explicit, &d.data) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join(name)),
            (None, None) => Err(Error::InvalidArgument(format!("no dataset given: pass --data or the `{name}` location")).into()),
        }
    };
    Ok(DatasetPaths {
        database: pick(&d.database, "database.tsv")?,
        queries: pick(&d.queries, "queries.tsv")?,
        whitening: pick(&d.whitening, "whitening.tsv")?,
        ground_truth: pick(&d.gt, "gt")?,
    })
}

fn spec(h: &HarnessArgs) -> Result<ExperimentSpec> {
    Ok(ExperimentSpec {
        dims: h.dims.clone(),
        eps: EpsilonConstant::new(h.eps)?,
        sigma_rule: h.sigma_rule.into(),
        ap_mode: h.ap_mode.into(),
        eps_w: h.eps_w,
        projection: if h.no_whiten_scale { Projection::PcaOnly } else { Projection::Whiten },
        ..ExperimentSpec::default()
    })
}

fn table_output<T: Serialize>(table: &T, text: String, out: Option<&Path>) -> Result<Output> {
    let json = serde_json::to_value(table)?;
    if let Some(path) = out {
        let body = serde_json::to_string_pretty(table)? + "\n";
        std::fs::write(path, body).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    Ok(Output::new(text, json))
}

pub fn sweep_alpha(a: &SweepArgs) -> Result<Output> {
    let mut spec = spec(&a.harness)?;
    spec.alphas = a.alphas.iter().map(|&x| AlphaFraction::new(x)).collect::<deepagg_core::Result<_>>()?;
    let data = ExperimentData::load(&dataset_paths(&a.harness.dataset)?)?;
    let table = run_alpha_sweep(&spec, &data)?;
    let mut text = format!("{:>6}  {:>5}  mAP\n", "alpha", "dim");
    for r in &table.rows {
        let _ = writeln!(text, "{:>6}  {:>5}  {:.4}", r.alpha, r.dim, r.map);
    }
    table_output(&table, text, a.harness.out.as_deref())
}

pub fn ablate(a: &AblateArgs) -> Result<Output> {
    let mut spec = spec(&a.harness)?;
    spec.alphas = vec![AlphaFraction::new(a.alpha)?];
    spec.modes = if a.full { all_groups() } else { SIX_GROUPS.to_vec() };
    let data = ExperimentData::load(&dataset_paths(&a.harness.dataset)?)?;
    let table = run_ablation(&spec, &data)?;
    let mut text = format!("{:<7}  {:<7}  {:>5}  mAP\n", "spatial", "channel", "dim");
    for r in &table.rows {
        let _ = writeln!(text, "{:<7}  {:<7}  {:>5}  {:.4}", r.spatial.to_string(), r.channel.to_string(), r.dim, r.map);
    }
    table_output(&table, text, a.harness.out.as_deref())
}

pub fn viz(c: &VizCommand) -> Result<Output> {
    match c {
        VizCommand::Heatmap(a) => heatmap(a),
        VizCommand::Corr(a) => corr(a),
        VizCommand::Vectors(a) => vectors(a),
    }
}

fn heatmap(a: &HeatmapArgs) -> Result<Output> {
    let t: FeatureTensorF64 = load_tensor(&a.tensor)?;
    let alpha = AlphaFraction::new(a.alpha)?;
    let params = adaptive_params(&t, alpha, a.sigma_rule.into());
    let s = gaussian_map::<f64>(t.height(), t.width(), params);
    let map = match a.kind {
        HeatmapKind::Gaussian => s,
        HeatmapKind::Response => response_map(&t),
        HeatmapKind::Weighted => weighted_response(&response_map(&t), &s)?,
    };
    let center = (!a.no_marker).then_some((params.center_i, params.center_j));
    let img = render_heatmap(&map, center, a.scale);
    img.save_ppm(&a.out)?;
    Ok(Output::new(
        format!(
            "{}x{} heat map, center ({:.3}, {:.3}), sigma {:.4}, wrote {}\n",
            img.width,
            img.height,
            params.center_i,
            params.center_j,
            params.sigma,
            a.out.display()
        ),
        json!({
            "width": img.width,
            "height": img.height,
            "center": [params.center_i, params.center_j],
            "sigma": params.sigma,
            "out": a.out,
        }),
    ))
}

fn corr(a: &CorrArgs) -> Result<Output> {
    let dir = &a.vectors;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let vectors = files
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            read_vector_csv::<f64>(p).map(|v| (id, v))
        })
        .collect::<deepagg_core::Result<Vec<(String, ChannelVectorF64)>>>()?;
    let m = channel_correlation(&vectors, a.metric.into())?;
    let mut csv = Vec::new();
    m.write_csv(&mut csv)?;
    std::fs::write(&a.out, &csv).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    Ok(Output::new(
        format!("{0}x{0} correlation matrix written to {1}\n", m.n(), a.out.display()),
        json!({"ids": m.ids, "values": m.values, "out": a.out}),
    ))
}

fn vectors(a: &VectorsArgs) -> Result<Output> {
    let cfg = config(&a.weighting, a.spatial, ChannelArg::None)?;
    let manifest = load_manifest(&a.manifest)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    for entry in &manifest.entries {
        let t: FeatureTensorF64 = load_tensor(&entry.path)?;
        let v = match a.kind {
            VectorKind::Sparsity => sparsity_items(&t),
            VectorKind::Items | VectorKind::Weights => {
                let omega = weighted_channel_sums(&t, &spatial_weights(&t, &cfg))?;
                let b = element_value_items(&omega, t.height(), t.width());
                match a.kind {
                    VectorKind::Weights => echannel_weights(&b, cfg.eps),
                    _ => b,
                }
            }
        };
        write_vector_csv(&v, a.out.join(format!("{}.csv", entry.image_id)))?;
    }
    Ok(Output::new(
        format!("wrote {} vectors to {}\n", manifest.entries.len(), a.out.display()),
        json!({"written": manifest.entries.len(), "out": a.out}),
    ))
}

pub fn gen_synthetic(a: &GenSyntheticArgs) -> Result<Output> {
    let cfg = SyntheticConfig {
        variant: a.variant.into(),
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    let data = generate(&cfg)?;
    let paths = write_dataset(&data, &a.out)?;
    Ok(Output::new(
        format!(
            "wrote {} database, {} query and {} whitening tensors ({}x{}x{}) to {}\n",
            data.database.len(),
            data.queries.len(),
            data.whitening.len(),
            cfg.channels,
            cfg.height,
            cfg.width,
            a.out.display()
        ),
        json!({
            "database": paths.database,
            "queries": paths.queries,
            "whitening": paths.whitening,
            "gt": paths.ground_truth,
            "counts": {"database": data.database.len(), "queries": data.queries.len(), "whitening": data.whitening.len()},
        }),
    ))
}
