//! Average precision under the good/ok/junk protocol and the loader for
//! Oxford/Paris style ground-truth directories.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::retrieval::{DescriptorIndex, RankedResult};
use crate::scalar::Scalar;
use crate::tensor::GlobalDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApMode {
    /// Oxford `compute_ap` trapezoidal accumulation.
    #[default]
    Trapezoid,
    /// Mean of precision at each positive's rank.
    Standard,
}

/// Relevance labels for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroundTruth {
    pub query_id: String,
    /// Source image of the query, without any `oxc1_` prefix.
    pub query_image: String,
    /// Crop rectangle `(x1, y1, x2, y2)` from the query file, if any.
    pub crop: Option<[f64; 4]>,
    pub positives: BTreeSet<String>,
    pub junk: BTreeSet<String>,
}

impl QueryGroundTruth {
    pub fn new(
        query_id: impl Into<String>,
        positives: impl IntoIterator<Item = impl Into<String>>,
        junk: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let query_id = query_id.into();
        let positives: BTreeSet<String> = positives.into_iter().map(Into::into).collect();
        let junk: BTreeSet<String> = junk.into_iter().map(Into::into).collect();
        if positives.is_empty() {
            return Err(Error::EmptyPositives(query_id));
        }
        if let Some(both) = positives.intersection(&junk).next() {
            return Err(Error::MalformedGroundTruth(format!(
                "query `{query_id}` lists `{both}` as both positive and junk"
            )));
        }
        Ok(Self {
            query_image: query_id.clone(),
            query_id,
            crop: None,
            positives,
            junk,
        })
    }
}

/// AP of `ranking` after removing junk ids.
pub fn average_precision(ranking: &RankedResult, gt: &QueryGroundTruth, mode: ApMode) -> Result<f64> {
    let ids: Vec<&str> = ranking.ids().collect();
    average_precision_ids(&ids, gt, mode)
}

pub fn average_precision_ids(ranking: &[&str], gt: &QueryGroundTruth, mode: ApMode) -> Result<f64> {
    if gt.positives.is_empty() {
        return Err(Error::EmptyPositives(gt.query_id.clone()));
    }
    let total = gt.positives.len() as f64;
    let filtered = ranking.iter().filter(|id| !gt.junk.contains(**id));
    let mut hits = 0usize;
    let mut ap = 0.0;
    match mode {
        ApMode::Standard => {
            for (r, id) in filtered.enumerate() {
                if gt.positives.contains(*id) {
                    hits += 1;
                    ap += hits as f64 / (r + 1) as f64;
                }
            }
            ap /= total;
        }
        ApMode::Trapezoid => {
            let (mut old_recall, mut old_precision) = (0.0, 1.0);
            for (r, id) in filtered.enumerate() {
                if gt.positives.contains(*id) {
                    hits += 1;
                }
                let recall = hits as f64 / total;
                let precision = hits as f64 / (r + 1) as f64;
                ap += (recall - old_recall) * (old_precision + precision) / 2.0;
                old_recall = recall;
                old_precision = precision;
            }
        }
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryAp {
    pub query_id: String,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: ApMode,
    pub per_query: Vec<QueryAp>,
    #[serde(rename = "mAP")]
    pub map: f64,
}

/// Mean of per-query AP. Each query is ranked against the whole index;
/// nothing is excluded beyond the ground truth's junk set.
pub fn mean_average_precision<T: Scalar>(
    index: &DescriptorIndex<T>,
    queries: &[(GlobalDescriptor<T>, QueryGroundTruth)],
    mode: ApMode,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("mAP needs at least one query".into()));
    }
    let per_query = queries
        .iter()
        .map(|(q, gt)| {
            let ranking = index.search(q)?;
            Ok(QueryAp {
                query_id: gt.query_id.clone(),
                ap: average_precision(&ranking, gt, mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = per_query.iter().map(|q| q.ap).sum::<f64>() / per_query.len() as f64;
    Ok(EvalReport { mode, per_query, map })
}

/// Pairs each ground-truth entry with its query descriptor, looked up by
/// the query image name and then by the query id.
pub fn pair_queries<T: Scalar>(
    descs: &[GlobalDescriptor<T>],
    gts: &[QueryGroundTruth],
) -> Result<Vec<(GlobalDescriptor<T>, QueryGroundTruth)>> {
    let by_id: HashMap<&str, &GlobalDescriptor<T>> = descs.iter().map(|d| (d.image_id(), d)).collect();
    gts.iter()
        .map(|gt| {
            let d = by_id
                .get(gt.query_image.as_str())
                .or_else(|| by_id.get(gt.query_id.as_str()))
                .ok_or_else(|| Error::UnknownId(gt.query_image.clone()))?;
            Ok(((*d).clone(), gt.clone()))
        })
        .collect()
}

/// Reads every `<name>_query.txt` in `dir` together with its `_good`, `_ok`
/// and `_junk` lists. Entries come back sorted by query name.
pub fn load_oxford_ground_truth(dir: impl AsRef<Path>) -> Result<Vec<QueryGroundTruth>> {
    let dir = dir.as_ref();
    let read_dir = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = read_dir
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix("_query.txt")).map(str::to_string))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::MalformedGroundTruth(format!("no *_query.txt files in {}", dir.display())));
    }

    names
        .into_iter()
        .map(|name| {
            let read = |suffix: &str| -> Result<String> {
                let p = dir.join(format!("{name}_{suffix}.txt"));
                std::fs::read_to_string(&p)
                    .map_err(|e| Error::MalformedGroundTruth(format!("{}: {e}", p.display())))
            };
            let query = read("query")?;
            let mut fields = query.split_whitespace();
            let image = fields
                .next()
                .ok_or_else(|| Error::MalformedGroundTruth(format!("{name}_query.txt is empty")))?;
            let image = image.strip_prefix("oxc1_").unwrap_or(image).to_string();
            let coords = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::MalformedGroundTruth(format!("{name}_query.txt: bad coordinate `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let crop = match coords.len() {
                0 => None,
                4 => Some([coords[0], coords[1], coords[2], coords[3]]),
                n => {
                    return Err(Error::MalformedGroundTruth(format!(
                        "{name}_query.txt: expected 4 crop coordinates, got {n}"
                    )))
                }
            };
            let list = |text: String| text.split_whitespace().map(str::to_string).collect::<Vec<_>>();
            let mut positives = list(read("good")?);
            positives.extend(list(read("ok")?));
            let junk = list(read("junk")?);
            let mut gt = QueryGroundTruth::new(name.clone(), positives, junk).map_err(|e| match e {
                Error::EmptyPositives(q) => Error::MalformedGroundTruth(format!("query `{q}` has no good/ok images")),
                other => other,
            })?;
            gt.query_image = image;
            gt.crop = crop;
            Ok(gt)
        })
        .collect()
}

/// Writes one query's ground truth in the Oxford layout.
pub fn write_oxford_ground_truth(dir: impl AsRef<Path>, gt: &QueryGroundTruth, good: &[String], ok: &[String]) -> Result<()> {
    let dir = dir.as_ref();
    let write = |suffix: &str, body: String| {
        let p = dir.join(format!("{}_{suffix}.txt", gt.query_id));
        std::fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    let crop = gt.crop.map_or(String::new(), |c| format!(" {} {} {} {}", c[0], c[1], c[2], c[3]));
    write("query", format!("oxc1_{}{crop}\n", gt.query_image))?;
    let lines = |ids: &mut dyn Iterator<Item = &String>| ids.map(|s| format!("{s}\n")).collect::<String>();
    write("good", lines(&mut good.iter()))?;
    write("ok", lines(&mut ok.iter()))?;
    write("junk", lines(&mut gt.junk.iter()))
}
