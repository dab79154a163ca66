//! Exact cosine-similarity search over unit-norm descriptors.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, GlobalDescriptor};

/// Flat `N × dim` matrix of unit-norm rows with their image ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorIndex<T> {
    dim: usize,
    ids: Vec<String>,
    matrix: Vec<T>,
}

/// `(image_id, score)` pairs by non-increasing score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResult {
    pub entries: Vec<(String, f64)>,
}

impl RankedResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

impl<T: Scalar> DescriptorIndex<T> {
    pub fn build(descs: &[GlobalDescriptor<T>]) -> Result<Self> {
        let dim = descs.first().map_or(0, |d| d.dim());
        let mut seen = HashSet::with_capacity(descs.len());
        let mut ids = Vec::with_capacity(descs.len());
        let mut matrix = Vec::with_capacity(descs.len() * dim);
        for d in descs {
            if d.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "descriptor `{}` has dim {}, index has dim {dim}",
                    d.image_id(),
                    d.dim()
                )));
            }
            if (d.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "descriptor `{}` is not unit norm ({})",
                    d.image_id(),
                    d.norm()
                )));
            }
            if !seen.insert(d.image_id()) {
                return Err(Error::DuplicateId(d.image_id().to_string()));
            }
            ids.push(d.image_id().to_string());
            matrix.extend_from_slice(d.values());
        }
        Ok(Self { dim, ids, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, n: usize) -> &[T] {
        &self.matrix[n * self.dim..(n + 1) * self.dim]
    }

    /// Ranks every indexed image by dot product with `q`, descending; equal
    /// scores are ordered by ascending image id.
    pub fn search(&self, q: &GlobalDescriptor<T>) -> Result<RankedResult> {
        if q.dim() != self.dim && !self.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "query dim {} vs index dim {}",
                q.dim(),
                self.dim
            )));
        }
        let mut entries: Vec<(String, f64)> = self
            .ids
            .iter()
            .enumerate()
            .map(|(n, id)| (id.clone(), dot(q.values(), self.row(n))))
            .collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(RankedResult { entries })
    }
}
