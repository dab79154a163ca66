//! PCA whitening with dimensionality reduction, learned on a held-out
//! descriptor set.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{GlobalDescriptor, Stage};

pub const WHM_MAGIC: &[u8; 4] = b"WHM1";
pub const WHM_VERSION: u32 = 1;

/// Default regularizer added to eigenvalues before the inverse square root.
pub const DEFAULT_EPS_W: f64 = 1e-8;

/// Whether projected components are rescaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    /// Rows are `eigenvectorᵀ / √(λ + ε_w)`.
    #[default]
    Whiten,
    /// Rows are plain eigenvectors.
    PcaOnly,
}

/// Learned mean, eigenvalues and `K′ × K` projection.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    pub input_dim: usize,
    pub output_dim: usize,
    pub eps_w: f64,
    pub mean: Vec<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Row-major `output_dim × input_dim`.
    pub projection: Vec<f64>,
}

/// Fits PCA whitening on raw-normalized descriptors, keeping the
/// `k_prime` leading principal directions. Covariance uses the `1/N`
/// (maximum likelihood) normalization.
pub fn fit_whitening<T: Scalar>(
    descriptors: &[GlobalDescriptor<T>],
    k_prime: usize,
    eps_w: f64,
    mode: Projection,
) -> Result<WhiteningModel> {
    if descriptors.len() < 2 {
        return Err(Error::InsufficientSamples(descriptors.len()));
    }
    let dim = descriptors[0].dim();
    if let Some(d) = descriptors.iter().find(|d| d.dim() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "training descriptor `{}` has dim {}, expected {dim}",
            d.image_id(),
            d.dim()
        )));
    }
    if let Some(d) = descriptors.iter().find(|d| d.stage() != Stage::RawNormalized) {
        return Err(Error::InvalidArgument(format!(
            "whitening trains on raw-normalized descriptors; `{}` is whitened",
            d.image_id()
        )));
    }
    if k_prime == 0 || k_prime > dim {
        return Err(Error::InvalidArgument(format!("target dim {k_prime} must lie in 1..={dim}")));
    }
    if !(eps_w >= 0.0 && eps_w.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps_w must be non-negative, got {eps_w}")));
    }

    let rows: Vec<Vec<f64>> = descriptors
        .iter()
        .map(|d| d.values().iter().map(|v| v.acc()).collect())
        .collect();
    fit_rows(&rows, k_prime, eps_w, mode)
}

/// Fit on raw sample rows; callers have validated shapes and arguments.
fn fit_rows(rows: &[Vec<f64>], k_prime: usize, eps_w: f64, mode: Projection) -> Result<WhiteningModel> {
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let centered = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c] - mean[c]);
    let mut cov = centered.transpose() * &centered;
    cov /= n;
    // enforce exact symmetry before the symmetric solver
    for r in 0..dim {
        for c in r + 1..dim {
            let avg = 0.5 * (cov[(r, c)] + cov[(c, r)]);
            cov[(r, c)] = avg;
            cov[(c, r)] = avg;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(k_prime);
    let mut projection = Vec::with_capacity(k_prime * dim);
    for &idx in &order[..k_prime] {
        // tiny negative eigenvalues are round-off on a PSD matrix
        let lambda = eig.eigenvalues[idx].max(0.0);
        let col = eig.eigenvectors.column(idx);
        let sign = match col.iter().find(|v| v.abs() > 1e-12) {
            Some(&v) if v < 0.0 => -1.0,
            _ => 1.0,
        };
        let scale = match mode {
            Projection::Whiten => 1.0 / (lambda + eps_w).sqrt(),
            Projection::PcaOnly => 1.0,
        };
        if !scale.is_finite() {
            return Err(Error::InvalidArgument(
                "eps_w = 0 with a zero eigenvalue makes whitening undefined".into(),
            ));
        }
        eigenvalues.push(lambda);
        projection.extend(col.iter().map(|&v| sign * v * scale));
    }

    Ok(WhiteningModel {
        input_dim: dim,
        output_dim: k_prime,
        eps_w,
        mean,
        eigenvalues,
        projection,
    })
}

impl WhiteningModel {
    /// Row `r` of the projection.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.projection[r * self.input_dim..(r + 1) * self.input_dim]
    }

    /// Projection rows rescaled to unit length, i.e. the principal
    /// directions themselves.
    pub fn principal_directions(&self) -> Vec<Vec<f64>> {
        (0..self.output_dim)
            .map(|r| {
                let row = self.row(r);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                row.iter().map(|v| v / norm).collect()
            })
            .collect()
    }

    /// Retained directions whose variance is below `eps_w`.
    pub fn rank_deficient_dims(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < self.eps_w).count()
    }

    /// `projection·(x − mean)` without normalization.
    pub fn project<T: Scalar>(&self, x: &[T]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::ModelDimMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v.acc() - m).collect();
        Ok((0..self.output_dim)
            .map(|r| self.row(r).iter().zip(&centered).map(|(p, c)| p * c).sum())
            .collect())
    }

    /// Projects and re-normalizes a raw-normalized descriptor.
    pub fn apply<T: Scalar>(&self, d: &GlobalDescriptor<T>) -> Result<GlobalDescriptor<T>> {
        let y = self.project(d.values())?;
        GlobalDescriptor::normalized(
            d.image_id(),
            Stage::WhitenedNormalized,
            y.into_iter().map(T::from_acc).collect(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * (self.mean.len() + self.eigenvalues.len() + self.projection.len()));
        out.extend_from_slice(WHM_MAGIC);
        out.extend_from_slice(&WHM_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.output_dim as u32).to_le_bytes());
        out.extend_from_slice(&self.eps_w.to_le_bytes());
        for v in self.mean.iter().chain(&self.eigenvalues).chain(&self.projection) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::malformed(path, reason);
        if bytes.len() < 24 || &bytes[..4] != WHM_MAGIC {
            return Err(bad("missing WHM1 magic or truncated header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != WHM_VERSION {
            return Err(bad(&format!("unsupported model version {version}")));
        }
        let input_dim = u32_at(8) as usize;
        let output_dim = u32_at(12) as usize;
        let eps_w = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if output_dim == 0 || output_dim > input_dim {
            return Err(bad("output dim must lie in 1..=input dim"));
        }
        let floats = input_dim + output_dim + output_dim * input_dim;
        let payload = &bytes[24..];
        if payload.len() != floats * 8 {
            return Err(bad("payload size does not match header dimensions"));
        }
        let mut vals = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mean: Vec<f64> = vals.by_ref().take(input_dim).collect();
        let eigenvalues: Vec<f64> = vals.by_ref().take(output_dim).collect();
        let projection: Vec<f64> = vals.collect();
        Ok(Self {
            input_dim,
            output_dim,
            eps_w,
            mean,
            eigenvalues,
            projection,
        })
    }
}

pub fn save_model(model: &WhiteningModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<WhiteningModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    WhiteningModel::from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_descs(n: usize, dim: usize, seed: u64) -> Vec<GlobalDescriptor<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let v = (0..dim).map(|c| rng.random_range(-1.0..1.0) * (1.0 + c as f64)).collect();
                GlobalDescriptor::normalized(format!("d{i}"), Stage::RawNormalized, v).unwrap()
            })
            .collect()
    }

    /// Covariance with 1/N normalization, computed with plain loops.
    fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / n)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn whitened_training_covariance_is_identity() {
        let descs = random_descs(100, 8, 42);
        let model = fit_whitening(&descs, 4, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        let out: Vec<Vec<f64>> = descs.iter().map(|d| model.project(d.values()).unwrap()).collect();
        let cov = covariance(&out);
        for (a, row) in cov.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-6, "cov[{a}][{b}] = {v}");
            }
        }
    }

    #[test]
    fn retains_largest_eigenvalues_and_orthonormal_directions() {
        let descs = random_descs(60, 6, 9);
        let full = fit_whitening(&descs, 6, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        let part = fit_whitening(&descs, 3, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        assert_eq!(&full.eigenvalues[..3], &part.eigenvalues[..]);
        assert!(full.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        // eigenvalue sum equals the covariance trace
        let cov = covariance(&descs.iter().map(|d| d.values().to_vec()).collect::<Vec<_>>());
        let trace: f64 = (0..6).map(|i| cov[i][i]).sum();
        assert!((full.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-12);

        let dirs = full.principal_directions();
        for a in 0..6 {
            for b in 0..6 {
                let dot: f64 = dirs[a].iter().zip(&dirs[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-6);
            }
            let first = dirs[a].iter().find(|v| v.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn isotropic_full_rank_fixed_point() {
        // ±e_c over all axes: zero mean, covariance I/4 (1/N normalization, N = 8, d = 4)
        let mut descs = Vec::new();
        for c in 0..4 {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0f64; 4];
                v[c] = s;
                descs.push(GlobalDescriptor::normalized(format!("{c}{s}"), Stage::RawNormalized, v).unwrap());
            }
        }
        let model = fit_whitening(&descs, 4, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        assert!(model.mean.iter().all(|m| m.abs() < 1e-15));
        let out: Vec<Vec<f64>> = descs.iter().map(|d| model.project(d.values()).unwrap()).collect();
        let cov = covariance(&out);
        for (a, row) in cov.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-6);
            }
        }
        let y = model.apply(&descs[0]).unwrap();
        assert!((y.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toy_projection_matches_hand_arithmetic() {
        let model = WhiteningModel {
            input_dim: 4,
            output_dim: 2,
            eps_w: 0.0,
            mean: vec![0.5, 0.0, 0.0, 0.5],
            eigenvalues: vec![4.0, 1.0],
            projection: vec![0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        };
        let d = GlobalDescriptor::normalized("x", Stage::RawNormalized, vec![0.5f64, 0.5, 0.5, 0.5]).unwrap();
        // x − mean = (0, .5, .5, 0); projection → (0, .5); normalized → (0, 1)
        assert_eq!(model.project(d.values()).unwrap(), vec![0.0, 0.5]);
        assert_eq!(model.apply(&d).unwrap().values(), &[0.0, 1.0]);

        let at_mean = GlobalDescriptor::normalized("m", Stage::RawNormalized, vec![1.0f64, 0.0, 0.0, 1.0]).unwrap();
        let model = WhiteningModel {
            mean: at_mean.values().to_vec(),
            ..model
        };
        assert!(matches!(model.apply(&at_mean), Err(Error::DegenerateDescriptor { .. })));
    }

    #[test]
    fn errors() {
        let descs = random_descs(1, 4, 1);
        assert!(matches!(
            fit_whitening(&descs, 2, DEFAULT_EPS_W, Projection::Whiten),
            Err(Error::InsufficientSamples(1))
        ));
        let descs = random_descs(10, 8, 1);
        let model = fit_whitening(&descs, 8, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        let wide = random_descs(1, 512, 2);
        assert!(matches!(
            model.apply(&wide[0]),
            Err(Error::ModelDimMismatch { expected: 8, actual: 512 })
        ));
        assert!(fit_whitening(&descs, 9, DEFAULT_EPS_W, Projection::Whiten).is_err());
    }

    #[test]
    fn fewer_samples_than_dims_is_regularized() {
        let descs = random_descs(5, 16, 3);
        let model = fit_whitening(&descs, 16, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        assert!(model.rank_deficient_dims() >= 11);
        assert!(model.projection.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn scaling_training_and_query_uniformly_keeps_output() {
        let descs = random_descs(40, 5, 4);
        let rows: Vec<Vec<f64>> = descs.iter().map(|d| d.values().to_vec()).collect();
        let query = random_descs(1, 5, 5)[0].values().to_vec();
        let unit = |v: Vec<f64>| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect::<Vec<_>>()
        };
        let base = unit(fit_rows(&rows, 3, 0.0, Projection::Whiten).unwrap().project(&query).unwrap());
        for c in [0.01, 3.0, 250.0] {
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
            let q: Vec<f64> = query.iter().map(|v| v * c).collect();
            let out = unit(fit_rows(&scaled, 3, 0.0, Projection::Whiten).unwrap().project(&q).unwrap());
            for (a, b) in base.iter().zip(&out) {
                assert!((a - b).abs() < 1e-9, "c = {c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pca_only_rows_are_unit() {
        let descs = random_descs(30, 6, 8);
        let model = fit_whitening(&descs, 4, DEFAULT_EPS_W, Projection::PcaOnly).unwrap();
        for r in 0..4 {
            let n: f64 = model.row(r).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.whm");
        let model = fit_whitening(&random_descs(20, 8, 6), 5, DEFAULT_EPS_W, Projection::Whiten).unwrap();
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes(), model.to_bytes());

        let bytes = model.to_bytes();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::MalformedFile { .. })));

        let mut bad_version = bytes.clone();
        bad_version[4] = 2;
        std::fs::write(&path, &bad_version).unwrap();
        assert!(matches!(load_model(&path), Err(Error::MalformedFile { .. })));
    }
}
