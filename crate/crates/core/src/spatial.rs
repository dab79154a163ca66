//! Spatial weighting: the aggregated response map, adaptive center
//! selection over the strongest responses, and the Gaussian weight map.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{grid_center, FeatureTensor, SpatialMap};

/// Fraction of grid cells treated as "large responses", in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
pub struct AlphaFraction(f64);

impl AlphaFraction {
    pub const FULL: AlphaFraction = AlphaFraction(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Number of cells selected out of `cells`: `max(1, round(α·cells))`,
    /// rounding half away from zero.
    pub fn cell_count(self, cells: usize) -> usize {
        ((self.0 * cells as f64).round() as usize).clamp(1, cells)
    }
}

impl Default for AlphaFraction {
    fn default() -> Self {
        Self(0.1)
    }
}

/// How the Gaussian's standard deviation is derived from the grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRule {
    /// Half the distance from the grid center to the farthest edge:
    /// `max(H, W) / 4`.
    #[default]
    Edge,
    /// Half the distance from the grid center to a corner:
    /// `½·√((H/2)² + (W/2)²)`.
    Corner,
}

/// Mean and standard deviation of the isotropic Gaussian, in 1-based grid
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub center_i: f64,
    pub center_j: f64,
    pub sigma: f64,
}

impl GaussianParams {
    pub fn new(center: (f64, f64), sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            center_i: center.0,
            center_j: center.1,
            sigma,
        })
    }
}

/// Sum over channels at every cell: `S′(i, j) = Σ_k X(k, i, j)`.
pub fn response_map<T: Scalar>(t: &FeatureTensor<T>) -> SpatialMap<T> {
    let mut acc = vec![0.0f64; t.cells()];
    for plane in t.channel_planes() {
        for (a, &x) in acc.iter_mut().zip(plane) {
            *a += x.acc();
        }
    }
    SpatialMap::from_parts_unchecked(t.height(), t.width(), acc.into_iter().map(T::from_acc).collect())
}

/// Centroid of the top `α` fraction of cells ranked by response, ties going
/// to the smaller row-major index.
pub fn select_center<T: Scalar>(response: &SpatialMap<T>, alpha: AlphaFraction) -> (f64, f64) {
    let values = response.values();
    let n = alpha.cell_count(values.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ascending index among equal values
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let w = response.width();
    let (si, sj) = order[..n].iter().fold((0.0f64, 0.0f64), |(si, sj), &idx| {
        (si + (idx / w + 1) as f64, sj + (idx % w + 1) as f64)
    });
    (si / n as f64, sj / n as f64)
}

/// Standard deviation for an `h × w` grid. A single-cell grid has no
/// extent to measure, so it falls back to 0.5.
pub fn default_sigma(h: usize, w: usize, rule: SigmaRule) -> f64 {
    if h <= 1 && w <= 1 {
        return 0.5;
    }
    let (h, w) = (h as f64, w as f64);
    match rule {
        SigmaRule::Edge => h.max(w) / 4.0,
        SigmaRule::Corner => 0.5 * ((h / 2.0).powi(2) + (w / 2.0).powi(2)).sqrt(),
    }
}

/// Gaussian density `1/(2πσ²)·exp(−((i−i₀)² + (j−j₀)²)/(2σ²))` at every cell.
/// Not renormalized over the grid.
pub fn gaussian_map<T: Scalar>(h: usize, w: usize, p: GaussianParams) -> SpatialMap<T> {
    let two_var = 2.0 * p.sigma * p.sigma;
    let peak = 1.0 / (PI * two_var);
    let mut values = Vec::with_capacity(h * w);
    for i in 1..=h {
        let di = i as f64 - p.center_i;
        for j in 1..=w {
            let dj = j as f64 - p.center_j;
            values.push(T::from_acc(peak * (-(di * di + dj * dj) / two_var).exp()));
        }
    }
    SpatialMap::from_parts_unchecked(h, w, values)
}

/// Gaussian centered on the grid's geometric center.
pub fn fixed_gaussian<T: Scalar>(h: usize, w: usize, rule: SigmaRule) -> SpatialMap<T> {
    gaussian_map(
        h,
        w,
        GaussianParams {
            center_i: grid_center(h, w).0,
            center_j: grid_center(h, w).1,
            sigma: default_sigma(h, w, rule),
        },
    )
}

/// Parameters of the adaptive Gaussian for `t`.
pub fn adaptive_params<T: Scalar>(t: &FeatureTensor<T>, alpha: AlphaFraction, rule: SigmaRule) -> GaussianParams {
    let (center_i, center_j) = select_center(&response_map(t), alpha);
    GaussianParams {
        center_i,
        center_j,
        sigma: default_sigma(t.height(), t.width(), rule),
    }
}

/// Gaussian weight map centered on the centroid of the top-`α` responses.
pub fn adaptive_gaussian<T: Scalar>(t: &FeatureTensor<T>, alpha: AlphaFraction, rule: SigmaRule) -> SpatialMap<T> {
    gaussian_map(t.height(), t.width(), adaptive_params(t, alpha, rule))
}
