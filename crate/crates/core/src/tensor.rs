//! Shared data model: feature tensors, spatial maps, channel vectors and
//! global descriptors.
//!
//! Math-facing accessors use 1-based grid coordinates: cell `(i, j)` with
//! `i ∈ 1..=height`, `j ∈ 1..=width` sits at real position `(i, j)`.
//! Storage is 0-based, channel-major, row-major.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `K × H × W` activation tensor for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<T> {
    image_id: String,
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> FeatureTensor<T> {
    /// Builds a tensor from `(k, i, j)`-ordered values (k slowest).
    pub fn new(
        image_id: impl Into<String>,
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<T>,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{channels}x{height}x{width} tensor needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self {
            image_id: image_id.into(),
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(image_id: impl Into<String>, channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(image_id, channels, height, width, vec![T::zero(); channels * height * width])
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn set_image_id(&mut self, id: impl Into<String>) {
        self.image_id = id.into();
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Value at 1-based `(k, i, j)`.
    pub fn at(&self, k: usize, i: usize, j: usize) -> T {
        debug_assert!(k >= 1 && i >= 1 && j >= 1);
        self.values[((k - 1) * self.height + (i - 1)) * self.width + (j - 1)]
    }

    /// The `H·W` row-major plane of 0-based channel `k`.
    pub fn channel(&self, k: usize) -> &[T] {
        let n = self.cells();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn channel_planes(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.cells())
    }

    /// Elementwise `a·self + b·other`.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self::new(self.image_id.clone(), self.channels, self.height, self.width, values)
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        let values = self.values.iter().map(|&x| c * x).collect();
        Self::new(self.image_id.clone(), self.channels, self.height, self.width, values)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Geometric center of an `h × w` grid in 1-based coordinates.
pub fn grid_center(h: usize, w: usize) -> (f64, f64) {
    ((h as f64 + 1.0) / 2.0, (w as f64 + 1.0) / 2.0)
}

/// `H × W` real matrix over the feature grid, row-major. Holds both the
/// aggregated response map and Gaussian weight maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMap<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> SpatialMap<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width} map with {} values",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, v: T) -> Self {
        Self {
            height,
            width,
            values: vec![v; height * width],
        }
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self { height, width, values }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Value at 1-based `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert!(i >= 1 && j >= 1);
        self.values[(i - 1) * self.width + (j - 1)]
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::from_parts_unchecked(self.height, self.width, self.values.iter().map(|&v| c * v).collect())
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }
}

/// Length-`K` real vector: channel sums Ω, element-value items b,
/// sparsity items and channel weights all share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector<T>(Vec<T>);

impl<T: Scalar> ChannelVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> From<Vec<T>> for ChannelVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// Pipeline stage a descriptor was produced at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    RawNormalized,
    WhitenedNormalized,
}

/// Unit-norm global image descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDescriptor<T> {
    image_id: String,
    stage: Stage,
    values: Vec<T>,
}

impl<T: Scalar> GlobalDescriptor<T> {
    /// L2-normalizes `values`. Fails with `DegenerateDescriptor` on a zero
    /// (or non-finite) norm.
    pub fn normalized(image_id: impl Into<String>, stage: Stage, mut values: Vec<T>) -> Result<Self> {
        let image_id = image_id.into();
        let norm = l2_norm(&values);
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::DegenerateDescriptor { image_id });
        }
        let inv = T::from_acc(norm);
        for v in &mut values {
            *v = *v / inv;
        }
        Ok(Self { image_id, stage, values })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn dot(&self, other: &[T]) -> f64 {
        dot(&self.values, other)
    }
}

pub(crate) fn l2_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.acc() * x.acc()).sum::<f64>().sqrt()
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.acc() * y.acc()).sum()
}
