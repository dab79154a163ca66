//! Diagnostic renderings: heat maps of spatial maps with an optional
//! center marker (binary PPM), elementwise weighted responses, and
//! correlation matrices of per-image channel vectors (CSV).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ChannelVector, SpatialMap};

const MARKER: [u8; 3] = [255, 255, 0];

/// RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRendering {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl HeatmapRendering {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = 3 * (y * self.width + x);
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }

    /// Binary PPM (P6) encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

/// Blue (low) to red (high) linear ramp for `t ∈ [0, 1]`.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8]
}

/// Renders `map` with `scale × scale` pixel blocks per cell, colors
/// normalized to the map's `[min, max]` (a constant map renders at the
/// ramp midpoint). `center` is a 1-based grid position marked by a 3×3
/// yellow dot.
pub fn render_heatmap<T: Scalar>(map: &SpatialMap<T>, center: Option<(f64, f64)>, scale: usize) -> HeatmapRendering {
    let scale = scale.max(1);
    let (lo, hi) = map.min_max();
    let (lo, hi) = (lo.acc(), hi.acc());
    let (width, height) = (map.width() * scale, map.height() * scale);
    let mut rgb = vec![0u8; 3 * width * height];
    for y in 0..height {
        for x in 0..width {
            let v = map.values()[(y / scale) * map.width() + x / scale].acc();
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let o = 3 * (y * width + x);
            rgb[o..o + 3].copy_from_slice(&ramp(t));
        }
    }
    let mut img = HeatmapRendering { width, height, rgb };
    if let Some((ci, cj)) = center {
        let px = (((cj - 0.5) * scale as f64).floor().max(0.0) as usize).min(width - 1);
        let py = (((ci - 0.5) * scale as f64).floor().max(0.0) as usize).min(height - 1);
        for y in py.saturating_sub(1)..=(py + 1).min(height - 1) {
            for x in px.saturating_sub(1)..=(px + 1).min(width - 1) {
                let o = 3 * (y * width + x);
                img.rgb[o..o + 3].copy_from_slice(&MARKER);
            }
        }
    }
    img
}

/// Elementwise product of two maps of equal shape.
pub fn weighted_response<T: Scalar>(s_prime: &SpatialMap<T>, s: &SpatialMap<T>) -> Result<SpatialMap<T>> {
    if (s_prime.height(), s_prime.width()) != (s.height(), s.width()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            s_prime.height(),
            s_prime.width(),
            s.height(),
            s.width()
        )));
    }
    let values = s_prime.values().iter().zip(s.values()).map(|(&a, &b)| a * b).collect();
    SpatialMap::new(s.height(), s.width(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMetric {
    #[default]
    Pearson,
    Cosine,
}

/// Symmetric `n × n` similarity matrix over per-image channel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n() + b]
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "id,{}", self.ids.join(","))?;
        for (a, id) in self.ids.iter().enumerate() {
            let row: Vec<String> = (0..self.n()).map(|b| format!("{:.6}", self.get(a, b))).collect();
            writeln!(w, "{id},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Pairwise correlation of equally long vectors. Pearson needs every
/// vector to have nonzero variance; cosine needs nonzero norm.
pub fn channel_correlation<T: Scalar>(
    vectors: &[(String, ChannelVector<T>)],
    metric: CorrelationMetric,
) -> Result<CorrelationMatrix> {
    if vectors.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two vectors".into()));
    }
    let len = vectors[0].1.len();
    let mut unit = Vec::with_capacity(vectors.len());
    for (n, (id, v)) in vectors.iter().enumerate() {
        if v.len() != len {
            return Err(Error::DimensionMismatch(format!("vector `{id}` has length {}, expected {len}", v.len())));
        }
        let mut x: Vec<f64> = v.values().iter().map(|x| x.acc()).collect();
        if metric == CorrelationMetric::Pearson {
            let mean = x.iter().sum::<f64>() / len as f64;
            x.iter_mut().for_each(|e| *e -= mean);
        }
        let norm = x.iter().map(|e| e * e).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::ZeroVariance(n));
        }
        x.iter_mut().for_each(|e| *e /= norm);
        unit.push(x);
    }
    let n = unit.len();
    let mut values = vec![0.0; n * n];
    for a in 0..n {
        values[a * n + a] = 1.0;
        for b in a + 1..n {
            let r = unit[a].iter().zip(&unit[b]).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0);
            values[a * n + b] = r;
            values[b * n + a] = r;
        }
    }
    Ok(CorrelationMatrix {
        ids: vectors.iter().map(|(id, _)| id.clone()).collect(),
        values,
    })
}

/// Writes one value per line.
pub fn write_vector_csv<T: Scalar>(v: &ChannelVector<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body: String = v.values().iter().map(|x| format!("{:e}\n", x.acc())).collect();
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_vector_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<ChannelVector<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map(T::from_acc)
                .map_err(|_| Error::malformed(path, format!("not a number: `{l}`")))
        })
        .collect::<Result<Vec<_>>>()
        .map(ChannelVector::new)
}
