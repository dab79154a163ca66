//! Reader for NPY v1.0 files holding a 3-D floating point array with axes
//! `(K, H, W)` in C order.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::FeatureTensor;

pub(crate) const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq)]
enum DType {
    F4 { little: bool },
    F8 { little: bool },
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F4 { .. } => 4,
            DType::F8 { .. } => 8,
        }
    }
}

fn bad(reason: impl Into<String>) -> Error {
    Error::malformed("<npy>", reason)
}

pub fn decode_npy<T: Scalar>(bytes: &[u8], image_id: String) -> Result<FeatureTensor<T>> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(bad("missing NPY magic"));
    }
    if (bytes[6], bytes[7]) != (1, 0) {
        return Err(bad(format!("unsupported NPY version {}.{}", bytes[6], bytes[7])));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(bad("truncated header"));
    }
    let header = std::str::from_utf8(&bytes[10..data_start]).map_err(|_| bad("header is not ASCII"))?;

    let dtype = match dict_value(header, "descr")?.trim_matches(|c| c == '\'' || c == '"') {
        "<f4" => DType::F4 { little: true },
        ">f4" => DType::F4 { little: false },
        "<f8" => DType::F8 { little: true },
        ">f8" => DType::F8 { little: false },
        other => return Err(bad(format!("unsupported dtype {other}"))),
    };
    match dict_value(header, "fortran_order")? {
        "False" => {}
        "True" => return Err(bad("fortran-order arrays are not supported")),
        other => return Err(bad(format!("bad fortran_order value {other}"))),
    }
    let shape = parse_shape(dict_value(header, "shape")?)?;
    let [k, h, w] = shape[..] else {
        return Err(bad(format!("expected a 3-D array, got shape {shape:?}")));
    };

    let payload = &bytes[data_start..];
    let declared = k * h * w;
    if payload.len() != declared * dtype.width() {
        return Err(Error::DimensionMismatch(format!(
            "shape ({k}, {h}, {w}) needs {} bytes, payload holds {}",
            declared * dtype.width(),
            payload.len()
        )));
    }
    let values = match dtype {
        DType::F4 { little } => payload
            .chunks_exact(4)
            .map(|c| {
                let b: [u8; 4] = c.try_into().unwrap();
                T::from_f32_lossless(if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) })
            })
            .collect(),
        DType::F8 { little } => payload
            .chunks_exact(8)
            .map(|c| {
                let b: [u8; 8] = c.try_into().unwrap();
                T::from_acc(if little { f64::from_le_bytes(b) } else { f64::from_be_bytes(b) })
            })
            .collect(),
    };
    FeatureTensor::new(image_id, k, h, w, values)
}

/// Raw text of the value for `key` in the header's Python dict literal.
fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let needle_sq = format!("'{key}'");
    let needle_dq = format!("\"{key}\"");
    let start = header
        .find(&needle_sq)
        .map(|p| p + needle_sq.len())
        .or_else(|| header.find(&needle_dq).map(|p| p + needle_dq.len()))
        .ok_or_else(|| bad(format!("header lacks `{key}`")))?;
    let rest = header[start..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| bad(format!("no ':' after `{key}`")))?
        .trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|p| p + 1)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| bad(format!("unterminated value for `{key}`")))?;
    Ok(rest[..end].trim())
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let inner = s
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| bad(format!("bad shape {s}")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<usize>().map_err(|_| bad(format!("bad shape entry {p}"))))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Builds an NPY v1.0 byte stream the way numpy does: header padded with
    /// spaces and terminated by '\n' so data starts on a 64-byte boundary.
    pub(crate) fn npy_bytes(descr: &str, fortran: bool, shape: &[usize], payload: &[u8]) -> Vec<u8> {
        let dims = shape.iter().map(|d| format!("{d}, ")).collect::<String>();
        let shape_txt = if shape.len() == 1 {
            format!("({},)", shape[0])
        } else {
            format!("({})", dims.trim_end_matches(", "))
        };
        let mut header = format!(
            "{{'descr': '{descr}', 'fortran_order': {}, 'shape': {shape_txt}, }}",
            if fortran { "True" } else { "False" }
        );
        while (10 + header.len() + 1) % 64 != 0 {
            header.push(' ');
        }
        header.push('\n');
        let mut out = NPY_MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    fn f4_payload(v: &[f32]) -> Vec<u8> {
        v.iter().flat_map(|x| x.to_le_bytes()).collect()
    }

    #[test]
    fn reads_c_order_f4() {
        let vals: Vec<f32> = (0..24).map(|x| x as f32 * 0.5).collect();
        let bytes = npy_bytes("<f4", false, &[2, 3, 4], &f4_payload(&vals));
        let t: FeatureTensor<f64> = decode_npy(&bytes, "n".into()).unwrap();
        assert_eq!(t.shape(), (2, 3, 4));
        assert_eq!(t.at(2, 3, 4), 11.5);
        assert_eq!(t.at(1, 2, 1), 2.0);
    }

    #[test]
    fn reads_f8() {
        let payload: Vec<u8> = [1.25f64, -2.0].iter().flat_map(|x| x.to_le_bytes()).collect();
        let bytes = npy_bytes("<f8", false, &[1, 1, 2], &payload);
        let t: FeatureTensor<f64> = decode_npy(&bytes, "n".into()).unwrap();
        assert_eq!(t.values(), &[1.25, -2.0]);
    }

    #[test]
    fn rejects_fortran_order_and_integer_dtype() {
        let bytes = npy_bytes("<f4", true, &[1, 1, 1], &f4_payload(&[1.0]));
        assert!(matches!(decode_npy::<f32>(&bytes, "n".into()), Err(Error::MalformedFile { .. })));
        let bytes = npy_bytes("<i4", false, &[1, 1, 1], &[0, 0, 0, 0]);
        assert!(matches!(decode_npy::<f32>(&bytes, "n".into()), Err(Error::MalformedFile { .. })));
    }

    #[test]
    fn rejects_wrong_rank_and_short_payload() {
        let bytes = npy_bytes("<f4", false, &[4], &f4_payload(&[1.0; 4]));
        assert!(matches!(decode_npy::<f32>(&bytes, "n".into()), Err(Error::MalformedFile { .. })));
        let bytes = npy_bytes("<f4", false, &[2, 2, 2], &f4_payload(&[1.0; 7]));
        assert!(matches!(decode_npy::<f32>(&bytes, "n".into()), Err(Error::DimensionMismatch(_))));
    }
}
