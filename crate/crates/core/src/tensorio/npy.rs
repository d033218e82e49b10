//! NPY v1.0 container, little-endian `float32` / `int32`, C order.

use std::io::Write;
use std::path::Path;

use super::{IntTensor, Tensor, TensorError};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

/// Array payload read from an NPY file.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyArray {
    F32(Tensor),
    I32(IntTensor),
}

fn header(descr: &str, shape: &[usize]) -> Vec<u8> {
    let dims = match shape.len() {
        0 => "()".to_string(),
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

pub fn encode_f32(t: &Tensor) -> Vec<u8> {
    let mut out = header("<f4", t.shape());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_i32(t: &IntTensor) -> Vec<u8> {
    let mut out = header("<i4", t.shape());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Extracts the value of `'key':` from a Python dict literal.
fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str, TensorError> {
    let pat = format!("'{key}':");
    let start = dict
        .find(&pat)
        .ok_or_else(|| TensorError::Header(format!("missing key '{key}'")))?
        + pat.len();
    let rest = dict[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else {
        rest.find([',', '}'])
    }
    .ok_or_else(|| TensorError::Header(format!("unterminated value for '{key}'")))?;
    Ok(rest[..end].trim())
}

fn parse_shape(text: &str) -> Result<Vec<usize>, TensorError> {
    let inner = text
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| TensorError::Header(format!("bad shape {text}")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| TensorError::Header(format!("bad shape extent {s}")))
        })
        .collect()
}

pub fn decode(bytes: &[u8]) -> Result<NpyArray, TensorError> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(TensorError::Magic);
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(TensorError::Version(bytes[6], bytes[7]));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = 10 + header_len;
    if bytes.len() < body {
        return Err(TensorError::Truncated {
            expected: body,
            found: bytes.len(),
        });
    }
    let dict = std::str::from_utf8(&bytes[10..body])
        .map_err(|_| TensorError::Header("header is not ASCII".into()))?;

    let descr = dict_value(dict, "descr")?.trim_matches('\'');
    match dict_value(dict, "fortran_order")? {
        "False" => {}
        "True" => return Err(TensorError::UnsupportedOrder),
        other => return Err(TensorError::Header(format!("bad fortran_order {other}"))),
    }
    let shape = parse_shape(dict_value(dict, "shape")?)?;
    let count: usize = shape.iter().product();
    let payload = &bytes[body..];
    if payload.len() < count * 4 {
        return Err(TensorError::Truncated {
            expected: body + count * 4,
            found: bytes.len(),
        });
    }
    let words = payload[..count * 4].chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
    match descr {
        "<f4" => Tensor::new(shape, words.map(f32::from_le_bytes).collect()).map(NpyArray::F32),
        "<i4" => IntTensor::new(shape, words.map(i32::from_le_bytes).collect()).map(NpyArray::I32),
        other => Err(TensorError::UnsupportedDtype(other.to_string())),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, TensorError> {
    std::fs::read(path).map_err(|source| TensorError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), TensorError> {
    let io = |source| TensorError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray, TensorError> {
    decode(&read_bytes(path.as_ref())?)
}

/// Reads a `float32` tensor.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorError> {
    match read_npy(path)? {
        NpyArray::F32(t) => Ok(t),
        NpyArray::I32(_) => Err(TensorError::UnsupportedDtype("<i4 (expected <f4)".into())),
    }
}

/// Reads an `int32` tensor.
pub fn read_int_tensor(path: impl AsRef<Path>) -> Result<IntTensor, TensorError> {
    match read_npy(path)? {
        NpyArray::I32(t) => Ok(t),
        NpyArray::F32(_) => Err(TensorError::UnsupportedDtype("<f4 (expected <i4)".into())),
    }
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<(), TensorError> {
    write_bytes(path.as_ref(), &encode_f32(t))
}

pub fn write_int_tensor(path: impl AsRef<Path>, t: &IntTensor) -> Result<(), TensorError> {
    write_bytes(path.as_ref(), &encode_i32(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeros_round_trip() {
        let t = Tensor::zeros(vec![2, 3]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.npy");
        write_tensor(&path, &t).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn header_is_aligned_and_numpy_shaped() {
        let bytes = encode_f32(&Tensor::zeros(vec![4]));
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        let dict = std::str::from_utf8(&bytes[10..10 + hlen]).unwrap();
        assert!(dict.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }"));
        assert!(dict.ends_with('\n'));
    }

    fn replace(mut bytes: Vec<u8>, from: &[u8], to: &[u8]) -> Vec<u8> {
        let at = bytes.windows(from.len()).position(|w| w == from).unwrap();
        bytes[at..at + to.len()].copy_from_slice(to);
        bytes
    }

    #[test]
    fn fortran_order_rejected() {
        let bytes = replace(encode_f32(&Tensor::zeros(vec![2, 2])), b"False", b"True ");
        assert!(matches!(decode(&bytes), Err(TensorError::UnsupportedOrder)));
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(matches!(decode(b"NOTNUMPYATALL"), Err(TensorError::Magic)));
        let bytes = encode_f32(&Tensor::zeros(vec![8]));
        assert!(matches!(
            decode(&bytes[..bytes.len() - 3]),
            Err(TensorError::Truncated { .. })
        ));
    }

    #[test]
    fn unsupported_dtype() {
        let bytes = replace(encode_f32(&Tensor::zeros(vec![1])), b"<f4", b"<f8");
        assert!(matches!(
            decode(&bytes),
            Err(TensorError::UnsupportedDtype(_))
        ));
    }

    #[test]
    fn random_tensor_file_is_deterministic() {
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let data = (0..128 * 128).map(|_| rng.random::<f32>()).collect();
            encode_f32(&Tensor::new(vec![128, 128], data).unwrap())
        };
        assert_eq!(make(), make());
    }

    proptest! {
        #[test]
        fn round_trip_any_tensor(
            shape in prop::collection::vec(1usize..5, 0..4),
            seed in any::<u64>(),
        ) {
            let n: usize = shape.iter().product();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = Tensor::new(shape.clone(), (0..n).map(|_| rng.random_range(-1e6f32..1e6)).collect()).unwrap();
            let i = IntTensor::new(shape, (0..n).map(|_| rng.random::<i32>()).collect()).unwrap();
            prop_assert_eq!(decode(&encode_f32(&f)).unwrap(), NpyArray::F32(f));
            prop_assert_eq!(decode(&encode_i32(&i)).unwrap(), NpyArray::I32(i));
        }
    }
}
