//! Just enough of the MATLAB level-5 MAT format to read numeric arrays.

use std::io::Read;
use std::path::Path;

use flate2::read::ZlibDecoder;

use crate::{Error, Result};

const MI_INT8: u32 = 1;
const MI_UINT8: u32 = 2;
const MI_INT16: u32 = 3;
const MI_UINT16: u32 = 4;
const MI_INT32: u32 = 5;
const MI_UINT32: u32 = 6;
const MI_SINGLE: u32 = 7;
const MI_DOUBLE: u32 = 9;
const MI_MATRIX: u32 = 14;
const MI_COMPRESSED: u32 = 15;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MatData {
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl MatData {
    pub fn len(&self) -> usize {
        match self {
            MatData::U8(v) => v.len(),
            MatData::F64(v) => v.len(),
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            MatData::U8(v) => f64::from(v[i]),
            MatData::F64(v) => v[i],
        }
    }
}

/// A numeric array in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MatArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: MatData,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn corrupt(&self, reason: &str) -> Error {
        Error::CorruptData {
            path: self.path.to_path_buf(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.buf.get(self.pos..self.pos + 4).ok_or_else(|| self.corrupt("truncated tag"))?;
        self.pos += 4;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads one data element, returning its type and payload.
    fn element(&mut self) -> Result<(u32, &'a [u8])> {
        let first = self.u32()?;
        if first >> 16 != 0 {
            // Small element: type and size packed into one word, data in the next.
            let ty = first & 0xffff;
            let n = (first >> 16) as usize;
            if n > 4 {
                return Err(self.corrupt("small element larger than 4 bytes"));
            }
            let data = self.buf.get(self.pos..self.pos + n).ok_or_else(|| self.corrupt("truncated element"))?;
            self.pos += 4;
            return Ok((ty, data));
        }
        let n = self.u32()? as usize;
        let data = self.buf.get(self.pos..self.pos + n).ok_or_else(|| self.corrupt("truncated element"))?;
        self.pos += n;
        if first != MI_COMPRESSED {
            self.pos += (8 - n % 8) % 8;
        }
        Ok((first, data))
    }

    fn done(&self) -> bool {
        self.pos >= self.buf.len()
    }
}

fn numeric(ty: u32, bytes: &[u8], path: &Path) -> Result<MatData> {
    macro_rules! conv {
        ($t:ty, $w:expr) => {
            MatData::F64(
                bytes
                    .chunks_exact($w)
                    .map(|c| <$t>::from_le_bytes(c.try_into().expect("chunk width")) as f64)
                    .collect(),
            )
        };
    }
    Ok(match ty {
        MI_UINT8 => MatData::U8(bytes.to_vec()),
        MI_INT8 => conv!(i8, 1),
        MI_INT16 => conv!(i16, 2),
        MI_UINT16 => conv!(u16, 2),
        MI_INT32 => conv!(i32, 4),
        MI_UINT32 => conv!(u32, 4),
        MI_SINGLE => conv!(f32, 4),
        MI_DOUBLE => conv!(f64, 8),
        other => {
            return Err(Error::CorruptData {
                path: path.to_path_buf(),
                reason: format!("unsupported numeric type {other}"),
            })
        }
    })
}

fn parse_matrix(payload: &[u8], path: &Path) -> Result<Option<MatArray>> {
    let mut c = Cursor { buf: payload, pos: 0, path };
    let (_, flags) = c.element()?;
    let class = flags.first().copied().unwrap_or(0);
    // Only numeric classes (double..uint64) are of interest.
    if !(6..=15).contains(&class) {
        return Ok(None);
    }
    let (_, dims_raw) = c.element()?;
    let dims: Vec<usize> = dims_raw
        .chunks_exact(4)
        .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]).max(0) as usize)
        .collect();
    let (_, name) = c.element()?;
    let (ty, real) = c.element()?;
    let data = numeric(ty, real, path)?;
    let expected: usize = dims.iter().product();
    if data.len() != expected {
        return Err(Error::CorruptData {
            path: path.to_path_buf(),
            reason: format!("array has {} values, dims say {expected}", data.len()),
        });
    }
    Ok(Some(MatArray {
        name: String::from_utf8_lossy(name).into_owned(),
        dims,
        data,
    }))
}

fn collect(buf: &[u8], path: &Path, out: &mut Vec<MatArray>) -> Result<()> {
    let mut c = Cursor { buf, pos: 0, path };
    while !c.done() {
        let (ty, payload) = c.element()?;
        match ty {
            MI_COMPRESSED => {
                let mut inflated = Vec::new();
                ZlibDecoder::new(payload)
                    .read_to_end(&mut inflated)
                    .map_err(|e| Error::CorruptData {
                        path: path.to_path_buf(),
                        reason: format!("zlib: {e}"),
                    })?;
                collect(&inflated, path, out)?;
            }
            MI_MATRIX => {
                if let Some(a) = parse_matrix(payload, path)? {
                    out.push(a);
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub(crate) fn read_mat(path: &Path) -> Result<Vec<MatArray>> {
    let bytes = super::read_file(path)?;
    if bytes.len() < 128 || &bytes[126..128] != b"IM" {
        return Err(Error::CorruptData {
            path: path.to_path_buf(),
            reason: "not a little-endian level-5 MAT file".into(),
        });
    }
    let mut out = Vec::new();
    collect(&bytes[128..], path, &mut out)?;
    Ok(out)
}

#[cfg(test)]
/// Encodes `arrays` (all `uint8`) as an uncompressed level-5 MAT file.
pub(crate) fn write_mat_u8(path: &Path, arrays: &[(&str, &[usize], &[u8])]) -> Result<()> {
    fn elem(out: &mut Vec<u8>, ty: u32, data: &[u8]) {
        out.extend(ty.to_le_bytes());
        out.extend((data.len() as u32).to_le_bytes());
        out.extend(data);
        out.extend(std::iter::repeat_n(0u8, (8 - data.len() % 8) % 8));
    }
    let mut out = vec![b' '; 116];
    out[..10].copy_from_slice(b"MATLAB 5.0");
    out.extend([0u8; 8]);
    out.extend(0x0100u16.to_le_bytes());
    out.extend(b"IM");
    for (name, dims, data) in arrays {
        let mut m = Vec::new();
        // mxUINT8_CLASS
        elem(&mut m, MI_UINT32, &[9, 0, 0, 0, 0, 0, 0, 0]);
        let d: Vec<u8> = dims.iter().flat_map(|&x| (x as i32).to_le_bytes()).collect();
        elem(&mut m, MI_INT32, &d);
        elem(&mut m, MI_INT8, name.as_bytes());
        elem(&mut m, MI_UINT8, data);
        elem(&mut out, MI_MATRIX, &m);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_uint8_arrays() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mat");
        let x: Vec<u8> = (0..24).collect();
        write_mat_u8(&p, &[("X", &[2, 3, 4], &x), ("y", &[4, 1], &[1, 2, 3, 10])]).unwrap();
        let arrays = read_mat(&p).unwrap();
        assert_eq!(arrays.len(), 2);
        assert_eq!(arrays[0].name, "X");
        assert_eq!(arrays[0].dims, vec![2, 3, 4]);
        assert_eq!(arrays[0].data, MatData::U8(x));
        assert_eq!(arrays[1].data.value(3), 10.0);
    }

    #[test]
    fn reads_compressed_elements() {
        use flate2::write::ZlibEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("p.mat");
        write_mat_u8(&plain, &[("y", &[3, 1], &[4, 5, 6])]).unwrap();
        let bytes = std::fs::read(&plain).unwrap();
        let mut enc = ZlibEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&bytes[128..]).unwrap();
        let z = enc.finish().unwrap();
        let mut out = bytes[..128].to_vec();
        out.extend(MI_COMPRESSED.to_le_bytes());
        out.extend((z.len() as u32).to_le_bytes());
        out.extend(z);
        let packed = dir.path().join("z.mat");
        std::fs::write(&packed, out).unwrap();
        assert_eq!(read_mat(&packed).unwrap(), read_mat(&plain).unwrap());
    }
}
