//! Binary containers for point clouds (`DROPC`) and real matrices (`DROMX`).
//!
//! Both are little-endian with a six-byte magic and a `u32` version. A labeled
//! point cloud ends with a UTF-8 JSON object `{"<label index>": "<link name>"}`
//! that runs to the end of the file.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Point3};

use crate::cloud::{Labels, PointCloud};
use crate::dro::DroMatrix;
use crate::error::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 6] = b"DROPC\0";
pub const MATRIX_MAGIC: &[u8; 6] = b"DROMX\0";
pub const FORMAT_VERSION: u32 = 1;

/// Size of the `DROMX` header in bytes.
pub const MATRIX_HEADER_LEN: usize = 6 + 4 + 4 + 4 + 1;

/// Element type of a `DROMX` payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F64 => 0,
            Dtype::F32 => 1,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

/// A dense row-major matrix as stored in a `DROMX` file.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub dtype: Dtype,
    /// Row-major values; exactly representable in `dtype`.
    pub values: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_dro(dro: &DroMatrix, dtype: Dtype) -> Self {
        StoredMatrix {
            rows: dro.rows(),
            cols: dro.cols(),
            dtype,
            values: dro.values().to_vec(),
        }
    }

    pub fn from_dmatrix(m: &DMatrix<f64>, dtype: Dtype) -> Self {
        StoredMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            dtype,
            values: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn into_dro(self) -> Result<DroMatrix> {
        DroMatrix::new(self.rows, self.cols, self.values)
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.pos,
                format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn header(&mut self, magic: &[u8; 6]) -> Result<()> {
        let got = self.take(6, "magic")?;
        if got != magic {
            return Err(Error::format(0, format!("bad magic {got:?}")));
        }
        let at = self.pos;
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::format(at, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn remaining(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

fn checked_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::contract(format!("{what} {n} exceeds the u32 range")))
}

pub fn encode_cloud(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let n = checked_u32(cloud.len(), "point count")?;
    let mut out = Vec::with_capacity(15 + cloud.len() * 28);
    out.extend_from_slice(CLOUD_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.push(u8::from(cloud.labels.is_some()));
    for p in &cloud.points {
        for c in p.coords.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    if let Some(labels) = &cloud.labels {
        for id in &labels.ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        // Insertion order is preserved, so keys appear as 0, 1, 2, ...
        let trailer: serde_json::Map<String, serde_json::Value> = labels
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (i.to_string(), serde_json::Value::from(n.as_str())))
            .collect();
        out.extend_from_slice(serde_json::to_string(&trailer)?.as_bytes());
    }
    Ok(out)
}

pub fn decode_cloud(bytes: &[u8]) -> Result<PointCloud> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.header(CLOUD_MAGIC)?;
    let n = cur.u32("point count")? as usize;
    let flag_at = cur.pos;
    let labeled = match cur.u8("label flag")? {
        0 => false,
        1 => true,
        other => return Err(Error::format(flag_at, format!("label flag must be 0 or 1, got {other}"))),
    };
    let needed = n.saturating_mul(24);
    if cur.remaining().len() < needed {
        return Err(Error::format(
            cur.pos,
            format!("truncated coordinates: need {needed} bytes, {} remain", cur.remaining().len()),
        ));
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let at = cur.pos;
        let p = Point3::new(cur.f64("x")?, cur.f64("y")?, cur.f64("z")?);
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::format(at, "non-finite coordinate"));
        }
        points.push(p);
    }
    let labels = if labeled {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            ids.push(cur.u32("label")?);
        }
        let trailer_at = cur.pos;
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(cur.remaining())
            .map_err(|e| Error::format(trailer_at, format!("label trailer: {e}")))?;
        let mut names = vec![None; map.len()];
        for (k, v) in map {
            let idx: usize = k
                .parse()
                .map_err(|_| Error::format(trailer_at, format!("label key `{k}` is not an index")))?;
            let name = v
                .as_str()
                .ok_or_else(|| Error::format(trailer_at, format!("label {k} is not a string")))?;
            let slot = names
                .get_mut(idx)
                .ok_or_else(|| Error::format(trailer_at, format!("label indices are not contiguous ({idx})")))?;
            *slot = Some(name.to_string());
        }
        let names: Vec<String> = names
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::format(trailer_at, "label trailer has duplicate indices"))?;
        if let Some(bad) = ids.iter().find(|&&id| id as usize >= names.len()) {
            return Err(Error::format(trailer_at, format!("label index {bad} has no name")));
        }
        Some(Labels { ids, names })
    } else {
        if !cur.remaining().is_empty() {
            return Err(Error::format(cur.pos, "trailing bytes after unlabeled cloud"));
        }
        None
    };
    Ok(PointCloud { points, labels })
}

pub fn encode_matrix(m: &StoredMatrix) -> Result<Vec<u8>> {
    let rows = checked_u32(m.rows, "row count")?;
    let cols = checked_u32(m.cols, "column count")?;
    if m.values.len() != m.rows * m.cols {
        return Err(Error::contract(format!(
            "{} values for a {}×{} matrix",
            m.values.len(),
            m.rows,
            m.cols
        )));
    }
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + m.values.len() * m.dtype.size());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.push(m.dtype.code());
    match m.dtype {
        Dtype::F64 => m.values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32 => m
            .values
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<StoredMatrix> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.header(MATRIX_MAGIC)?;
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    let dtype_at = cur.pos;
    let dtype = match cur.u8("dtype")? {
        0 => Dtype::F64,
        1 => Dtype::F32,
        other => return Err(Error::format(dtype_at, format!("unknown dtype {other}"))),
    };
    let count = rows.saturating_mul(cols);
    let needed = count.saturating_mul(dtype.size());
    let remaining = cur.remaining().len();
    if remaining < needed {
        return Err(Error::format(
            cur.pos + remaining,
            format!("truncated payload: {rows}×{cols} needs {needed} bytes, {remaining} present"),
        ));
    }
    if remaining > needed {
        return Err(Error::format(cur.pos + needed, "trailing bytes after payload"));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(match dtype {
            Dtype::F64 => cur.f64("value")?,
            Dtype::F32 => f64::from(cur.f32("value")?),
        });
    }
    Ok(StoredMatrix {
        rows,
        cols,
        dtype,
        values,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    decode_cloud(&read_file(path)?)
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_file(path, &encode_cloud(cloud)?)
}

pub fn read_matrix(path: &Path) -> Result<StoredMatrix> {
    decode_matrix(&read_file(path)?)
}

pub fn write_matrix(path: &Path, m: &StoredMatrix) -> Result<()> {
    write_file(path, &encode_matrix(m)?)
}
