//! Activation dumps: the `ACTV1` container and per-cell slicing.
//!
//! Layout on disk:
//!
//! | bytes          | content                                         |
//! |----------------|-------------------------------------------------|
//! | `0..4`         | magic `ACTV`                                    |
//! | `4..8`         | format version, `u32` little-endian (`1`)       |
//! | `8..16`        | header length `H`, `u64` little-endian          |
//! | `16..16+H`     | UTF-8 JSON header                               |
//! | rest           | `n·L·P·d` `f32` little-endian, row-major         |
//!
//! Payload order is (problem, layer, position, dim).

use std::collections::HashSet;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACTV";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE_LEN: u64 = 16;

/// A 4-D activation tensor `[problems × layers × positions × hidden]` plus its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    model_id: String,
    layer_ids: Vec<u32>,
    position_offsets: Vec<i32>,
    hidden_dim: usize,
    problem_ids: Vec<String>,
    notes: serde_json::Value,
    data: Vec<f32>,
}

/// JSON header of an `ACTV1` file. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub model_id: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub num_layers: usize,
    #[serde(rename = "P")]
    pub num_positions: usize,
    pub d: usize,
    pub dtype: String,
    pub layer_ids: Vec<u32>,
    pub position_offsets: Vec<i32>,
    pub problem_ids: Vec<String>,
    #[serde(default)]
    pub notes: serde_json::Value,
}

impl Header {
    pub fn payload_bytes(&self) -> u64 {
        (self.n as u64) * (self.num_layers as u64) * (self.num_positions as u64) * (self.d as u64) * 4
    }
}

impl ActivationSet {
    pub fn new(
        model_id: impl Into<String>,
        layer_ids: Vec<u32>,
        position_offsets: Vec<i32>,
        hidden_dim: usize,
        problem_ids: Vec<String>,
        data: Vec<f32>,
    ) -> Result<Self> {
        let set = Self {
            model_id: model_id.into(),
            layer_ids,
            position_offsets,
            hidden_dim,
            problem_ids,
            notes: serde_json::Value::Object(Default::default()),
            data,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_notes(mut self, notes: serde_json::Value) -> Self {
        self.notes = notes;
        self
    }

    fn validate_shape(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSet(msg));
        if self.problem_ids.is_empty() {
            return bad("no problems".into());
        }
        if self.layer_ids.is_empty() || self.position_offsets.is_empty() || self.hidden_dim == 0 {
            return bad("layers, positions and hidden_dim must be non-empty".into());
        }
        if self.layer_ids.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("layer_ids not strictly increasing: {:?}", self.layer_ids));
        }
        if self.position_offsets.iter().any(|&p| p >= 0) {
            return bad(format!("position offsets must be negative: {:?}", self.position_offsets));
        }
        if self.position_offsets.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!(
                "position_offsets not strictly decreasing: {:?}",
                self.position_offsets
            ));
        }
        let mut seen = HashSet::with_capacity(self.problem_ids.len());
        if let Some(dup) = self.problem_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return bad(format!("duplicate problem id {dup:?}"));
        }
        let expected = self.n_problems() * self.n_layers() * self.n_positions() * self.hidden_dim;
        if self.data.len() != expected {
            return bad(format!("data length {} but n·L·P·d = {expected}", self.data.len()));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(flat) => Err(self.non_finite_at(flat)),
            None => Ok(()),
        }
    }

    fn non_finite_at(&self, flat: usize) -> Error {
        let (l, p, d) = (self.n_layers(), self.n_positions(), self.hidden_dim);
        Error::NonFinite {
            problem: flat / (l * p * d),
            layer: (flat / (p * d)) % l,
            position: (flat / d) % p,
            dim: flat % d,
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }
    pub fn layer_ids(&self) -> &[u32] {
        &self.layer_ids
    }
    pub fn position_offsets(&self) -> &[i32] {
        &self.position_offsets
    }
    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
    pub fn problem_ids(&self) -> &[String] {
        &self.problem_ids
    }
    pub fn notes(&self) -> &serde_json::Value {
        &self.notes
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn n_problems(&self) -> usize {
        self.problem_ids.len()
    }
    pub fn n_layers(&self) -> usize {
        self.layer_ids.len()
    }
    pub fn n_positions(&self) -> usize {
        self.position_offsets.len()
    }

    /// Every `(layer, position)` cell in storage order.
    pub fn cells(&self) -> Vec<(u32, i32)> {
        self.layer_ids
            .iter()
            .flat_map(|&l| self.position_offsets.iter().map(move |&p| (l, p)))
            .collect()
    }

    pub fn header(&self) -> Header {
        Header {
            model_id: self.model_id.clone(),
            n: self.n_problems(),
            num_layers: self.n_layers(),
            num_positions: self.n_positions(),
            d: self.hidden_dim,
            dtype: "f32".into(),
            layer_ids: self.layer_ids.clone(),
            position_offsets: self.position_offsets.clone(),
            problem_ids: self.problem_ids.clone(),
            notes: self.notes.clone(),
        }
    }

    fn layer_index(&self, layer: u32) -> Result<usize> {
        self.layer_ids
            .iter()
            .position(|&l| l == layer)
            .ok_or_else(|| Error::MissingLayer { layer, available: self.layer_ids.clone() })
    }

    fn position_index(&self, position: i32) -> Result<usize> {
        self.position_offsets.iter().position(|&p| p == position).ok_or_else(|| {
            Error::MissingPosition { position, available: self.position_offsets.clone() }
        })
    }

    /// Extracts the `[n × d]` feature matrix of one cell, widened to `f64`.
    pub fn slice(&self, layer: u32, position: i32) -> Result<FeatureMatrix> {
        let li = self.layer_index(layer)?;
        let pi = self.position_index(position)?;
        let d = self.hidden_dim;
        let per_problem = self.n_layers() * self.n_positions() * d;
        let offset = (li * self.n_positions() + pi) * d;
        let mut values = Vec::with_capacity(self.n_problems() * d);
        for i in 0..self.n_problems() {
            let start = i * per_problem + offset;
            values.extend(self.data[start..start + d].iter().map(|&v| f64::from(v)));
        }
        Ok(FeatureMatrix { rows: self.n_problems(), cols: d, values, row_ids: self.problem_ids.clone() })
    }

    /// Serializes to `ACTV1`. Validation happens before any byte reaches the sink.
    pub fn write_to<W: Write>(&self, sink: W) -> Result<()> {
        self.validate()?;
        let header = serde_json::to_vec(&self.header())?;
        let mut out = CountingWriter { inner: sink, written: 0 };
        let mut preamble = Vec::with_capacity(PREAMBLE_LEN as usize);
        preamble.extend_from_slice(MAGIC);
        preamble.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        preamble.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.put(&preamble)?;
        out.put(&header)?;
        let mut chunk = Vec::with_capacity(64 * 1024);
        for block in self.data.chunks(16 * 1024) {
            chunk.clear();
            for v in block {
                chunk.extend_from_slice(&v.to_le_bytes());
            }
            out.put(&chunk)?;
        }
        out.inner.flush().map_err(|source| Error::PartialWrite { offset: out.written, source })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(mut source: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact_or(&mut source, &mut magic, Error::BadMagic)?;
        if &magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let mut word = [0u8; 4];
        read_exact_or(&mut source, &mut word, Error::Header("missing version".into()))?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let mut len = [0u8; 8];
        read_exact_or(&mut source, &mut len, Error::Header("missing header length".into()))?;
        let header_len = u64::from_le_bytes(len);
        let mut header_bytes = Vec::new();
        source.by_ref().take(header_len).read_to_end(&mut header_bytes)?;
        if header_bytes.len() as u64 != header_len {
            return Err(Error::Header(format!(
                "declared {header_len} header bytes, found {}",
                header_bytes.len()
            )));
        }
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Header(e.to_string()))?;
        Self::from_header(header, source)
    }

    fn from_header<R: Read>(header: Header, mut source: R) -> Result<Self> {
        if header.dtype != "f32" {
            return Err(Error::Header(format!("unsupported dtype {:?}", header.dtype)));
        }
        let dims = [
            ("n", header.n, header.problem_ids.len()),
            ("L", header.num_layers, header.layer_ids.len()),
            ("P", header.num_positions, header.position_offsets.len()),
        ];
        for (key, declared, listed) in dims {
            if declared != listed {
                return Err(Error::Header(format!("{key}={declared} but {listed} ids listed")));
            }
        }
        let expected = header.payload_bytes();
        let mut payload = Vec::new();
        source.read_to_end(&mut payload)?;
        let found = payload.len() as u64;
        if found != expected {
            return Err(Error::Truncated { expected, found });
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let set = Self {
            model_id: header.model_id,
            layer_ids: header.layer_ids,
            position_offsets: header.position_offsets,
            hidden_dim: header.d,
            problem_ids: header.problem_ids,
            notes: header.notes,
            data,
        };
        set.validate()?;
        Ok(set)
    }

    /// Reads only the header, leaving the payload untouched.
    pub fn read_header<R: Read>(mut source: R) -> Result<Header> {
        let mut pre = [0u8; 16];
        read_exact_or(&mut source, &mut pre, Error::BadMagic)?;
        if &pre[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(pre[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let header_len = u64::from_le_bytes(pre[8..16].try_into().expect("8 bytes"));
        let mut header_bytes = Vec::new();
        source.take(header_len).read_to_end(&mut header_bytes)?;
        serde_json::from_slice(&header_bytes).map_err(|e| Error::Header(e.to_string()))
    }
}

fn read_exact_or<R: Read>(source: &mut R, buf: &mut [u8], short: Error) -> Result<()> {
    match source.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(short),
        Err(e) => Err(e.into()),
    }
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn put(&mut self, mut buf: &[u8]) -> Result<()> {
        while !buf.is_empty() {
            match self.inner.write(buf) {
                Ok(0) => {
                    return Err(Error::PartialWrite {
                        offset: self.written,
                        source: io::ErrorKind::WriteZero.into(),
                    })
                }
                Ok(k) => {
                    self.written += k as u64;
                    buf = &buf[k..];
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(source) => return Err(Error::PartialWrite { offset: self.written, source }),
            }
        }
        Ok(())
    }
}

/// One `(layer, position)` slice: `rows` problems by `cols` hidden units, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, row_ids: Vec<String>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if row_ids.len() != rows {
            return Err(Error::LengthMismatch(format!("{} row ids for {rows} rows", row_ids.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("feature ({}, {})", i / cols.max(1), i % cols.max(1))));
        }
        Ok(Self { rows, cols, values, row_ids })
    }

    /// Builds a matrix with synthetic row ids `r0, r1, …`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::LengthMismatch("ragged rows".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        Self::new(rows.len(), cols, values, ids)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: idx.len(),
            cols: self.cols,
            values,
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }
}
