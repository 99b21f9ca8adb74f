//! Binary container for instances and factor pairs.
//!
//! Layout:
//!
//! ```text
//! 8 bytes   magic "NGMCA\0\x01\0"
//! 8 bytes   header length L, u64 little-endian
//! L bytes   UTF-8 JSON header
//! ...       matrix payloads in header order, f64 little-endian, row-major
//! ```
//!
//! The header lists `{"name", "rows", "cols"}` for every matrix and carries
//! a free-form `metadata` object (the instance spec, the algorithm config).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algorithms::{AlgorithmConfig, FactorPair};
use crate::datagen::{InstanceSpec, ProblemInstance};
use crate::error::{Error, Result};
use crate::linops::RealMatrix;

pub const MAGIC: [u8; 8] = *b"NGMCA\0\x01\0";
pub const KIND_INSTANCE: &str = "instance";
pub const KIND_FACTORS: &str = "factors";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    metadata: Value,
    matrices: Vec<MatrixEntry>,
}

/// In-memory view of a container file.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub metadata: Value,
    pub matrices: Vec<(String, RealMatrix)>,
}

impl Container {
    pub fn new(kind: &str, metadata: Value) -> Self {
        Self {
            kind: kind.to_string(),
            metadata,
            matrices: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, m: &RealMatrix) -> Self {
        self.matrices.push((name.to_string(), m.clone()));
        self
    }

    pub fn matrix(&self, name: &str) -> Result<&RealMatrix> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Format(format!("container has no matrix `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind.clone(),
            metadata: self.metadata.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|(name, m)| MatrixEntry {
                    name: name.clone(),
                    rows: m.nrows(),
                    cols: m.ncols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = self.matrices.iter().map(|(_, m)| m.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + json.len() + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, m) in &self.matrices {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.extend_from_slice(&m[(i, j)].to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = || Error::Format("container is truncated".into());
        if bytes.len() < 16 || bytes[..8] != MAGIC {
            return Err(Error::Format("not an ngmca container (bad magic)".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16usize.checked_add(header_len).ok_or_else(truncated)?).ok_or_else(truncated)?;
        let header: Header = serde_json::from_slice(body)?;
        let mut offset = 16 + header_len;
        let mut matrices = Vec::with_capacity(header.matrices.len());
        for entry in header.matrices {
            let count = entry.rows.checked_mul(entry.cols).ok_or_else(truncated)?;
            let end = offset.checked_add(count.checked_mul(8).ok_or_else(truncated)?).ok_or_else(truncated)?;
            let raw = bytes.get(offset..end).ok_or_else(truncated)?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            matrices.push((entry.name, RealMatrix::from_row_slice(entry.rows, entry.cols, &values)));
            offset = end;
        }
        if offset != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after the last matrix", bytes.len() - offset)));
        }
        Ok(Self {
            kind: header.kind,
            metadata: header.metadata,
            matrices,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    fn expect_kind(self, kind: &str) -> Result<Self> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a `{kind}` container, found `{}`", self.kind)));
        }
        Ok(self)
    }
}

pub fn instance_to_container(inst: &ProblemInstance) -> Result<Container> {
    Ok(Container::new(KIND_INSTANCE, serde_json::to_value(&inst.spec)?)
        .with("y", &inst.y)
        .with("a_ref", &inst.a_ref)
        .with("s_ref", &inst.s_ref)
        .with("z", &inst.z))
}

pub fn instance_from_container(c: Container) -> Result<ProblemInstance> {
    let c = c.expect_kind(KIND_INSTANCE)?;
    let spec: InstanceSpec = serde_json::from_value(c.metadata.clone())?;
    let inst = ProblemInstance {
        y: c.matrix("y")?.clone(),
        a_ref: c.matrix("a_ref")?.clone(),
        s_ref: c.matrix("s_ref")?.clone(),
        z: c.matrix("z")?.clone(),
        spec,
    };
    let (m, n, r) = (inst.y.nrows(), inst.y.ncols(), inst.a_ref.ncols());
    let shapes = [
        (inst.a_ref.nrows(), m),
        (inst.s_ref.nrows(), r),
        (inst.s_ref.ncols(), n),
        (inst.z.nrows(), m),
        (inst.z.ncols(), n),
    ];
    if shapes.iter().any(|(a, b)| a != b) {
        return Err(Error::ShapeMismatch("instance matrices do not fit Y = A S + Z".into()));
    }
    Ok(inst)
}

pub fn save_instance(path: &Path, inst: &ProblemInstance) -> Result<()> {
    instance_to_container(inst)?.write(path)
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    instance_from_container(Container::read(path)?)
}

/// Factor pair together with the configuration that produced it.
pub fn save_factors(path: &Path, pair: &FactorPair, cfg: &AlgorithmConfig) -> Result<()> {
    Container::new(KIND_FACTORS, serde_json::to_value(cfg)?)
        .with("a", &pair.a)
        .with("s", &pair.s)
        .write(path)
}

pub fn load_factors(path: &Path) -> Result<(FactorPair, AlgorithmConfig)> {
    let c = Container::read(path)?.expect_kind(KIND_FACTORS)?;
    let cfg: AlgorithmConfig = serde_json::from_value(c.metadata.clone())?;
    let pair = FactorPair {
        a: c.matrix("a")?.clone(),
        s: c.matrix("s")?.clone(),
    };
    if pair.a.ncols() != pair.s.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A has {} columns but S has {} rows",
            pair.a.ncols(),
            pair.s.nrows()
        )));
    }
    Ok((pair, cfg))
}
