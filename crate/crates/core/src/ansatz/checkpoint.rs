//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//! magic `QRLCKPT\0`, version `u32`, ansatz code `u8`, qubits `u32`, layers `u32`,
//! slot count `u32` then per slot (name length `u16`, UTF-8 name, group `u8`,
//! offset `u32`, length `u32`), circuit count `u32` and `f64` values, head
//! count `u32` and `f64` values, optimizer flag `u8` and, when set, step `u64`
//! followed by first and second moments over circuit then head parameters.

use std::path::Path;

use super::{build, AnsatzKind, AnsatzSpec, ParamGroup, ParamVector, Slot};
use crate::error::{QrlError, Result};

const MAGIC: &[u8; 8] = b"QRLCKPT\0";
const VERSION: u32 = 1;

/// Adam moment state stored alongside the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSnapshot {
    pub step: u64,
    /// First moments over circuit then head parameters.
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: AnsatzKind,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub params: ParamVector,
    pub optimizer: Option<OptimizerSnapshot>,
}

impl Checkpoint {
    pub fn new(spec: &AnsatzSpec, params: ParamVector, optimizer: Option<OptimizerSnapshot>) -> Result<Self> {
        spec.check_params(&params)?;
        if let Some(o) = &optimizer {
            if o.m.len() != params.len() || o.v.len() != params.len() {
                return Err(QrlError::DimensionMismatch {
                    expected: params.len(),
                    got: o.m.len(),
                });
            }
        }
        Ok(Self {
            kind: spec.kind(),
            n_qubits: spec.n_qubits(),
            n_layers: spec.n_layers(),
            params,
            optimizer,
        })
    }

    /// Rebuilds the template the parameters belong to.
    pub fn spec(&self) -> Result<AnsatzSpec> {
        build(self.kind, self.n_qubits, self.n_layers)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let spec = self.spec()?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind.code());
        put_u32(&mut out, self.n_qubits);
        put_u32(&mut out, self.n_layers);
        let slots: Vec<&Slot> = spec.slots().iter().chain(spec.head_slots()).collect();
        put_u32(&mut out, slots.len());
        for s in slots {
            out.extend_from_slice(&(s.name.len() as u16).to_le_bytes());
            out.extend_from_slice(s.name.as_bytes());
            out.push(s.group.code());
            put_u32(&mut out, s.offset);
            put_u32(&mut out, s.len);
        }
        put_f64s(&mut out, &self.params.theta);
        put_f64s(&mut out, &self.params.head);
        match &self.optimizer {
            None => out.push(0),
            Some(o) => {
                out.push(1);
                out.extend_from_slice(&o.step.to_le_bytes());
                for v in o.m.iter().chain(&o.v) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(QrlError::Format("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(QrlError::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind = AnsatzKind::from_code(r.u8()?)?;
        let n_qubits = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        let spec = build(kind, n_qubits, n_layers)?;
        let expected: Vec<&Slot> = spec.slots().iter().chain(spec.head_slots()).collect();
        let n_slots = r.u32()? as usize;
        if n_slots != expected.len() {
            return Err(QrlError::Format("slot table does not match the ansatz".into()));
        }
        for e in expected {
            let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("two bytes")) as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| QrlError::Format("slot name is not UTF-8".into()))?;
            let group = ParamGroup::from_code(r.u8()?)?;
            let offset = r.u32()? as usize;
            let len = r.u32()? as usize;
            if name != e.name || group != e.group || offset != e.offset || len != e.len {
                return Err(QrlError::Format(format!("slot `{name}` does not match the ansatz")));
            }
        }
        let theta = r.f64s()?;
        let head = r.f64s()?;
        let params = ParamVector { theta, head };
        spec.check_params(&params)
            .map_err(|e| QrlError::Format(format!("parameter block: {e}")))?;
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let step = u64::from_le_bytes(r.take(8)?.try_into().expect("eight bytes"));
                let n = params.len();
                let m = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
                let v = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
                Some(OptimizerSnapshot { step, m, v })
            }
            f => return Err(QrlError::Format(format!("bad optimizer flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(QrlError::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            kind,
            n_qubits,
            n_layers,
            params,
            optimizer,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    put_u32(out, vs.len());
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(QrlError::Format("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    std::fs::write(path, checkpoint.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
