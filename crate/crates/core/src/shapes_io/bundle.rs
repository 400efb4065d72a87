//! Binary container for a [`ModelBundle`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "PCCBNDL\0"
//! version      u32
//! descriptor   u32 length + UTF-8 TOML text
//! tensors      u32 count, then per tensor:
//!                u16 name length + name, u8 rank, u32 × rank extents,
//!                f32 × product(extents)
//! checksum     32-byte SHA-256 of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::IoError;
use crate::autodiff::Tensor;
use crate::nets::{ArchDescriptor, Dense, Mlp, ModelBundle, NetKind, FORMAT_VERSION};

pub const MAGIC: &[u8; 8] = b"PCCBNDL\0";
const CHECKSUM_LEN: usize = 32;

/// Serializes without validating; [`save_bundle`] validates first.
pub fn encode_bundle(bundle: &ModelBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let text = bundle.descriptor.to_text();
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    let tensors = bundle.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IoError> {
        if self.bytes.len() - self.pos < n {
            return Err(IoError::Truncated(format!("ends inside {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, IoError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, IoError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ModelBundle, IoError> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(IoError::Truncated("shorter than the header".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(IoError::Version { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < 12 + CHECKSUM_LEN {
        return Err(IoError::Truncated("no room for a checksum".into()));
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(IoError::Checksum);
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let text_len = r.u32("descriptor length")? as usize;
    let text = std::str::from_utf8(r.take(text_len, "descriptor")?)
        .map_err(|_| IoError::Descriptor("descriptor is not UTF-8".into()))?;
    let descriptor = ArchDescriptor::from_text(text).map_err(|e| IoError::Descriptor(e.to_string()))?;

    let count = r.u32("tensor count")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16("tensor name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "tensor name")?.to_vec())
            .map_err(|_| IoError::Truncated("tensor name is not UTF-8".into()))?;
        let rank = r.u8("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4, "tensor data")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let t = Tensor::new(shape, data).map_err(|e| IoError::ShapeInconsistency(format!("{name}: {e}")))?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(IoError::ShapeInconsistency(format!("tensor {name} appears twice")));
        }
    }
    if r.pos != body.len() {
        return Err(IoError::Truncated(format!("{} unexpected trailing bytes", body.len() - r.pos)));
    }
    assemble(descriptor, tensors)
}

fn assemble(descriptor: ArchDescriptor, mut tensors: BTreeMap<String, Tensor>) -> Result<ModelBundle, IoError> {
    descriptor.validate().map_err(|e| IoError::Descriptor(e.to_string()))?;
    let mut take = |kind: NetKind| -> Result<Mlp, IoError> {
        let spec = descriptor.spec(kind);
        let mut layers = Vec::with_capacity(spec.widths.len());
        for (i, &activation) in spec.activations.iter().enumerate() {
            let mut get = |part: &str| {
                let name = format!("{}.{i}.{part}", kind.name());
                tensors.remove(&name).ok_or_else(|| IoError::ShapeInconsistency(format!("missing tensor {name}")))
            };
            let weight = get("weight")?;
            let bias = get("bias")?;
            if weight.shape().len() != 2 || bias.shape().len() != 1 {
                return Err(IoError::ShapeInconsistency(format!("{} layer {i} has malformed ranks", kind.name())));
            }
            layers.push(Dense { weight, bias, activation });
        }
        Ok(Mlp { layers })
    };
    let bundle = ModelBundle {
        encoder: take(NetKind::Encoder)?,
        decoder: take(NetKind::Decoder)?,
        generator: take(NetKind::Generator)?,
        discriminator: take(NetKind::Discriminator)?,
        init_encoder: take(NetKind::InitEncoder)?,
        descriptor,
    };
    if let Some(extra) = tensors.keys().next() {
        return Err(IoError::ShapeInconsistency(format!("unexpected tensor {extra}")));
    }
    bundle.check_consistency().map_err(|e| IoError::ShapeInconsistency(e.to_string()))?;
    Ok(bundle)
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<(), IoError> {
    bundle.check_consistency().map_err(|e| IoError::ShapeInconsistency(e.to_string()))?;
    fs::write(path, encode_bundle(bundle)).map_err(|e| IoError::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_bundle(&bytes)
}
