//! Named parameter storage and the manifest + blob serialization format.
//!
//! A saved parameter set is two files: a UTF-8 manifest with one
//! `name shape dtype offset` line per tensor (shape written as `3x4`,
//! offset in bytes), and a blob holding every tensor's row-major values
//! as little-endian floats, back to back.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::tensor::{Float, Tensor, DTYPE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter. Panics on a duplicate name.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry {
            name,
            tensor,
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.ids().filter(|&id| self.is_trainable(id)).collect()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    /// Copies every entry of `other`, prefixing names with `prefix`.
    /// Returns the id offset to apply to `other`'s ids.
    pub fn absorb(&mut self, other: &ParamStore, prefix: &str) -> usize {
        let offset = self.entries.len();
        for e in &other.entries {
            self.add(format!("{prefix}{}", e.name), e.tensor.clone(), e.trainable);
        }
        offset
    }

    /// Serializes to `(manifest, blob)`.
    pub fn to_bytes(&self) -> (String, Vec<u8>) {
        let mut manifest = String::new();
        let mut blob = Vec::new();
        for e in &self.entries {
            let shape = e
                .tensor
                .shape()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("x");
            writeln!(manifest, "{} {} {} {}", e.name, shape, DTYPE, blob.len()).unwrap();
            for v in e.tensor.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        (manifest, blob)
    }

    /// Overwrites the values of every parameter from a serialized set.
    /// Names and shapes must match exactly.
    pub fn load_bytes(&mut self, manifest: &str, blob: &[u8]) -> Result<()> {
        let mut loaded: HashMap<String, Tensor> = read_tensors(manifest, blob)?.into_iter().collect();
        if loaded.len() != self.entries.len() {
            return Err(Error::Format(format!(
                "expected {} parameters, file holds {}",
                self.entries.len(),
                loaded.len()
            )));
        }
        for e in &mut self.entries {
            let t = loaded
                .remove(&e.name)
                .ok_or_else(|| Error::Format(format!("missing parameter {}", e.name)))?;
            if t.shape() != e.tensor.shape() {
                return Err(Error::Format(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    e.name,
                    t.shape(),
                    e.tensor.shape()
                )));
            }
            e.tensor = t;
        }
        Ok(())
    }
}

/// Parses a manifest and blob into named tensors, in manifest order.
pub fn read_tensors(manifest: &str, blob: &[u8]) -> Result<Vec<(String, Tensor)>> {
    const WIDTH: usize = std::mem::size_of::<Float>();
    let mut out = Vec::new();
    for (i, line) in manifest.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 4 {
            return Err(bad("expected 'name shape dtype offset'"));
        }
        let shape = fields[1]
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("malformed shape"))?;
        if fields[2] != DTYPE {
            return Err(bad(&format!("dtype {} unsupported by this build", fields[2])));
        }
        let offset: usize = fields[3].parse().map_err(|_| bad("malformed offset"))?;
        let len: usize = shape.iter().product();
        let end = offset + len * WIDTH;
        if end > blob.len() {
            return Err(bad("tensor extends past end of blob"));
        }
        let data = blob[offset..end]
            .chunks_exact(WIDTH)
            .map(|c| Float::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((fields[0].to_string(), Tensor::new(shape, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip_bit_exact() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::new(vec![2, 2], vec![0.1, -0.0, 1e-300, 3.5]).unwrap(), true);
        s.add("b/c", Tensor::vector(vec![Float::MIN_POSITIVE, 7.0]), false);
        let (m, b) = s.to_bytes();
        assert!(m.starts_with("a 2x2 "));
        let mut t = s.clone();
        t.get_mut(ParamId(0)).fill(9.0);
        t.load_bytes(&m, &b).unwrap();
        for (x, y) in s.entries().iter().zip(t.entries()) {
            let xb: Vec<_> = x.tensor.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<_> = y.tensor.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::zeros(&[3]), true);
        let (m, b) = s.to_bytes();
        let mut t = ParamStore::new();
        t.add("a", Tensor::zeros(&[1, 3]), true);
        assert!(t.load_bytes(&m, &b).is_err());
    }

    #[test]
    fn absorb_prefixes_names() {
        let mut base = ParamStore::new();
        base.add("w", Tensor::zeros(&[1]), true);
        let mut s = ParamStore::new();
        assert_eq!(s.absorb(&base, "base/"), 0);
        assert_eq!(s.find("base/w"), Some(ParamId(0)));
    }
}
