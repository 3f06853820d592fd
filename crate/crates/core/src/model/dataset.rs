//! Labeled samples and their flat binary fixture format:
//! `u32 count, u32 dims, count*dims f32 features, count u16 labels`, little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dims: usize,
    features: Vec<f32>,
    labels: Vec<u16>,
}

impl LabeledDataset {
    pub fn new(dims: usize, features: Vec<f32>, labels: Vec<u16>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one feature".into()));
        }
        if features.len() != dims * labels.len() {
            return Err(Error::Format(format!(
                "{} features do not fill {} samples of {dims} dims",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self { dims, features, labels })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().map(|&l| usize::from(l) + 1).max().unwrap_or(0)
    }

    pub fn sample(&self, i: usize) -> (Vec<f64>, u16) {
        let x = self.features[i * self.dims..(i + 1) * self.dims].iter().map(|&v| f64::from(v)).collect();
        (x, self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<f64>, u16)> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// Samples reordered by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() || order.iter().any(|&i| i >= self.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidConfig("not a permutation of the samples".into()));
        }
        let mut features = Vec::with_capacity(self.features.len());
        for &i in order {
            features.extend_from_slice(&self.features[i * self.dims..(i + 1) * self.dims]);
        }
        Self::new(self.dims, features, order.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let count = u32::try_from(self.len()).map_err(|_| Error::Format("too many samples".into()))?;
        let dims = u32::try_from(self.dims).map_err(|_| Error::Format("too many dims".into()))?;
        let mut buf = Vec::with_capacity(8 + self.features.len() * 4 + self.labels.len() * 2);
        buf.extend_from_slice(&count.to_le_bytes());
        buf.extend_from_slice(&dims.to_le_bytes());
        for f in &self.features {
            buf.extend_from_slice(&f.to_le_bytes());
        }
        for l in &self.labels {
            buf.extend_from_slice(&l.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let u32_at = |o: usize| -> Result<u32> {
            buf.get(o..o + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or(Error::Truncated("dataset header"))
        };
        let count = u32_at(0)? as usize;
        let dims = u32_at(4)? as usize;
        let n_feat = count
            .checked_mul(dims)
            .ok_or_else(|| Error::Format("dataset size overflows".into()))?;
        let need = 8 + n_feat * 4 + count * 2;
        if buf.len() < need {
            return Err(Error::Truncated("dataset body"));
        }
        if buf.len() > need {
            return Err(Error::Format(format!("{} trailing bytes after dataset", buf.len() - need)));
        }
        let features = buf[8..8 + n_feat * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let labels = buf[8 + n_feat * 4..]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, features, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
