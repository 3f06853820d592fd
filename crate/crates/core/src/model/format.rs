//! NNSB v1 bundle files.
//!
//! All integers and floats are little-endian. Strings are a `u16` byte length
//! followed by UTF-8.
//!
//! ```text
//! "NNSB"  u16 version (=1)
//! u32 layer_count, then per layer a u8 kind and its fields:
//!     0 dense      str weights, str bias
//!     1 conv2d     str kernels, str bias
//!     2 maxpool2d  u32 window
//!     3 activation u8 (0 relu, 1 sigmoid)
//!     4 flatten
//!     5 softmax
//! u32 tensor_count, then per tensor:
//!     str name, u8 codec id, u8 q, u8 parity, f64 w_min, f64 w_max,
//!     u8 rank, rank x u32 dims, ceil(count*q/8) bytes of packed words
//! u32 metadata_count, then per entry: str key, str value
//! u32 CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Packed words: word `e` occupies bits `e*q .. (e+1)*q` of the byte stream,
//! bit `p` of the stream being bit `p % 8` of byte `p / 8`. Within a word,
//! bit 0 comes first; with parity the check bit is bit `q - 1`.

use std::collections::BTreeMap;
use std::path::Path;

use super::bundle::{ActivationKind, Layer, ModelBundle};
use super::tensor::QuantizedTensor;
use crate::channel::BitStream;
use crate::codec::{CodecKind, CodecSpec, QuantizationGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NNSB";
pub const VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn count(&mut self, n: usize, what: &str) -> Result<()> {
        let n = u32::try_from(n).map_err(|_| Error::Format(format!("too many {what}")))?;
        self.u32(n);
        Ok(())
    }
    fn str(&mut self, s: &str) -> Result<()> {
        let n = u16::try_from(s.len()).map_err(|_| Error::Format(format!("string of {} bytes is too long", s.len())))?;
        self.u16(n);
        self.0.extend_from_slice(s.as_bytes());
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn str(&mut self, what: &'static str) -> Result<String> {
        let n = self.u16(what)? as usize;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn to_bytes(bundle: &ModelBundle) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(VERSION);

    w.count(bundle.layers().len(), "layers")?;
    for layer in bundle.layers() {
        match layer {
            Layer::Dense { weights, bias } => {
                w.u8(0);
                w.str(weights)?;
                w.str(bias)?;
            }
            Layer::Conv2d { kernels, bias } => {
                w.u8(1);
                w.str(kernels)?;
                w.str(bias)?;
            }
            Layer::MaxPool2d { window } => {
                w.u8(2);
                w.count(*window, "pool window")?;
            }
            Layer::Activation { kind } => {
                w.u8(3);
                w.u8(match kind {
                    ActivationKind::Relu => 0,
                    ActivationKind::Sigmoid => 1,
                });
            }
            Layer::Flatten => w.u8(4),
            Layer::Softmax => w.u8(5),
        }
    }

    w.count(bundle.tensors().len(), "tensors")?;
    for t in bundle.tensors() {
        w.str(t.name())?;
        w.u8(t.spec().kind().id());
        w.u8(t.spec().q() as u8);
        w.u8(u8::from(t.spec().parity()));
        w.f64(t.grid().w_min());
        w.f64(t.grid().w_max());
        let rank = u8::try_from(t.shape().len()).map_err(|_| Error::Format("rank above 255".into()))?;
        w.u8(rank);
        for &d in t.shape() {
            w.count(d, "elements in one dimension")?;
        }
        w.0.extend_from_slice(t.words().as_bytes());
    }

    w.count(bundle.metadata().len(), "metadata entries")?;
    for (k, v) in bundle.metadata() {
        w.str(k)?;
        w.str(v)?;
    }

    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    Ok(w.0)
}

pub fn from_bytes(buf: &[u8]) -> Result<ModelBundle> {
    if buf.len() < 4 {
        return Err(Error::Truncated("magic"));
    }
    if &buf[..4] != MAGIC {
        return Err(Error::Format("bad magic, not an NNSB file".into()));
    }
    if buf.len() < 6 {
        return Err(Error::Truncated("version"));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported NNSB version {version}")));
    }
    if buf.len() < 10 {
        return Err(Error::Truncated("checksum"));
    }
    let (payload, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    parse_payload(payload)
}

fn parse_payload(payload: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader { buf: payload, pos: 6 };

    let layer_count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(layer_count.min(r.remaining()));
    for _ in 0..layer_count {
        layers.push(match r.u8("layer kind")? {
            0 => Layer::Dense { weights: r.str("layer tensor")?, bias: r.str("layer tensor")? },
            1 => Layer::Conv2d { kernels: r.str("layer tensor")?, bias: r.str("layer tensor")? },
            2 => Layer::MaxPool2d { window: r.u32("pool window")? as usize },
            3 => Layer::Activation {
                kind: match r.u8("activation")? {
                    0 => ActivationKind::Relu,
                    1 => ActivationKind::Sigmoid,
                    other => return Err(Error::Format(format!("unknown activation {other}"))),
                },
            },
            4 => Layer::Flatten,
            5 => Layer::Softmax,
            other => return Err(Error::Format(format!("unknown layer kind {other}"))),
        });
    }

    let tensor_count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(tensor_count.min(r.remaining()));
    for _ in 0..tensor_count {
        let name = r.str("tensor name")?;
        let kind = CodecKind::from_id(r.u8("codec id")?)?;
        let q = u32::from(r.u8("q")?);
        let parity = match r.u8("parity flag")? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("parity flag {other} is not 0/1"))),
        };
        let spec = CodecSpec::new(kind, q, parity).map_err(|e| Error::Format(format!("tensor `{name}`: {e}")))?;
        let w_min = r.f64("w_min")?;
        let w_max = r.f64("w_max")?;
        let grid = QuantizationGrid::new(w_min, w_max, spec.data_width())
            .map_err(|e| Error::Format(format!("tensor `{name}`: {e}")))?;
        let rank = r.u8("rank")? as usize;
        let shape = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let bits = shape
            .iter()
            .try_fold(q as usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
        let bytes = r.take(bits.div_ceil(8), "packed words")?.to_vec();
        let words = BitStream::from_bytes(bytes, bits)?;
        tensors.push(QuantizedTensor::new(name, shape, grid, spec, words)?);
    }

    let meta_count = r.u32("metadata count")? as usize;
    let mut metadata = BTreeMap::new();
    for _ in 0..meta_count {
        let k = r.str("metadata key")?;
        let v = r.str("metadata value")?;
        metadata.insert(k, v);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} unexpected bytes before checksum", r.remaining())));
    }
    ModelBundle::new(layers, tensors, metadata)
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(bundle)?)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    from_bytes(&std::fs::read(path)?)
}
