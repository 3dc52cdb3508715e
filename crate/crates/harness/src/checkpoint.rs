//! Self-describing binary container for named parameter arrays.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "HYPRCKPT"
//! version    u32
//! n_meta     u32, then n_meta × (key: str, value: str)
//! n_tensors  u32, then n_tensors × tensor
//! tensor     name: str, trainable: u8, ndim: u32, dims: ndim × u64, data: Π dims × f64
//! str        len: u32, UTF-8 bytes
//! ```
//!
//! Loading parses the whole file before returning anything.

use std::collections::BTreeMap;
use std::path::Path;

use hyprank_core::{Error, ParamSet, Result, Tensor};
use hyprank_datagen::io::io_context;

pub const MAGIC: &[u8; 8] = b"HYPRCKPT";
pub const VERSION: u32 = 1;

/// Parameters plus free-form string metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(params: ParamSet) -> Self {
        Self { meta: BTreeMap::new(), params }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta.get(key).map(String::as_str).ok_or_else(|| Error::format(format!("checkpoint lacks {key:?}")))
    }

    pub fn meta_parse<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.meta(key)?;
        raw.parse().map_err(|_| Error::format(format!("checkpoint field {key} = {raw:?} is malformed")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (_, name, t) in self.params.iter() {
            put_str(&mut out, name);
            out.push(u8::from(t.requires_grad()));
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::format("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version} (expected {VERSION})")));
        }
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            meta.insert(k, v);
        }
        let mut params = ParamSet::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let trainable = match r.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(Error::format(format!("{name}: bad trainable flag {b}"))),
            };
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(usize::try_from(r.u64()?).map_err(|_| Error::format(format!("{name}: dimension too large")))?);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n.checked_mul(8).is_some())
                .ok_or_else(|| Error::format(format!("{name}: shape {shape:?} overflows")))?;
            let raw = r.take(len * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
            let tensor = Tensor::new(shape, data).map_err(|e| Error::format(format!("{name}: {e}")))?.with_grad(trainable);
            if params.id_of(&name).is_some() {
                return Err(Error::format(format!("duplicate tensor {name}")));
            }
            params.insert(name, tensor);
        }
        if r.pos != bytes.len() {
            return Err(Error::format(format!("{} trailing bytes after checkpoint", bytes.len() - r.pos)));
        }
        Ok(Self { meta, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| io_context(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| io_context(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            Error::Io(io) => io_context(path, io),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("checkpoint truncated at byte {} (needed {n} more)", self.pos),
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format("non UTF-8 string in checkpoint"))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sample() -> Checkpoint {
        let mut p = ParamSet::new();
        p.insert("a.w", Tensor::matrix(2, 3, vec![1.0, -2.5, f64::MIN_POSITIVE, 0.1, 1e300, -0.0]).unwrap().with_grad(true));
        p.insert("a.init", Tensor::from_vec(vec![0.25; 4]));
        Checkpoint::new(p).with_meta("model", "test").with_meta("k", 5)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert!(back.params.bitwise_eq(&c.params));
        assert_eq!(back.meta, c.meta);
        assert_eq!(back.meta_parse::<usize>("k").unwrap(), 5);
        let ids: Vec<bool> = back.params.iter().map(|(_, _, t)| t.requires_grad()).collect();
        assert_eq!(ids, [true, false]);
    }

    #[test]
    fn bad_magic_and_version_are_format_errors() {
        let mut bytes = sample().to_bytes();
        bytes[0] ^= 0xff;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = sample().to_bytes();
        bytes[8] = 9;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("version")), "{err}");
    }

    #[test]
    fn every_truncation_is_an_io_error() {
        let bytes = sample().to_bytes();
        for cut in 8..bytes.len() {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Io(_))), "cut at {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("m.ckpt");
        sample().save(&path).unwrap();
        assert!(Checkpoint::load(&path).unwrap().params.bitwise_eq(&sample().params));
        assert!(matches!(Checkpoint::load(&dir.path().join("nope")), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(data in prop::collection::vec(any::<f64>(), 1..40), rows in 1usize..4) {
            let n = data.len() / rows * rows;
            prop_assume!(n > 0);
            let mut p = ParamSet::new();
            p.insert("x", Tensor::matrix(rows, n / rows, data[..n].to_vec()).unwrap());
            let c = Checkpoint::new(p);
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            prop_assert!(back.params.bitwise_eq(&c.params));
        }
    }
}
