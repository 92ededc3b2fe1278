//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic[8] version:u32
//! config:str
//! count:u32 { name:str ndim:u32 dims:u64[ndim] data:f64[prod(dims)] }*
//! sections:u32 { name:str text:str }*
//! ```
//!
//! where `str` is a `u32` byte length followed by UTF-8 bytes. The trailing
//! sections carry the vocabulary and user-info dictionary.

use std::io::{Read, Write};
use std::path::Path;

use super::{ModelConfig, ProgModel};
use crate::autodiff::Tensor;
use crate::corpus::{UserInfoDictionary, Vocab};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PROGSLU\x01";
pub const VERSION: u32 = 1;

/// A model with the vocabularies needed to run it on text.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: ProgModel,
    pub vocab: Option<Vocab>,
    pub dictionary: Option<UserInfoDictionary>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> std::io::Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_str(&mut out, &ckpt.model.config().to_text());
    let store = ckpt.model.store();
    put_u32(&mut out, store.len() as u32);
    for (_, p) in store.iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.value.rank() as u32);
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut sections = Vec::new();
    if let Some(v) = &ckpt.vocab {
        sections.push(("vocab", v.to_text()));
    }
    if let Some(d) = &ckpt.dictionary {
        sections.push(("dictionary", d.to_text()));
    }
    put_u32(&mut out, sections.len() as u32);
    for (name, text) in sections {
        put_str(&mut out, name);
        put_str(&mut out, &text);
    }
    w.write_all(&out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|e| Error::Format(format!("checkpoint text: {e}")))
    }
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("reading checkpoint: {e}")))?;
    let mut rd = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if rd.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config = ModelConfig::from_text(&rd.str()?)?;
    let mut model = ProgModel::new(config)?;
    let count = rd.u32()? as usize;
    let mut values = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = rd.str()?;
        let ndim = rd.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| rd.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = rd.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("parameter too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        values.push((name, Tensor::new(shape, data)?));
    }
    model.load_values(values)?;
    let (mut vocab, mut dictionary) = (None, None);
    for _ in 0..rd.u32()? {
        let name = rd.str()?;
        let text = rd.str()?;
        match name.as_str() {
            "vocab" => vocab = Some(Vocab::from_text(&text)?),
            "dictionary" => dictionary = Some(UserInfoDictionary::parse(&text)?),
            other => {
                return Err(Error::Format(format!(
                    "unknown checkpoint section {other:?}"
                )))
            }
        }
    }
    if rd.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(Checkpoint {
        model,
        vocab,
        dictionary,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ckpt).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut bytes.as_slice())
}
