//! `BGCK` checkpoint files.
//!
//! Little-endian layout:
//!
//! ```text
//! "BGCK" version:u32
//! config_len:u32 config:[u8; config_len]   (model configuration as JSON)
//! best_val_loss:f64 epoch:u64
//! tensor_count:u32
//! tensor_count × { name_len:u32 name:[u8] ndim:u32 dims:[u32; ndim] data:[f64] }
//! ```
//!
//! The table holds every model tensor in layout order followed by
//! `norm.stats`, the flattened [`Normalizer`].

use super::data::Normalizer;
use super::model::Model;
use super::{ModelConfig, NnError};
use std::io::{Read, Write};
use std::path::Path;

pub const BGCK_MAGIC: &[u8; 4] = b"BGCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const NORM_TENSOR: &str = "norm.stats";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub normalizer: Normalizer,
    pub best_val_loss: f64,
    pub epoch: usize,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn put_u32(out: &mut Vec<u8>, x: usize) -> Result<(), NnError> {
    let x = u32::try_from(x).map_err(|_| bad(format!("{x} exceeds u32")))?;
    out.extend_from_slice(&x.to_le_bytes());
    Ok(())
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) -> Result<(), NnError> {
    put_u32(out, name.len())?;
    out.extend_from_slice(name.as_bytes());
    put_u32(out, shape.len())?;
    for &d in shape {
        put_u32(out, d)?;
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<(), NnError> {
    let mut out = Vec::new();
    out.extend_from_slice(BGCK_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(&ckpt.model.config).map_err(|e| bad(e.to_string()))?;
    put_u32(&mut out, config.len())?;
    out.extend_from_slice(&config);
    out.extend_from_slice(&ckpt.best_val_loss.to_le_bytes());
    out.extend_from_slice(&(ckpt.epoch as u64).to_le_bytes());
    put_u32(&mut out, ckpt.model.tensors.len() + 1)?;
    for t in &ckpt.model.tensors {
        put_tensor(&mut out, &t.name, &t.shape, &ckpt.model.params[t.range()])?;
    }
    put_tensor(&mut out, NORM_TENSOR, &[Normalizer::LEN], &ckpt.normalizer.to_vec())?;
    w.write_all(&out).map_err(|source| NnError::Io { path: "<checkpoint>".into(), source })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let s = self.buf.get(self.pos..self.pos + n).ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, NnError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn tensor(&mut self) -> Result<(String, Vec<usize>, Vec<f64>), NnError> {
        let len = self.u32()?;
        let name = String::from_utf8(self.bytes(len)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
        let ndim = self.u32()?;
        let shape = (0..ndim).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(bad(format!("tensor {name} runs past the end of the file")));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok((name, shape, data))
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, NnError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|source| NnError::Io { path: "<checkpoint>".into(), source })?;
    let mut rd = Reader { buf: &buf, pos: 0 };
    if rd.bytes(4)? != BGCK_MAGIC {
        return Err(bad("missing BGCK magic"));
    }
    let version = rd.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = rd.u32()?;
    let config: ModelConfig = serde_json::from_slice(rd.bytes(len)?).map_err(|e| bad(format!("config block: {e}")))?;
    let best_val_loss = rd.f64()?;
    let epoch = rd.u64()? as usize;
    let mut model = Model::new(config)?;
    let count = rd.u32()?;
    if count != model.tensors.len() + 1 {
        return Err(bad(format!("{count} tensors, expected {}", model.tensors.len() + 1)));
    }
    for k in 0..model.tensors.len() {
        let (name, shape, data) = rd.tensor()?;
        let t = &model.tensors[k];
        if name != t.name || shape != t.shape {
            return Err(bad(format!("tensor {name} {shape:?} where {} {:?} was expected", t.name, t.shape)));
        }
        let range = t.range();
        model.params[range].copy_from_slice(&data);
    }
    let (name, _, data) = rd.tensor()?;
    if name != NORM_TENSOR {
        return Err(bad(format!("expected {NORM_TENSOR}, found {name}")));
    }
    let normalizer = Normalizer::from_slice(&data).ok_or_else(|| bad("normalizer has the wrong length"))?;
    if rd.pos != buf.len() {
        return Err(bad(format!("{} trailing bytes", buf.len() - rd.pos)));
    }
    Ok(Checkpoint { model, normalizer, best_val_loss, epoch })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), NnError> {
    let mut bytes = Vec::new();
    write_checkpoint(ckpt, &mut bytes)?;
    std::fs::write(path, bytes).map_err(|source| NnError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let f = std::fs::File::open(path).map_err(|source| NnError::Io { path: path.display().to_string(), source })?;
    read_checkpoint(std::io::BufReader::new(f))
}
