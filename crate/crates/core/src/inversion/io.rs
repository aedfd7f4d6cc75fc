//! Binary embedding and checkpoint containers, and the training manifest.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::InversionModel;
use super::params::{ModelConfig, Params};
use super::{EmbeddingTensor, InversionError, Result};

const EMBEDDING_MAGIC: &[u8; 4] = b"VTVE";
const MODEL_MAGIC: &[u8; 4] = b"VTVM";

fn format_err(msg: impl Into<String>) -> InversionError {
    InversionError::Format(msg.into())
}

fn read_exact<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => format_err(format!("truncated {what}")),
        _ => InversionError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let b = read_exact(r, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_f32s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f64>> {
    let b = read_exact(r, n * 4, what)?;
    Ok(b.chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_f32s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&(*x as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_embedding<W: Write>(mut w: W, e: &EmbeddingTensor) -> Result<()> {
    w.write_all(EMBEDDING_MAGIC)?;
    for n in [e.layers(), e.frames(), e.dim()] {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    write_f32s(&mut w, e.as_slice())
}

pub fn read_embedding<R: Read>(mut r: R) -> Result<EmbeddingTensor> {
    if read_exact(&mut r, 4, "embedding header")? != EMBEDDING_MAGIC {
        return Err(format_err("not an embedding file"));
    }
    let l = read_u32(&mut r, "embedding header")? as usize;
    let t = read_u32(&mut r, "embedding header")? as usize;
    let d = read_u32(&mut r, "embedding header")? as usize;
    let n = l
        .checked_mul(t)
        .and_then(|x| x.checked_mul(d))
        .ok_or_else(|| format_err("embedding too large"))?;
    let data = read_f32s(&mut r, n, "embedding data")?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(format_err("trailing bytes after embedding data"));
    }
    EmbeddingTensor::new(l, t, d, data)
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingTensor> {
    read_embedding(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_embedding(path: &Path, e: &EmbeddingTensor) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_embedding(&mut w, e)?;
    w.flush()?;
    Ok(())
}

/// Layout: magic, tensor count, per tensor (name length, name, element
/// count), parameter blob, the four batch-norm buffers, seed, JSON config.
/// Values are stored as `f32`.
pub fn write_model<W: Write>(mut w: W, m: &InversionModel) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    let tensors = m.params.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in &tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.len() as u32).to_le_bytes())?;
    }
    for (_, t) in &tensors {
        write_f32s(&mut w, t)?;
    }
    for buf in [&m.bn_a_mean, &m.bn_a_var, &m.bn_b_mean, &m.bn_b_var] {
        write_f32s(&mut w, buf)?;
    }
    w.write_all(&m.seed.to_le_bytes())?;
    let cfg = serde_json::to_vec(&m.config).map_err(|e| format_err(e.to_string()))?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<InversionModel> {
    if read_exact(&mut r, 4, "checkpoint header")? != MODEL_MAGIC {
        return Err(format_err("not a model checkpoint"));
    }
    let count = read_u32(&mut r, "dimension table")? as usize;
    if count > 1024 {
        return Err(format_err("implausible tensor count"));
    }
    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(&mut r, "dimension table")? as usize;
        if len > 256 {
            return Err(format_err("implausible tensor name"));
        }
        let name = String::from_utf8(read_exact(&mut r, len, "dimension table")?)
            .map_err(|_| format_err("tensor name is not UTF-8"))?;
        let n = read_u32(&mut r, "dimension table")? as usize;
        table.push((name, n));
    }
    let mut blobs = Vec::with_capacity(count);
    for (name, n) in &table {
        blobs.push(read_f32s(&mut r, *n, name)?);
    }
    // The config follows the buffers, whose sizes it determines; buffer
    // sizes are recovered from the batch-norm scale tensors instead.
    let size_of = |name: &str| table.iter().find(|(n, _)| n == name).map(|(_, n)| *n);
    let ca = size_of("bn_a.weight").ok_or_else(|| format_err("missing bn_a.weight"))?;
    let cb = size_of("bn_b.weight").ok_or_else(|| format_err("missing bn_b.weight"))?;
    let bn_a_mean = read_f32s(&mut r, ca, "batch-norm buffers")?;
    let bn_a_var = read_f32s(&mut r, ca, "batch-norm buffers")?;
    let bn_b_mean = read_f32s(&mut r, cb, "batch-norm buffers")?;
    let bn_b_var = read_f32s(&mut r, cb, "batch-norm buffers")?;
    let seed_bytes = read_exact(&mut r, 8, "seed")?;
    let seed = u64::from_le_bytes(seed_bytes.try_into().expect("eight bytes"));
    let cfg_len = read_u32(&mut r, "config")? as usize;
    let config: ModelConfig = serde_json::from_slice(&read_exact(&mut r, cfg_len, "config")?)
        .map_err(|e| format_err(format!("config: {e}")))?;
    config.validate()?;

    let mut params = Params::zeros(&config);
    {
        let expected = params.tensors_mut();
        if expected.len() != table.len() {
            return Err(format_err("tensor table does not match config"));
        }
        for ((name, dst), ((tname, n), blob)) in expected.into_iter().zip(table.iter().zip(blobs)) {
            if name != tname || dst.len() != *n {
                return Err(format_err(format!(
                    "tensor {tname} ({n}) does not match config ({name}, {})",
                    dst.len()
                )));
            }
            *dst = blob;
        }
    }
    if bn_a_mean.len() != config.conv_channels || bn_b_mean.len() != 1 {
        return Err(format_err("batch-norm buffers do not match config"));
    }
    Ok(InversionModel {
        config,
        params,
        bn_a_mean,
        bn_a_var,
        bn_b_mean,
        bn_b_var,
        seed,
    })
}

pub fn save_model(path: &Path, m: &InversionModel) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<InversionModel> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub embedding: PathBuf,
    pub target: PathBuf,
    pub speaker_id: String,
    pub split: Split,
}

/// Reads a CSV manifest `embedding,target,speaker_id,split`. Relative paths
/// resolve against `base`. A speaker appearing in more than one split is
/// an error.
pub fn read_manifest<R: Read>(r: R, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["embedding", "target", "speaker_id", "split"] {
        return Err(format_err(
            "manifest header must be embedding,target,speaker_id,split",
        ));
    }
    let mut entries = Vec::new();
    for row in rdr.deserialize() {
        let mut e: ManifestEntry = row.map_err(|e| format_err(format!("manifest: {e}")))?;
        if e.embedding.is_relative() {
            e.embedding = base.join(&e.embedding);
        }
        if e.target.is_relative() {
            e.target = base.join(&e.target);
        }
        entries.push(e);
    }
    check_speaker_disjoint(&entries)?;
    Ok(entries)
}

pub fn check_speaker_disjoint(entries: &[ManifestEntry]) -> Result<()> {
    let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
    for e in entries {
        if let Some(prev) = seen.insert(&e.speaker_id, e.split) {
            if prev != e.split {
                return Err(format_err(format!(
                    "speaker {} appears in both {prev:?} and {:?} splits",
                    e.speaker_id, e.split
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_round_trip() {
        let data: Vec<f64> = (0..25 * 3 * 2).map(|i| i as f64 * 0.25 - 3.0).collect();
        let e = EmbeddingTensor::new(25, 3, 2, data).unwrap();
        let mut buf = Vec::new();
        write_embedding(&mut buf, &e).unwrap();
        assert_eq!(&buf[..4], b"VTVE");
        assert_eq!(buf.len(), 16 + 4 * 150);
        assert_eq!(read_embedding(&buf[..]).unwrap(), e);
        assert!(matches!(
            read_embedding(&buf[..buf.len() - 1]),
            Err(InversionError::Format(_))
        ));
        buf[0] = b'X';
        assert!(read_embedding(&buf[..]).is_err());
    }

    #[test]
    fn model_round_trip_is_f32_exact() {
        let m = InversionModel::new(ModelConfig::tiny(3), 42).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let back = read_model(&buf[..]).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.seed, 42);
        for (a, b) in back.params.flatten().iter().zip(m.params.flatten()) {
            assert_eq!(*a, b as f32 as f64);
        }
        let mut again = Vec::new();
        write_model(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn manifest_rejects_shared_speaker() {
        let ok = "embedding,target,speaker_id,split\na.vtve,a.csv,s1,train\nb.vtve,b.csv,s2,val\nc.vtve,c.csv,s1,train\n";
        let e = read_manifest(ok.as_bytes(), Path::new("/data")).unwrap();
        assert_eq!(e[0].embedding, Path::new("/data/a.vtve"));
        assert_eq!(e[1].split, Split::Val);
        let bad =
            "embedding,target,speaker_id,split\na.vtve,a.csv,s1,train\nb.vtve,b.csv,s1,test\n";
        assert!(read_manifest(bad.as_bytes(), Path::new(".")).is_err());
    }
}
