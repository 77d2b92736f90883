use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector};

const MAGIC: &[u8; 4] = b"EMB1";

/// Content-addressed vector store: one file per (provider, text) key under
/// `root/<2 hex>/<64 hex>.emb`. Writes go through a temp file and a rename so
/// concurrent writers of the same key never expose a partial entry.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EmbeddingCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key_path(&self, provider: &str, text: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(provider.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.root.join(&hex[..2]).join(format!("{hex}.emb"))
    }

    /// `Ok(None)` on a miss, `CacheCorruption` when the file exists but does not decode.
    pub fn get(&self, provider: &str, text: &str) -> Result<Option<EmbeddingVector>, EmbeddingError> {
        let path = self.key_path(provider, text);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        decode(&bytes)
            .map(Some)
            .ok_or_else(|| EmbeddingError::CacheCorruption(path.display().to_string()))
    }

    pub fn put(&self, provider: &str, text: &str, v: &EmbeddingVector) -> Result<(), EmbeddingError> {
        let path = self.key_path(provider, text);
        let dir = path.parent().expect("key path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode(v))?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn evict(&self, provider: &str, text: &str) -> Result<(), EmbeddingError> {
        match fs::remove_file(self.key_path(provider, text)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }
}

fn encode(v: &EmbeddingVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * v.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(v.dim() as u32).to_le_bytes());
    for x in &v.values {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Option<EmbeddingVector> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return None;
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().ok()?) as usize;
    let body = &bytes[8..];
    if dim == 0 || body.len() != dim * 4 {
        return None;
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Some(EmbeddingVector::new(values))
}

/// One vector per input text. Cached entries are served from `cache`; the
/// distinct misses go to the provider in one call and are written back.
/// Corrupt entries are logged, evicted and refetched.
pub fn embed_batch(
    provider: &dyn EmbeddingProvider,
    cache: Option<&EmbeddingCache>,
    texts: &[String],
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let Some(cache) = cache else {
        let out = provider.embed(texts)?;
        check_count(texts.len(), out.len())?;
        return check_dims(out);
    };
    let name = provider.name();
    let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
    let mut missing: Vec<String> = Vec::new();
    let mut slot_of: HashMap<&str, usize> = HashMap::new();
    for (i, t) in texts.iter().enumerate() {
        match cache.get(name, t) {
            Ok(Some(v)) => out[i] = Some(v),
            Ok(None) => {}
            Err(EmbeddingError::CacheCorruption(p)) => {
                log::warn!("evicting corrupt cache entry {p}");
                cache.evict(name, t)?;
            }
            Err(e) => return Err(e),
        }
        if out[i].is_none() && !slot_of.contains_key(t.as_str()) {
            slot_of.insert(t, missing.len());
            missing.push(t.clone());
        }
    }
    if !missing.is_empty() {
        let fetched = provider.embed(&missing)?;
        check_count(missing.len(), fetched.len())?;
        for (t, v) in missing.iter().zip(&fetched) {
            cache.put(name, t, v)?;
        }
        for (i, t) in texts.iter().enumerate() {
            if out[i].is_none() {
                out[i] = Some(fetched[slot_of[t.as_str()]].clone());
            }
        }
    }
    check_dims(out.into_iter().map(|v| v.expect("every slot filled")).collect())
}

fn check_count(expected: usize, got: usize) -> Result<(), EmbeddingError> {
    if expected != got {
        return Err(EmbeddingError::Provider(format!("expected {expected} vectors, got {got}")));
    }
    Ok(())
}

fn check_dims(vs: Vec<EmbeddingVector>) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    if let Some(first) = vs.first() {
        let d = first.dim();
        if let Some(bad) = vs.iter().find(|v| v.dim() != d) {
            return Err(EmbeddingError::DimensionMismatch(d, bad.dim()));
        }
    }
    Ok(vs)
}
