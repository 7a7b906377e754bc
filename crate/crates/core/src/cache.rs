//! Content-addressed on-disk cache for LLM calls and retrievals.
//!
//! Entries live at `<dir>/<kind>/<first two hex digits>/<sha256>.json` and
//! hold `{request, response, created_at}`. The key is the SHA-256 of the
//! kind followed by the request serialized as canonical JSON (object keys
//! sorted). Entries are written once, through a temporary file renamed into
//! place, so concurrent readers never observe a partial entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::llm::{ChatRequest, ChatResponse, ChatTransport};

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

fn cache_err(e: impl std::fmt::Display) -> Error {
    Error::Cache(e.to_string())
}

/// Serializes a value with object keys in sorted order.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps objects in a BTreeMap, so a round trip
    // through it sorts keys at every level.
    let v = serde_json::to_value(value).map_err(cache_err)?;
    serde_json::to_string(&v).map_err(cache_err)
}

pub fn cache_key<T: Serialize>(kind: &str, request: &T) -> Result<String> {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update([0u8]);
    h.update(canonical_json(request)?.as_bytes());
    Ok(hex::encode(h.finalize()))
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, kind: &str, key: &str) -> PathBuf {
        self.dir.join(kind).join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get<Q: Serialize, R: DeserializeOwned>(&self, kind: &str, request: &Q) -> Result<Option<R>> {
        let path = self.entry_path(kind, &cache_key(kind, request)?);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(e)),
        };
        let entry: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                return Ok(None);
            }
        };
        match entry.get("response").cloned().map(serde_json::from_value) {
            Some(Ok(r)) => Ok(Some(r)),
            _ => {
                log::warn!("ignoring malformed cache entry {}", path.display());
                Ok(None)
            }
        }
    }

    /// Stores a response. An existing entry for the same request is left as
    /// it is.
    pub fn put<Q: Serialize, R: Serialize>(&self, kind: &str, request: &Q, response: &R) -> Result<()> {
        let path = self.entry_path(kind, &cache_key(kind, request)?);
        if path.exists() {
            return Ok(());
        }
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent).map_err(cache_err)?;
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = serde_json::json!({
            "request": serde_json::to_value(request).map_err(cache_err)?,
            "response": serde_json::to_value(response).map_err(cache_err)?,
            "created_at": created_at,
        });
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(cache_err)?;
        tmp.write_all(serde_json::to_string_pretty(&entry).map_err(cache_err)?.as_bytes())
            .map_err(cache_err)?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            // another writer got there first with the same content
            Err(_) if path.exists() => Ok(()),
            Err(e) => Err(cache_err(e.error)),
        }
    }

    /// Returns the cached response or computes, stores and returns it.
    pub fn get_or_insert<Q, R, F>(&self, kind: &str, request: &Q, compute: F) -> Result<R>
    where
        Q: Serialize,
        R: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<R>,
    {
        if let Some(hit) = self.get(kind, request)? {
            return Ok(hit);
        }
        let r = compute()?;
        self.put(kind, request, &r)?;
        Ok(r)
    }
}

/// Serves chat requests from a [`Cache`], forwarding misses.
pub struct CachedTransport<T> {
    inner: T,
    cache: Cache,
}

impl<T> CachedTransport<T> {
    pub const KIND: &'static str = "chat";

    pub fn new(inner: T, cache: Cache) -> Self {
        Self { inner, cache }
    }
}

impl<T: ChatTransport> ChatTransport for CachedTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        self.cache
            .get_or_insert(Self::KIND, request, || self.inner.complete(request))
    }
}
