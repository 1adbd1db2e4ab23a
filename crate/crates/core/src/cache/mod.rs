//! Captured pages on disk and the variants of their code.
//!
//! Layout of a snapshot directory:
//!
//! ```text
//! manifest.json      request URL -> status, headers, body hash, code variants
//! blobs/<sha256>     bodies and span sidecars, content-addressed
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use url::Url;

use crate::js::{scan_html, scan_source, FunctionSpan, SourceKind};

mod capture;
mod serve;

pub use capture::{capture, import_dir, CaptureOptions};
pub use serve::{serve, EdgeServer};

pub const MANIFEST_SCHEMA: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unsupported manifest schema {0}")]
    Schema(u32),
    #[error("blob {0} is missing")]
    MissingBlob(String),
    #[error("{0} is not in the snapshot")]
    UnknownResource(String),
    #[error("{url} is not a code resource")]
    NotCode { url: String },
    #[error("rewritten {url} rejected: {reason}")]
    Validation { url: String, reason: String },
    #[error("capture of {url} failed: {reason}")]
    CaptureFailed { url: String, reason: String },
    #[error("cannot listen on {addr}: {reason}")]
    PortBind { addr: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which copy of a code resource to serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    /// Probed copy, for discovery sessions only.
    Instrumented,
    /// Unused function bodies removed.
    Eliminated,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "instrumented" => Ok(Variant::Instrumented),
            "eliminated" => Ok(Variant::Eliminated),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::Instrumented => "instrumented",
            Variant::Eliminated => "eliminated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Html,
    Script,
    Other,
}

impl ResourceKind {
    /// From the content type, falling back to the URL's extension.
    pub fn classify(url: &str, content_type: Option<&str>) -> Self {
        let ct = content_type.unwrap_or("").to_ascii_lowercase();
        if ct.contains("javascript") || ct.contains("ecmascript") {
            return ResourceKind::Script;
        }
        if ct.contains("text/html") {
            return ResourceKind::Html;
        }
        let path = Url::parse(url)
            .map(|u| u.path().to_ascii_lowercase())
            .unwrap_or_default();
        if path.ends_with(".js") || path.ends_with(".mjs") || path.ends_with(".cjs") {
            ResourceKind::Script
        } else if path.ends_with(".html") || path.ends_with(".htm") || path.ends_with('/') || path.is_empty() {
            if ct.is_empty() || ct.starts_with("text/") {
                ResourceKind::Html
            } else {
                ResourceKind::Other
            }
        } else {
            ResourceKind::Other
        }
    }

    pub fn source_kind(self) -> Option<SourceKind> {
        match self {
            ResourceKind::Html => Some(SourceKind::Html),
            ResourceKind::Script => Some(SourceKind::Script),
            ResourceKind::Other => None,
        }
    }
}

/// Per-resource state for HTML and script bodies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeEntry {
    /// The file name function ids use.
    pub label: String,
    pub first_party: bool,
    /// Skipped resources are always served as captured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    /// Hash of the span sidecar, shared by every variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrumented: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eliminated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub kind: ResourceKind,
    /// Hash of the captured body.
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureIssue {
    pub url: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub origin_url: String,
    /// Hosts whose scripts may be rewritten; subdomains included.
    pub first_party_domains: Vec<String>,
    pub entries: BTreeMap<String, Entry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capture_errors: Vec<CaptureIssue>,
}

/// The hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CacheError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file"),
        std::process::id()
    ));
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// A captured page in a snapshot directory.
#[derive(Debug, Clone)]
pub struct PageSnapshot {
    dir: PathBuf,
    pub manifest: Manifest,
}

fn host_matches(host: &str, domain: &str) -> bool {
    let domain = domain.trim().trim_start_matches('.').to_ascii_lowercase();
    let host = host.to_ascii_lowercase();
    !domain.is_empty() && (host == domain || host.ends_with(&format!(".{domain}")))
}

impl PageSnapshot {
    /// An empty snapshot. With no first-party domains, the origin's host is used.
    pub fn create(dir: &Path, origin_url: &str, first_party: &[String]) -> Result<Self, CacheError> {
        std::fs::create_dir_all(dir.join("blobs")).map_err(io_err(dir))?;
        let mut domains: Vec<String> = first_party.iter().filter(|d| !d.trim().is_empty()).cloned().collect();
        if domains.is_empty() {
            if let Some(h) = Url::parse(origin_url).ok().and_then(|u| u.host_str().map(str::to_string)) {
                domains.push(h);
            }
        }
        Ok(PageSnapshot {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                schema: MANIFEST_SCHEMA,
                origin_url: origin_url.to_string(),
                first_party_domains: domains,
                entries: BTreeMap::new(),
                capture_errors: Vec::new(),
            },
        })
    }

    pub fn open(dir: &Path) -> Result<Self, CacheError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.schema != MANIFEST_SCHEMA {
            return Err(CacheError::Schema(manifest.schema));
        }
        Ok(PageSnapshot {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn save(&self) -> Result<(), CacheError> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())
    }

    fn blob_path(&self, hash: &str) -> PathBuf {
        self.dir.join("blobs").join(hash)
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<String, CacheError> {
        let hash = content_hash(bytes);
        let path = self.blob_path(&hash);
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    pub fn blob(&self, hash: &str) -> Result<Vec<u8>, CacheError> {
        std::fs::read(self.blob_path(hash)).map_err(|_| CacheError::MissingBlob(hash.to_string()))
    }

    pub fn is_first_party(&self, url: &str) -> bool {
        Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .is_some_and(|h| self.manifest.first_party_domains.iter().any(|d| host_matches(&h, d)))
    }

    /// The file name used in function ids for `url`: the path for the
    /// origin's host, `host/path` for others.
    pub fn label_for(&self, url: &str) -> String {
        let Ok(u) = Url::parse(url) else {
            return url.to_string();
        };
        let origin_host = Url::parse(&self.manifest.origin_url)
            .ok()
            .and_then(|o| o.host_str().map(str::to_string));
        let mut path = u.path().trim_start_matches('/').to_string();
        if path.is_empty() || path.ends_with('/') {
            path.push_str("index.html");
        }
        if let Some(q) = u.query() {
            path.push('?');
            path.push_str(q);
        }
        match u.host_str() {
            Some(h) if Some(h) != origin_host.as_deref() => format!("{h}/{path}"),
            _ => path,
        }
    }

    /// Records a fetched resource. Third-party code is kept but marked skipped.
    pub fn add_resource(
        &mut self,
        url: &str,
        status: u16,
        headers: Vec<(String, String)>,
        body: &[u8],
    ) -> Result<(), CacheError> {
        let content_type = headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case("content-type"))
            .map(|(_, v)| v.as_str());
        let kind = ResourceKind::classify(url, content_type);
        let hash = self.put_blob(body)?;
        let code = kind.source_kind().map(|_| {
            let first_party = self.is_first_party(url);
            let skip_reason = if !first_party {
                Some("third-party".to_string())
            } else if status != 200 {
                Some(format!("status {status}"))
            } else if std::str::from_utf8(body).is_err() {
                Some("not UTF-8".to_string())
            } else {
                None
            };
            CodeEntry {
                label: self.label_for(url),
                first_party,
                skip_reason,
                spans: None,
                instrumented: None,
                eliminated: None,
            }
        });
        self.manifest.entries.insert(
            url.to_string(),
            Entry {
                status,
                headers,
                kind,
                body: hash,
                code,
            },
        );
        Ok(())
    }

    pub fn entry(&self, url: &str) -> Result<&Entry, CacheError> {
        self.manifest
            .entries
            .get(url)
            .ok_or_else(|| CacheError::UnknownResource(url.to_string()))
    }

    fn code_mut(&mut self, url: &str) -> Result<&mut CodeEntry, CacheError> {
        let entry = self
            .manifest
            .entries
            .get_mut(url)
            .ok_or_else(|| CacheError::UnknownResource(url.to_string()))?;
        entry.code.as_mut().ok_or_else(|| CacheError::NotCode { url: url.to_string() })
    }

    /// Code resources that may be rewritten, in URL order.
    pub fn eligible(&self) -> Vec<String> {
        self.manifest
            .entries
            .iter()
            .filter(|(_, e)| e.code.as_ref().is_some_and(|c| c.skip_reason.is_none()))
            .map(|(u, _)| u.clone())
            .collect()
    }

    /// Code resources left as captured, with the reason.
    pub fn skipped(&self) -> Vec<(String, String)> {
        self.manifest
            .entries
            .iter()
            .filter_map(|(u, e)| {
                let reason = e.code.as_ref()?.skip_reason.clone()?;
                Some((u.clone(), reason))
            })
            .collect()
    }

    pub fn original_text(&self, url: &str) -> Result<String, CacheError> {
        let bytes = self.blob(&self.entry(url)?.body)?;
        String::from_utf8(bytes).map_err(|_| CacheError::NotCode { url: url.to_string() })
    }

    /// The body served for `url` under `variant`; the original when the
    /// variant was never produced.
    pub fn body(&self, url: &str, variant: Variant) -> Result<Vec<u8>, CacheError> {
        let entry = self.entry(url)?;
        let hash = entry
            .code
            .as_ref()
            .and_then(|c| match variant {
                Variant::Original => None,
                Variant::Instrumented => c.instrumented.clone(),
                Variant::Eliminated => c.eliminated.clone(),
            })
            .unwrap_or_else(|| entry.body.clone());
        self.blob(&hash)
    }

    /// Sum of body sizes under `variant`.
    pub fn total_bytes(&self, variant: Variant) -> Result<u64, CacheError> {
        let mut total = 0;
        for url in self.manifest.entries.keys() {
            total += self.body(url, variant)?.len() as u64;
        }
        Ok(total)
    }

    pub fn spans(&self, url: &str) -> Result<Option<Vec<FunctionSpan>>, CacheError> {
        let Some(hash) = self.entry(url)?.code.as_ref().and_then(|c| c.spans.clone()) else {
            return Ok(None);
        };
        let text = String::from_utf8(self.blob(&hash)?).map_err(|_| CacheError::MissingBlob(hash.clone()))?;
        let spans = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Some(spans))
    }

    /// Stores the span sidecar and the probed copy of `url`.
    pub fn set_instrumented(&mut self, url: &str, spans: &[FunctionSpan], text: &str) -> Result<(), CacheError> {
        let mut jsonl = String::new();
        for s in spans {
            jsonl.push_str(&serde_json::to_string(s)?);
            jsonl.push('\n');
        }
        let spans_hash = self.put_blob(jsonl.as_bytes())?;
        let inst_hash = self.put_blob(text.as_bytes())?;
        let code = self.code_mut(url)?;
        code.spans = Some(spans_hash);
        code.instrumented = Some(inst_hash);
        Ok(())
    }

    pub fn set_skipped(&mut self, url: &str, reason: &str) -> Result<(), CacheError> {
        let code = self.code_mut(url)?;
        code.skip_reason = Some(reason.to_string());
        code.instrumented = None;
        code.eliminated = None;
        Ok(())
    }

    /// Drops the eliminated variant so `url` is served as captured.
    pub fn clear_eliminated(&mut self, url: &str) -> Result<(), CacheError> {
        self.code_mut(url)?.eliminated = None;
        Ok(())
    }

    /// Checks that every referenced blob exists.
    pub fn validate(&self) -> Result<(), CacheError> {
        for e in self.manifest.entries.values() {
            let mut hashes = vec![&e.body];
            if let Some(c) = &e.code {
                hashes.extend(c.spans.iter().chain(&c.instrumented).chain(&c.eliminated));
            }
            for h in hashes {
                if !self.blob_path(h).is_file() {
                    return Err(CacheError::MissingBlob(h.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Installs rewritten bodies as the eliminated variant: all of them, or
/// none if any fails to scan. Returns how many files changed.
pub fn promote(snapshot: &mut PageSnapshot, rewritten: &BTreeMap<String, String>) -> Result<usize, CacheError> {
    for (url, text) in rewritten {
        let entry = snapshot.entry(url)?;
        let code = entry
            .code
            .as_ref()
            .ok_or_else(|| CacheError::NotCode { url: url.clone() })?;
        if let Some(reason) = &code.skip_reason {
            return Err(CacheError::Validation {
                url: url.clone(),
                reason: format!("resource is skipped ({reason})"),
            });
        }
        let scanned = match entry.kind {
            ResourceKind::Html => scan_html(text, &code.label).map(drop),
            _ => scan_source(text, &code.label, SourceKind::Script).map(drop),
        };
        scanned.map_err(|e| CacheError::Validation {
            url: url.clone(),
            reason: e.to_string(),
        })?;
    }
    let mut next = snapshot.manifest.clone();
    let mut changed = 0;
    for (url, text) in rewritten {
        let hash = snapshot.put_blob(text.as_bytes())?;
        let code = next.entries.get_mut(url).and_then(|e| e.code.as_mut()).unwrap();
        if code.eliminated.as_deref() != Some(hash.as_str()) {
            code.eliminated = Some(hash);
            changed += 1;
        }
    }
    if changed > 0 {
        let previous = std::mem::replace(&mut snapshot.manifest, next);
        if let Err(e) = snapshot.save() {
            snapshot.manifest = previous;
            return Err(e);
        }
    }
    Ok(changed)
}
