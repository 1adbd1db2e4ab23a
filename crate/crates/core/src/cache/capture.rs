use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use url::Url;
use walkdir::WalkDir;

use super::{io_err, CacheError, CaptureIssue, PageSnapshot, ResourceKind};
use crate::dom::Document;

const BODY_LIMIT: u64 = 64 * 1024 * 1024;

/// Headers that describe the wire form rather than the body we keep.
const DROPPED_HEADERS: &[&str] = &[
    "content-length",
    "content-encoding",
    "transfer-encoding",
    "connection",
    "keep-alive",
    "date",
];

#[derive(Debug, Clone)]
pub struct CaptureOptions {
    pub out: PathBuf,
    pub first_party: Vec<String>,
    pub timeout: Duration,
}

impl CaptureOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        CaptureOptions {
            out: out.into(),
            first_party: Vec::new(),
            timeout: Duration::from_secs(30),
        }
    }
}

struct Fetched {
    status: u16,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

fn fetch(agent: &ureq::Agent, url: &str) -> Result<Fetched, String> {
    let mut resp = agent.get(url).call().map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let headers = resp
        .headers()
        .iter()
        .filter(|(k, _)| !DROPPED_HEADERS.contains(&k.as_str()))
        .filter_map(|(k, v)| Some((k.as_str().to_string(), v.to_str().ok()?.to_string())))
        .collect();
    let body = resp
        .body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_vec()
        .map_err(|e| e.to_string())?;
    Ok(Fetched { status, headers, body })
}

/// Subresource URLs referenced by an HTML document, in document order.
pub(crate) fn subresources(html: &str, base: &Url) -> Vec<String> {
    let doc = Document::parse(html);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in doc.elements() {
        let attr = match doc.tag(id) {
            "script" | "img" | "iframe" | "source" => "src",
            "link" => {
                let rel = doc.attr(id, "rel").unwrap_or("").to_ascii_lowercase();
                if rel.split_whitespace().any(|r| {
                    matches!(r, "stylesheet" | "preload" | "modulepreload" | "icon" | "manifest")
                }) {
                    "href"
                } else {
                    continue;
                }
            }
            _ => continue,
        };
        let Some(raw) = doc.attr(id, attr).map(str::trim).filter(|s| !s.is_empty()) else {
            continue;
        };
        let Ok(mut u) = base.join(raw) else { continue };
        if !matches!(u.scheme(), "http" | "https") {
            continue;
        }
        u.set_fragment(None);
        if seen.insert(u.to_string()) {
            out.push(u.to_string());
        }
    }
    out
}

/// Fetches the page at `url` and every resource it references into a new
/// snapshot at `options.out`. Failures of individual resources are recorded
/// in the manifest; only an unreachable page is an error.
pub fn capture(url: &str, options: &CaptureOptions) -> Result<PageSnapshot, CacheError> {
    let base = Url::parse(url).map_err(|e| CacheError::CaptureFailed {
        url: url.to_string(),
        reason: e.to_string(),
    })?;
    let config = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .max_redirects(10)
        .timeout_global(Some(options.timeout))
        .build();
    let agent = ureq::Agent::new_with_config(config);

    let page = fetch(&agent, base.as_str()).map_err(|reason| CacheError::CaptureFailed {
        url: url.to_string(),
        reason,
    })?;
    if !(200..300).contains(&page.status) {
        return Err(CacheError::CaptureFailed {
            url: url.to_string(),
            reason: format!("status {}", page.status),
        });
    }
    let mut snap = PageSnapshot::create(&options.out, base.as_str(), &options.first_party)?;
    let html = String::from_utf8_lossy(&page.body).into_owned();
    snap.add_resource(base.as_str(), page.status, page.headers, &page.body)?;

    for sub in subresources(&html, &base) {
        if snap.manifest.entries.contains_key(&sub) {
            continue;
        }
        match fetch(&agent, &sub) {
            Ok(f) => {
                if !(200..300).contains(&f.status) {
                    log::warn!("{sub}: status {}", f.status);
                    snap.manifest.capture_errors.push(CaptureIssue {
                        url: sub.clone(),
                        error: format!("status {}", f.status),
                    });
                }
                snap.add_resource(&sub, f.status, f.headers, &f.body)?;
            }
            Err(error) => {
                log::warn!("{sub}: {error}");
                snap.manifest.capture_errors.push(CaptureIssue { url: sub, error });
            }
        }
    }
    snap.save()?;
    Ok(snap)
}

fn content_type_for(path: &Path) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    Some(match ext.as_str() {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" | "cjs" => "application/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "svg" => "image/svg+xml",
        "txt" => "text/plain",
        _ => return None,
    })
}

/// Builds a snapshot from files on disk, served as if `dir` were the root of
/// `origin`. `page` is the document's path relative to `dir`.
pub fn import_dir(
    dir: &Path,
    origin: &str,
    page: &str,
    options: &CaptureOptions,
) -> Result<PageSnapshot, CacheError> {
    let base = Url::parse(origin).map_err(|e| CacheError::CaptureFailed {
        url: origin.to_string(),
        reason: e.to_string(),
    })?;
    let page_url = base.join(page).map_err(|e| CacheError::CaptureFailed {
        url: page.to_string(),
        reason: e.to_string(),
    })?;
    let mut snap = PageSnapshot::create(&options.out, page_url.as_str(), &options.first_party)?;
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    for file in files {
        let rel = file.strip_prefix(dir).unwrap_or(&file);
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let Ok(url) = base.join(&rel) else { continue };
        let body = std::fs::read(&file).map_err(io_err(&file))?;
        let mut headers = Vec::new();
        if let Some(ct) = content_type_for(&file) {
            headers.push(("content-type".to_string(), ct.to_string()));
        }
        snap.add_resource(url.as_str(), 200, headers, &body)?;
    }
    if !snap.manifest.entries.contains_key(page_url.as_str()) {
        return Err(CacheError::CaptureFailed {
            url: page_url.to_string(),
            reason: format!("{page} not found under {}", dir.display()),
        });
    }
    let entry = &snap.manifest.entries[page_url.as_str()];
    if entry.kind != ResourceKind::Html {
        return Err(CacheError::CaptureFailed {
            url: page_url.to_string(),
            reason: "not an HTML document".to_string(),
        });
    }
    snap.save()?;
    Ok(snap)
}
