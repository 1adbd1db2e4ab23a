use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};
use url::Url;

use super::{CacheError, PageSnapshot, Variant};

const WORKERS: usize = 4;

struct State {
    snapshot: PageSnapshot,
    variant: Variant,
    /// `scheme://host[:port]` of the captured page.
    origin: String,
}

/// A running HTTP server answering from a snapshot.
pub struct EdgeServer {
    addr: SocketAddr,
    server: Arc<Server>,
    state: Arc<RwLock<Arc<State>>>,
    misses: Arc<Mutex<Vec<String>>>,
    workers: Vec<JoinHandle<()>>,
}

fn origin_of(url: &str) -> String {
    Url::parse(url)
        .map(|u| u.origin().ascii_serialization())
        .unwrap_or_default()
}

impl State {
    fn new(snapshot: PageSnapshot, variant: Variant) -> Self {
        let origin = origin_of(&snapshot.manifest.origin_url);
        State {
            snapshot,
            variant,
            origin,
        }
    }

    /// The manifest key for a request target, absolute or origin-relative.
    fn lookup(&self, target: &str) -> Option<String> {
        let absolute = if target.starts_with("http://") || target.starts_with("https://") {
            target.to_string()
        } else {
            format!("{}{}", self.origin, target)
        };
        let mut candidates = vec![absolute.clone()];
        if let Some(rest) = absolute.strip_prefix("http://") {
            candidates.push(format!("https://{rest}"));
        } else if let Some(rest) = absolute.strip_prefix("https://") {
            candidates.push(format!("http://{rest}"));
        }
        if let Ok(u) = Url::parse(&absolute) {
            candidates.push(u.to_string());
        }
        candidates
            .into_iter()
            .find(|c| self.snapshot.manifest.entries.contains_key(c))
    }

    fn respond(&self, target: &str) -> Option<Response<std::io::Cursor<Vec<u8>>>> {
        let key = self.lookup(target)?;
        let entry = &self.snapshot.manifest.entries[&key];
        let body = self.snapshot.body(&key, self.variant).ok()?;
        let mut resp = Response::from_data(body).with_status_code(entry.status);
        for (k, v) in &entry.headers {
            if let Ok(h) = Header::from_bytes(k.as_bytes(), v.as_bytes()) {
                resp = resp.with_header(h);
            }
        }
        Some(resp)
    }
}

/// Serves `variant` of `snapshot` on `addr` (port 0 picks a free one).
pub fn serve(snapshot: &PageSnapshot, variant: Variant, addr: &str) -> Result<EdgeServer, CacheError> {
    let server = Server::http(addr).map_err(|e| CacheError::PortBind {
        addr: addr.to_string(),
        reason: e.to_string(),
    })?;
    let bound = server.server_addr().to_ip().ok_or_else(|| CacheError::PortBind {
        addr: addr.to_string(),
        reason: "not an IP listener".to_string(),
    })?;
    let server = Arc::new(server);
    let state = Arc::new(RwLock::new(Arc::new(State::new(snapshot.clone(), variant))));
    let misses = Arc::new(Mutex::new(Vec::new()));
    let workers = (0..WORKERS)
        .map(|_| {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            let misses = Arc::clone(&misses);
            std::thread::spawn(move || {
                for req in server.incoming_requests() {
                    if !matches!(req.method(), Method::Get | Method::Head) {
                        let _ = req.respond(Response::from_data(Vec::new()).with_status_code(405));
                        continue;
                    }
                    let current = Arc::clone(&state.read().unwrap());
                    let target = req.url().to_string();
                    match current.respond(&target) {
                        Some(resp) => {
                            let _ = req.respond(resp);
                        }
                        None => {
                            log::info!("miss: {target}");
                            misses.lock().unwrap().push(target);
                            let _ = req.respond(Response::from_string("not in snapshot\n").with_status_code(404));
                        }
                    }
                }
            })
        })
        .collect();
    Ok(EdgeServer {
        addr: bound,
        server,
        state,
        misses,
        workers,
    })
}

impl EdgeServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://<addr>` plus the captured page's path and query.
    pub fn page_url(&self) -> String {
        let state = self.state.read().unwrap();
        let path = Url::parse(&state.snapshot.manifest.origin_url)
            .map(|u| {
                let mut p = u.path().to_string();
                if let Some(q) = u.query() {
                    p.push('?');
                    p.push_str(q);
                }
                p
            })
            .unwrap_or_else(|_| "/".to_string());
        format!("http://{}{}", self.addr, path)
    }

    pub fn variant(&self) -> Variant {
        self.state.read().unwrap().variant
    }

    /// Switches to a new snapshot or variant; requests in flight finish on the old one.
    pub fn swap(&self, snapshot: &PageSnapshot, variant: Variant) {
        *self.state.write().unwrap() = Arc::new(State::new(snapshot.clone(), variant));
    }

    /// Request targets that were not in the snapshot.
    pub fn misses(&self) -> Vec<String> {
        self.misses.lock().unwrap().clone()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for EdgeServer {
    fn drop(&mut self) {
        self.stop();
    }
}
