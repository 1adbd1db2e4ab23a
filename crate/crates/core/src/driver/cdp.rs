//! A real browser driven over the DevTools protocol.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::{DispatchStatus, DriverError, HitResult, PageSession};
use crate::dom::ElementPath;
use crate::events::EventType;

/// Environment variable naming the browser's DevTools HTTP endpoint.
pub const ENDPOINT_ENV: &str = "JSPRUNE_CDP_ENDPOINT";

#[derive(Debug, Clone)]
pub struct CdpConfig {
    /// e.g. `http://127.0.0.1:9222`.
    pub endpoint: String,
    /// Key sent for keyboard events.
    pub key: String,
    /// Limit for one protocol command, page loads included.
    pub command_timeout: Duration,
    pub retries: u32,
}

impl Default for CdpConfig {
    fn default() -> Self {
        CdpConfig {
            endpoint: "http://127.0.0.1:9222".to_string(),
            key: "a".to_string(),
            command_timeout: Duration::from_secs(15),
            retries: 2,
        }
    }
}

impl CdpConfig {
    /// Defaults, with the endpoint taken from the environment when set.
    pub fn from_env() -> Self {
        let mut c = CdpConfig::default();
        if let Ok(e) = std::env::var(ENDPOINT_ENV) {
            if !e.trim().is_empty() {
                c.endpoint = e.trim().trim_end_matches('/').to_string();
            }
        }
        c
    }
}

/// Builds the identifying path of an element, in the page. Must agree with
/// [`crate::dom::XPathBuilder`].
const BUILDER_JS: &str = r#"
const __q = v => !v.includes('"') ? '"' + v + '"' : (!v.includes("'") ? "'" + v + "'" : null);
const __tag = e => e.tagName.toLowerCase();
const __all = [];
(function walk(n) { for (const c of n.children) { __all.push(c); walk(c); } })(document);
const __ids = new Map();
for (const e of __all) { const id = e.getAttribute('id'); if (id) __ids.set(id, (__ids.get(id) || 0) + 1); }
const __step = e => {
  let k = 1;
  for (let s = e.previousElementSibling; s; s = s.previousElementSibling) if (__tag(s) === __tag(e)) k++;
  return __tag(e) + '[' + k + ']';
};
const __anchor = e => {
  for (const a of ['id', 'class']) {
    const v = e.getAttribute(a);
    if (v) { const q = __q(v); if (q) return '//' + __tag(e) + '[@' + a + ' = ' + q + ']'; }
  }
  return null;
};
const __path = e => {
  const chain = [];
  for (let c = e; c; c = c.parentElement) chain.push(c);
  if (chain.some(c => { const id = c.getAttribute('id'); return id && __ids.get(id) > 1; }))
    return '/' + chain.reverse().map(__step).join('/');
  const steps = [];
  for (const c of chain) {
    const head = __anchor(c);
    if (head) return [head, ...steps.reverse()].join('/');
    steps.push(__step(c));
  }
  return '/' + steps.reverse().join('/');
};
"#;

const HIT_JS: &str = r#"
const r = document.evaluate(__p, document, null, 7, null);
if (r.snapshotLength !== 1) return { status: 'unresolved' };
const e = r.snapshotItem(0);
e.scrollIntoView({ block: 'center', inline: 'center' });
const st = getComputedStyle(e);
const b = e.getBoundingClientRect();
if (b.width === 0 || b.height === 0 || st.display === 'none' || st.visibility === 'hidden' || e.closest('[hidden]'))
  return { status: 'hidden' };
const t = document.elementFromPoint(b.left + b.width / 2, b.top + b.height / 2);
if (!t) return { status: 'hidden' };
return { status: 'hit', topmost: __path(t), on_target: e.contains(t) };
"#;

const LOCATE_JS: &str = r#"
const r = document.evaluate(__p, document, null, 7, null);
if (r.snapshotLength !== 1) return null;
const e = r.snapshotItem(0);
e.scrollIntoView({ block: 'center', inline: 'center' });
const b = e.getBoundingClientRect();
return { x: b.left + b.width / 2, y: b.top + b.height / 2, right: b.right, bottom: b.bottom };
"#;

const SYNTHETIC_JS: &str = r#"
const r = document.evaluate(__p, document, null, 7, null);
if (r.snapshotLength !== 1) return false;
const e = r.snapshotItem(0);
if (__t === 'focus') { e.focus(); return true; }
const ev = __t.startsWith('drag') ? new DragEvent(__t, { bubbles: true, cancelable: true }) : new Event(__t, { bubbles: true, cancelable: true });
e.dispatchEvent(ev);
return true;
"#;

fn script(body: &str, args: &[(&str, &str)]) -> String {
    let mut s = String::from("(() => {\n");
    s.push_str(BUILDER_JS);
    for (name, value) in args {
        s.push_str(&format!("const {name} = {};\n", serde_json::to_string(value).unwrap()));
    }
    s.push_str(body);
    s.push_str("\n})()");
    s
}

/// A page in a browser tab reached over the DevTools websocket.
pub struct CdpSession {
    config: CdpConfig,
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
    next_id: u64,
    console: VecDeque<String>,
    loaded: bool,
}

impl std::fmt::Debug for CdpSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CdpSession").field("endpoint", &self.config.endpoint).finish()
    }
}

/// Opens a tab on the browser at `config.endpoint` and loads `url` in it.
pub fn cdp_load(url: &str, config: CdpConfig) -> Result<CdpSession, DriverError> {
    let mut last = DriverError::EndpointUnreachable(config.endpoint.clone());
    for _ in 0..=config.retries {
        match CdpSession::connect(config.clone()) {
            Ok(mut s) => {
                s.load(url)?;
                return Ok(s);
            }
            Err(e) if e.is_retryable() => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

fn new_target(endpoint: &str) -> Result<String, DriverError> {
    let unreachable = |e: ureq::Error| DriverError::EndpointUnreachable(format!("{endpoint}: {e}"));
    let url = format!("{endpoint}/json/new?about:blank");
    let mut resp = match ureq::put(&url).send_empty() {
        Ok(r) => r,
        Err(ureq::Error::StatusCode(_)) => ureq::get(&url).call().map_err(unreachable)?,
        Err(e) => return Err(unreachable(e)),
    };
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| DriverError::Protocol(e.to_string()))?;
    let v: Value = serde_json::from_str(&body).map_err(|e| DriverError::Protocol(e.to_string()))?;
    v["webSocketDebuggerUrl"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| DriverError::Protocol("target has no websocket url".into()))
}

impl CdpSession {
    pub fn connect(config: CdpConfig) -> Result<Self, DriverError> {
        let ws_url = new_target(&config.endpoint)?;
        let (socket, _) = tungstenite::connect(ws_url.as_str())
            .map_err(|e| DriverError::EndpointUnreachable(format!("{ws_url}: {e}")))?;
        let mut s = CdpSession {
            config,
            socket,
            next_id: 0,
            console: VecDeque::new(),
            loaded: false,
        };
        for domain in ["Page.enable", "Runtime.enable", "DOM.enable"] {
            s.call(domain, json!({}))?;
        }
        Ok(s)
    }

    fn set_timeout(&mut self, t: Option<Duration>) {
        if let MaybeTlsStream::Plain(tcp) = self.socket.get_mut() {
            let _ = tcp.set_read_timeout(t.map(|d| d.max(Duration::from_millis(1))));
        }
    }

    /// Reads one message, or `None` when nothing arrives before `timeout`.
    fn read(&mut self, timeout: Duration) -> Result<Option<Value>, DriverError> {
        self.set_timeout(Some(timeout));
        match self.socket.read() {
            Ok(Message::Text(t)) => serde_json::from_str(t.as_str())
                .map(Some)
                .map_err(|e| DriverError::Protocol(e.to_string())),
            Ok(Message::Close(_)) => Err(DriverError::SessionLost("browser closed the socket".into())),
            Ok(_) => Ok(None),
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Ok(None)
            }
            Err(e) => Err(DriverError::SessionLost(e.to_string())),
        }
    }

    fn on_event(&mut self, msg: &Value) {
        match msg["method"].as_str() {
            Some("Runtime.consoleAPICalled") => {
                let args = msg["params"]["args"].as_array().cloned().unwrap_or_default();
                let line: Vec<String> = args
                    .iter()
                    .map(|a| match &a["value"] {
                        Value::String(s) => s.clone(),
                        Value::Null => a["description"].as_str().unwrap_or("").to_string(),
                        v => v.to_string(),
                    })
                    .collect();
                self.console.push_back(line.join(" "));
            }
            Some("Page.loadEventFired") => self.loaded = true,
            Some("Inspector.detached") | Some("Inspector.targetCrashed") => self.loaded = false,
            _ => {}
        }
    }

    /// Sends a command and waits for its reply, collecting events meanwhile.
    /// `Ok(None)` means the reply did not arrive in time.
    fn try_call(&mut self, method: &str, params: Value) -> Result<Option<Value>, DriverError> {
        self.next_id += 1;
        let id = self.next_id;
        let msg = json!({ "id": id, "method": method, "params": params });
        self.socket
            .send(Message::text(msg.to_string()))
            .map_err(|e| DriverError::SessionLost(e.to_string()))?;
        let deadline = Instant::now() + self.config.command_timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            let Some(v) = self.read(left)? else { continue };
            if v["id"].as_u64() == Some(id) {
                if let Some(err) = v.get("error") {
                    return Err(DriverError::Protocol(format!("{method}: {err}")));
                }
                return Ok(Some(v["result"].clone()));
            }
            self.on_event(&v);
        }
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, DriverError> {
        self.try_call(method, params)?
            .ok_or_else(|| DriverError::Protocol(format!("{method}: no reply")))
    }

    fn eval(&mut self, expression: &str) -> Result<Option<Value>, DriverError> {
        let r = self.try_call(
            "Runtime.evaluate",
            json!({ "expression": expression, "returnByValue": true, "awaitPromise": true }),
        )?;
        let Some(r) = r else { return Ok(None) };
        if let Some(ex) = r.get("exceptionDetails") {
            return Err(DriverError::Protocol(format!("page script threw: {ex}")));
        }
        Ok(Some(r["result"]["value"].clone()))
    }

    fn eval_value(&mut self, expression: &str) -> Result<Value, DriverError> {
        self.eval(expression)?
            .ok_or_else(|| DriverError::Protocol("evaluation timed out".into()))
    }

    fn object_listeners(&mut self, expression: &str) -> Result<Vec<EventType>, DriverError> {
        let r = self.call(
            "Runtime.evaluate",
            json!({ "expression": expression, "objectGroup": "jsprune" }),
        )?;
        let Some(object_id) = r["result"]["objectId"].as_str().map(str::to_string) else {
            return Ok(Vec::new());
        };
        let l = self.call("DOMDebugger.getEventListeners", json!({ "objectId": object_id }))?;
        Ok(l["listeners"]
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|x| x["type"].as_str())
                    .map(EventType::from)
                    .collect()
            })
            .unwrap_or_default())
    }

    fn wait_for_load(&mut self, what: &str) -> Result<(), DriverError> {
        let deadline = Instant::now() + self.config.command_timeout;
        while !self.loaded {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(DriverError::NavigationTimeout(what.to_string()));
            }
            if let Some(v) = self.read(left)? {
                self.on_event(&v);
            }
        }
        Ok(())
    }

    fn mouse(&mut self, kind: &str, x: f64, y: f64, clicks: u32) -> Result<(), DriverError> {
        let mut p = json!({ "type": kind, "x": x, "y": y });
        if kind != "mouseMoved" {
            p["button"] = json!("left");
            p["clickCount"] = json!(clicks);
        }
        self.call("Input.dispatchMouseEvent", p).map(drop)
    }

    fn key(&mut self, kind: &str) -> Result<(), DriverError> {
        let key = self.config.key.clone();
        let mut p = json!({ "type": kind, "key": key });
        if kind == "keyDown" {
            p["text"] = json!(key);
        }
        self.call("Input.dispatchKeyEvent", p).map(drop)
    }
}

impl PageSession for CdpSession {
    fn load(&mut self, url: &str) -> Result<(), DriverError> {
        self.loaded = false;
        let r = self.call("Page.navigate", json!({ "url": url }))?;
        if let Some(err) = r["errorText"].as_str() {
            return Err(DriverError::NavigationTimeout(format!("{url}: {err}")));
        }
        self.wait_for_load(url)
    }

    fn reload(&mut self) -> Result<(), DriverError> {
        self.loaded = false;
        self.call("Page.reload", json!({ "ignoreCache": true }))?;
        self.wait_for_load("reload")
    }

    fn current_dom(&mut self) -> Result<String, DriverError> {
        let v = self.eval_value("document.documentElement ? document.documentElement.outerHTML : ''")?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }

    fn listener_dump(&mut self) -> Result<Vec<(ElementPath, EventType)>, DriverError> {
        let mut out = Vec::new();
        for global in ["window", "document"] {
            for t in self.object_listeners(global)? {
                out.push((ElementPath::document(), t));
            }
        }
        let paths = self.eval_value(&script("return __all.map(__path);", &[]))?;
        for p in paths.as_array().into_iter().flatten().filter_map(Value::as_str) {
            let locate = format!(
                "document.evaluate({}, document, null, 9, null).singleNodeValue",
                serde_json::to_string(p).unwrap()
            );
            for t in self.object_listeners(&locate)? {
                out.push((ElementPath::from(p), t));
            }
        }
        self.call("Runtime.releaseObjectGroup", json!({ "objectGroup": "jsprune" }))?;
        Ok(out)
    }

    fn dispatch(&mut self, path: &ElementPath, event: &EventType) -> Result<DispatchStatus, DriverError> {
        let synthetic = |s: &mut Self, t: &str| -> Result<DispatchStatus, DriverError> {
            match s.eval(&script(SYNTHETIC_JS, &[("__p", path.as_str()), ("__t", t)]))? {
                None => Ok(DispatchStatus::TimedOut),
                Some(Value::Bool(true)) => Ok(DispatchStatus::Dispatched),
                Some(_) => Ok(DispatchStatus::NotFound),
            }
        };
        if *path == ElementPath::document() {
            return synthetic(self, event.as_str());
        }
        let pointer = matches!(
            event,
            EventType::Click
                | EventType::DblClick
                | EventType::MouseDown
                | EventType::MouseUp
                | EventType::MouseOver
                | EventType::MouseOut
                | EventType::Hover
        );
        if !pointer && !event.is_keyboard() {
            return synthetic(self, event.as_str());
        }
        let Some(at) = self.eval(&script(LOCATE_JS, &[("__p", path.as_str())]))? else {
            return Ok(DispatchStatus::TimedOut);
        };
        if at.is_null() {
            return Ok(DispatchStatus::NotFound);
        }
        let (x, y) = (at["x"].as_f64().unwrap_or(0.0), at["y"].as_f64().unwrap_or(0.0));
        let outcome = match event {
            EventType::Click => self
                .mouse("mouseMoved", x, y, 0)
                .and_then(|_| self.mouse("mousePressed", x, y, 1))
                .and_then(|_| self.mouse("mouseReleased", x, y, 1)),
            EventType::DblClick => (1..=2).try_for_each(|n| {
                self.mouse("mousePressed", x, y, n)?;
                self.mouse("mouseReleased", x, y, n)
            }),
            EventType::MouseDown => self.mouse("mousePressed", x, y, 1),
            EventType::MouseUp => self.mouse("mouseReleased", x, y, 1),
            EventType::MouseOver | EventType::Hover => self.mouse("mouseMoved", x, y, 0),
            EventType::MouseOut => {
                let (rx, ry) = (
                    at["right"].as_f64().unwrap_or(x) + 8.0,
                    at["bottom"].as_f64().unwrap_or(y) + 8.0,
                );
                self.mouse("mouseMoved", x, y, 0)
                    .and_then(|_| self.mouse("mouseMoved", rx, ry, 0))
            }
            _ => {
                synthetic(self, "focus")?;
                match event {
                    EventType::KeyUp => self.key("keyUp"),
                    _ => self.key("keyDown").and_then(|_| self.key("keyUp")),
                }
            }
        };
        match outcome {
            Ok(()) => Ok(DispatchStatus::Dispatched),
            Err(DriverError::Protocol(m)) if m.ends_with("no reply") => Ok(DispatchStatus::TimedOut),
            Err(e) => Err(e),
        }
    }

    fn drain_console(&mut self) -> Result<Vec<String>, DriverError> {
        while let Some(v) = self.read(Duration::from_millis(1))? {
            self.on_event(&v);
        }
        Ok(self.console.drain(..).collect())
    }

    fn current_url(&mut self) -> Result<String, DriverError> {
        Ok(self.eval_value("location.href")?.as_str().unwrap_or_default().to_string())
    }

    fn hit_test(&mut self, path: &ElementPath) -> Result<HitResult, DriverError> {
        if *path == ElementPath::document() {
            return Ok(HitResult::Hit {
                topmost: ElementPath::document(),
                on_target: true,
            });
        }
        let v = self.eval_value(&script(HIT_JS, &[("__p", path.as_str())]))?;
        match v["status"].as_str() {
            Some("hidden") => Ok(HitResult::Hidden),
            Some("hit") => Ok(HitResult::Hit {
                topmost: ElementPath::from(v["topmost"].as_str().unwrap_or("/")),
                on_target: v["on_target"].as_bool().unwrap_or(false),
            }),
            _ => Err(DriverError::UnresolvedPath(path.clone())),
        }
    }

    fn settle(&mut self, window: Duration) -> Result<(), DriverError> {
        let deadline = Instant::now() + window;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(());
            }
            if let Some(v) = self.read(left)? {
                self.on_event(&v);
            }
        }
    }
}
