//! A deterministic page described by a script instead of rendered by a browser.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DispatchStatus, DriverError, HitResult, PageSession};
use crate::dom::{resolve_xpath, Document, ElementPath, NodeId, XPathBuilder};
use crate::events::EventType;
use crate::js::{probe_payload, FunctionId, FunctionSpan};

/// Element key that stands for `window` and `document`.
pub const DOCUMENT_KEY: &str = "document";

/// Declarative description of a page: its elements, its listeners and what
/// each listener does to the page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimPageScript {
    pub url: String,
    /// Handlers that run while the page loads.
    #[serde(default)]
    pub on_load: Vec<String>,
    /// Console lines the page prints on load that are not probes.
    #[serde(default)]
    pub load_logs: Vec<String>,
    #[serde(default)]
    pub elements: Vec<SimElement>,
    #[serde(default)]
    pub listeners: Vec<ListenerSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimElement {
    pub key: String,
    #[serde(default = "default_tag")]
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    /// Key of an earlier element; `body` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub hidden: bool,
}

fn default_tag() -> String {
    "div".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListenerSpec {
    /// An element key, or `document`.
    pub element: String,
    pub event: EventType,
    /// Function ids (`file|start|end`) or names (`file#name`) the handler calls.
    #[serde(default)]
    pub handlers: Vec<String>,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    Reveal(Vec<String>),
    Hide(Vec<String>),
    /// Shows `modal` on top of `covers`, or of everything when `covers` is empty.
    OpenModal {
        modal: String,
        #[serde(default)]
        covers: Vec<String>,
    },
    /// Hides the most recently opened modal.
    CloseModal,
    /// Flips a named flag, then shows `elements` if it is set and hides them if not.
    Toggle { key: String, elements: Vec<String> },
    NavigateAway(String),
    AddListener(Box<ListenerSpec>),
    Log(Vec<String>),
    /// The handler never returns.
    Stall,
    /// The page process dies.
    Crash,
}

#[derive(Debug, Error)]
pub enum ScriptValidationError {
    #[error("malformed page script: {0}")]
    Json(#[from] serde_json::Error),
    #[error("element key `{0}` is declared twice")]
    DuplicateKey(String),
    #[error("`{0}` is reserved")]
    ReservedKey(String),
    #[error("{context} refers to unknown element `{key}`")]
    UnknownElement { context: String, key: String },
    #[error("handler `{0}` is neither a function id nor a resolvable name")]
    BadHandler(String),
    #[error("probe token is invalid: {0}")]
    BadToken(String),
}

impl SimPageScript {
    pub fn from_json(text: &str) -> Result<Self, ScriptValidationError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rewrites `file#name` handlers into function ids using `spans`.
    pub fn resolve_handlers(&self, spans: &[FunctionSpan]) -> Result<SimPageScript, ScriptValidationError> {
        let resolve = |h: &str| -> Result<String, ScriptValidationError> {
            let Some((file, name)) = h.split_once('#') else {
                return Ok(h.to_string());
            };
            let mut hits = spans
                .iter()
                .filter(|s| s.file == file && s.name.as_deref() == Some(name));
            match (hits.next(), hits.next()) {
                (Some(s), None) => Ok(s.id().to_string()),
                _ => Err(ScriptValidationError::BadHandler(h.to_string())),
            }
        };
        fn walk(
            l: &ListenerSpec,
            resolve: &dyn Fn(&str) -> Result<String, ScriptValidationError>,
        ) -> Result<ListenerSpec, ScriptValidationError> {
            let mut out = l.clone();
            out.handlers = l.handlers.iter().map(|h| resolve(h)).collect::<Result<_, _>>()?;
            for e in &mut out.effects {
                if let Effect::AddListener(inner) = e {
                    **inner = walk(inner, resolve)?;
                }
            }
            Ok(out)
        }
        let mut out = self.clone();
        out.on_load = self.on_load.iter().map(|h| resolve(h)).collect::<Result<_, _>>()?;
        out.listeners = self
            .listeners
            .iter()
            .map(|l| walk(l, &resolve))
            .collect::<Result<_, _>>()?;
        Ok(out)
    }

    /// Every handler the script can ever call, nested listeners included.
    pub fn all_handlers(&self) -> Vec<String> {
        fn walk(l: &ListenerSpec, out: &mut Vec<String>) {
            out.extend(l.handlers.iter().cloned());
            for e in &l.effects {
                if let Effect::AddListener(inner) = e {
                    walk(inner, out);
                }
            }
        }
        let mut out = self.on_load.clone();
        for l in &self.listeners {
            walk(l, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Target {
    Document,
    Element(usize),
}

#[derive(Debug, Clone)]
struct Listener {
    target: Target,
    event: EventType,
    handlers: Vec<FunctionId>,
    effects: Vec<Effect>,
}

#[derive(Debug, Clone)]
struct State {
    hidden: Vec<bool>,
    modals: Vec<(usize, Vec<usize>)>,
    flags: BTreeMap<String, bool>,
    listeners: Vec<Listener>,
    url: String,
    /// The page left the scripted document.
    blank: bool,
}

/// A [`PageSession`] over a [`SimPageScript`].
#[derive(Debug, Clone)]
pub struct SimPage {
    script: SimPageScript,
    token: String,
    keys: HashMap<String, usize>,
    doc: Document,
    nodes: Vec<NodeId>,
    paths: Vec<ElementPath>,
    /// Position of each element in document order.
    order: Vec<usize>,
    initial: Vec<Listener>,
    state: State,
    console: Vec<String>,
    crashed: bool,
}

/// Validates `script` and opens a session on its initial state.
pub fn sim_load(script: SimPageScript, token: &str) -> Result<SimPage, ScriptValidationError> {
    crate::js::validate_probe_token(token).map_err(|e| ScriptValidationError::BadToken(e.to_string()))?;
    let mut keys = HashMap::new();
    for (i, el) in script.elements.iter().enumerate() {
        if el.key == DOCUMENT_KEY {
            return Err(ScriptValidationError::ReservedKey(el.key.clone()));
        }
        if let Some(p) = &el.parent {
            if !keys.contains_key(p) {
                return Err(ScriptValidationError::UnknownElement {
                    context: format!("element `{}`", el.key),
                    key: p.clone(),
                });
            }
        }
        if keys.insert(el.key.clone(), i).is_some() {
            return Err(ScriptValidationError::DuplicateKey(el.key.clone()));
        }
    }

    let mut doc = Document::new();
    let html = doc.create_element("html", vec![]);
    doc.append_child(doc.root(), html);
    let head = doc.create_element("head", vec![]);
    doc.append_child(html, head);
    let body = doc.create_element("body", vec![]);
    doc.append_child(html, body);
    let mut nodes = Vec::with_capacity(script.elements.len());
    for el in &script.elements {
        let mut attrs = Vec::new();
        if let Some(id) = &el.id {
            attrs.push(("id".to_string(), id.clone()));
        }
        if let Some(class) = &el.class {
            attrs.push(("class".to_string(), class.clone()));
        }
        let n = doc.create_element(&el.tag, attrs);
        let parent = el.parent.as_ref().map_or(body, |p| nodes[keys[p]]);
        doc.append_child(parent, n);
        nodes.push(n);
    }
    let builder = XPathBuilder::new(&doc);
    let paths = nodes
        .iter()
        .map(|&n| builder.build(n).expect("script elements are attached"))
        .collect();
    let dfs = doc.elements();
    let order = nodes
        .iter()
        .map(|n| dfs.iter().position(|d| d == n).unwrap())
        .collect();

    let ctx = Compiler { keys: &keys };
    for h in &script.on_load {
        ctx.handler(h)?;
    }
    let initial = script
        .listeners
        .iter()
        .map(|l| ctx.listener(l))
        .collect::<Result<Vec<_>, _>>()?;

    let state = State {
        hidden: script.elements.iter().map(|e| e.hidden).collect(),
        modals: Vec::new(),
        flags: BTreeMap::new(),
        listeners: initial.clone(),
        url: script.url.clone(),
        blank: false,
    };
    let mut page = SimPage {
        token: token.to_string(),
        keys,
        doc,
        nodes,
        paths,
        order,
        initial,
        state,
        console: Vec::new(),
        crashed: false,
        script,
    };
    page.reset(page.script.url.clone());
    Ok(page)
}

struct Compiler<'a> {
    keys: &'a HashMap<String, usize>,
}

impl Compiler<'_> {
    fn handler(&self, h: &str) -> Result<FunctionId, ScriptValidationError> {
        h.parse().map_err(|_| ScriptValidationError::BadHandler(h.to_string()))
    }

    fn key(&self, context: &str, key: &str) -> Result<(), ScriptValidationError> {
        if self.keys.contains_key(key) {
            Ok(())
        } else {
            Err(ScriptValidationError::UnknownElement {
                context: context.to_string(),
                key: key.to_string(),
            })
        }
    }

    fn listener(&self, l: &ListenerSpec) -> Result<Listener, ScriptValidationError> {
        let context = format!("{} listener on `{}`", l.event, l.element);
        let target = if l.element == DOCUMENT_KEY {
            Target::Document
        } else {
            self.key(&context, &l.element)?;
            Target::Element(self.keys[&l.element])
        };
        let handlers = l
            .handlers
            .iter()
            .map(|h| self.handler(h))
            .collect::<Result<_, _>>()?;
        for e in &l.effects {
            match e {
                Effect::Reveal(ks) | Effect::Hide(ks) | Effect::Toggle { elements: ks, .. } => {
                    for k in ks {
                        self.key(&context, k)?;
                    }
                }
                Effect::OpenModal { modal, covers } => {
                    self.key(&context, modal)?;
                    for k in covers {
                        self.key(&context, k)?;
                    }
                }
                Effect::AddListener(inner) => {
                    self.listener(inner)?;
                }
                Effect::CloseModal | Effect::NavigateAway(_) | Effect::Log(_) | Effect::Stall | Effect::Crash => {}
            }
        }
        Ok(Listener {
            target,
            event: l.event.clone(),
            handlers,
            effects: l.effects.clone(),
        })
    }
}

/// Events that do not propagate to ancestors.
fn bubbles(t: &EventType) -> bool {
    !matches!(t.as_str(), "focus" | "blur" | "hover" | "mouseenter" | "mouseleave")
}

impl SimPage {
    pub fn script(&self) -> &SimPageScript {
        &self.script
    }

    /// The path of every scripted element, by key.
    pub fn path_of(&self, key: &str) -> Option<&ElementPath> {
        if key == DOCUMENT_KEY {
            return None;
        }
        self.keys.get(key).map(|&i| &self.paths[i])
    }

    fn reset(&mut self, url: String) {
        let blank = url != self.script.url;
        self.state = State {
            hidden: self.script.elements.iter().map(|e| e.hidden).collect(),
            modals: Vec::new(),
            flags: BTreeMap::new(),
            listeners: if blank { Vec::new() } else { self.initial.clone() },
            url,
            blank,
        };
        if !blank {
            for h in &self.script.on_load {
                let id: FunctionId = h.parse().expect("validated at load");
                self.console.push(probe_payload(&id, &self.token));
            }
            self.console.extend(self.script.load_logs.iter().cloned());
        }
    }

    fn alive(&self) -> Result<(), DriverError> {
        if self.crashed {
            Err(DriverError::SessionLost("simulated page crashed".into()))
        } else {
            Ok(())
        }
    }

    fn resolve(&self, path: &ElementPath) -> Option<Target> {
        if self.state.blank {
            return None;
        }
        if *path == ElementPath::document() {
            return Some(Target::Document);
        }
        match resolve_xpath(&self.doc, path) {
            Ok(found) if found.len() == 1 => self.nodes.iter().position(|&n| n == found[0]).map(Target::Element),
            _ => None,
        }
    }

    fn parent_of(&self, i: usize) -> Option<usize> {
        self.script.elements[i].parent.as_ref().map(|p| self.keys[p])
    }

    fn effectively_hidden(&self, i: usize) -> bool {
        let mut cur = Some(i);
        while let Some(c) = cur {
            if self.state.hidden[c] {
                return true;
            }
            cur = self.parent_of(c);
        }
        false
    }

    fn within(&self, ancestor: usize, node: usize) -> bool {
        self.doc.is_ancestor_or_self(self.nodes[ancestor], self.nodes[node])
    }

    fn set_hidden(&mut self, keys: &[String], hidden: bool) {
        for k in keys {
            let i = self.keys[k];
            self.state.hidden[i] = hidden;
        }
    }

    /// Runs one listener; `Some` ends the dispatch early.
    fn run(&mut self, l: &Listener) -> Result<Option<DispatchStatus>, DriverError> {
        for h in &l.handlers {
            self.console.push(probe_payload(h, &self.token));
        }
        for effect in &l.effects {
            match effect {
                Effect::Reveal(ks) => self.set_hidden(ks, false),
                Effect::Hide(ks) => self.set_hidden(ks, true),
                Effect::OpenModal { modal, covers } => {
                    let m = self.keys[modal];
                    self.state.hidden[m] = false;
                    let covers = covers.iter().map(|k| self.keys[k]).collect();
                    self.state.modals.push((m, covers));
                }
                Effect::CloseModal => {
                    if let Some((m, _)) = self.state.modals.pop() {
                        self.state.hidden[m] = true;
                    }
                }
                Effect::Toggle { key, elements } => {
                    let flag = self.state.flags.entry(key.clone()).or_insert(false);
                    *flag = !*flag;
                    let on = *flag;
                    self.set_hidden(elements, !on);
                }
                Effect::NavigateAway(url) => {
                    self.reset(url.clone());
                    return Ok(Some(DispatchStatus::Dispatched));
                }
                Effect::AddListener(spec) => {
                    let compiled = Compiler { keys: &self.keys }
                        .listener(spec)
                        .expect("validated at load");
                    self.state.listeners.push(compiled);
                }
                Effect::Log(lines) => self.console.extend(lines.iter().cloned()),
                Effect::Stall => return Ok(Some(DispatchStatus::TimedOut)),
                Effect::Crash => {
                    self.crashed = true;
                    return Err(DriverError::SessionLost("simulated page crashed".into()));
                }
            }
        }
        Ok(None)
    }
}

impl PageSession for SimPage {
    fn load(&mut self, url: &str) -> Result<(), DriverError> {
        self.alive()?;
        self.reset(url.to_string());
        Ok(())
    }

    fn reload(&mut self) -> Result<(), DriverError> {
        self.alive()?;
        self.reset(self.state.url.clone());
        Ok(())
    }

    fn current_dom(&mut self) -> Result<String, DriverError> {
        self.alive()?;
        if self.state.blank {
            return Ok(String::new());
        }
        let mut doc = self.doc.clone();
        for (i, &n) in self.nodes.iter().enumerate() {
            doc.set_attr(n, "hidden", self.state.hidden[i].then_some(""));
        }
        Ok(doc.serialize())
    }

    fn listener_dump(&mut self) -> Result<Vec<(ElementPath, EventType)>, DriverError> {
        self.alive()?;
        let rank = |t: Target| match t {
            Target::Document => 0,
            Target::Element(i) => self.order[i] + 1,
        };
        let mut listed: Vec<&Listener> = self.state.listeners.iter().collect();
        listed.sort_by_key(|l| rank(l.target));
        Ok(listed
            .into_iter()
            .map(|l| {
                let path = match l.target {
                    Target::Document => ElementPath::document(),
                    Target::Element(i) => self.paths[i].clone(),
                };
                (path, l.event.clone())
            })
            .collect())
    }

    fn dispatch(&mut self, path: &ElementPath, event: &EventType) -> Result<DispatchStatus, DriverError> {
        self.alive()?;
        let Some(target) = self.resolve(path) else {
            return Ok(DispatchStatus::NotFound);
        };
        let mut chain = vec![target];
        if bubbles(event) {
            if let Target::Element(i) = target {
                let mut cur = self.parent_of(i);
                while let Some(p) = cur {
                    chain.push(Target::Element(p));
                    cur = self.parent_of(p);
                }
                chain.push(Target::Document);
            }
        }
        let firing: Vec<Listener> = chain
            .iter()
            .flat_map(|t| {
                self.state
                    .listeners
                    .iter()
                    .filter(move |l| l.target == *t && l.event == *event)
            })
            .cloned()
            .collect();
        for l in &firing {
            if let Some(status) = self.run(l)? {
                return Ok(status);
            }
        }
        Ok(DispatchStatus::Dispatched)
    }

    fn drain_console(&mut self) -> Result<Vec<String>, DriverError> {
        self.alive()?;
        Ok(std::mem::take(&mut self.console))
    }

    fn current_url(&mut self) -> Result<String, DriverError> {
        self.alive()?;
        Ok(self.state.url.clone())
    }

    fn hit_test(&mut self, path: &ElementPath) -> Result<HitResult, DriverError> {
        self.alive()?;
        let target = self
            .resolve(path)
            .ok_or_else(|| DriverError::UnresolvedPath(path.clone()))?;
        let Target::Element(i) = target else {
            return Ok(HitResult::Hit {
                topmost: ElementPath::document(),
                on_target: true,
            });
        };
        if self.effectively_hidden(i) {
            return Ok(HitResult::Hidden);
        }
        if let Some((m, covers)) = self.state.modals.last() {
            let covered = !self.within(*m, i)
                && !self.effectively_hidden(*m)
                && (covers.is_empty() || covers.iter().any(|&c| self.within(c, i)));
            if covered {
                return Ok(HitResult::Hit {
                    topmost: self.paths[*m].clone(),
                    on_target: false,
                });
            }
        }
        Ok(HitResult::Hit {
            topmost: self.paths[i].clone(),
            on_target: true,
        })
    }

    fn settle(&mut self, _window: Duration) -> Result<(), DriverError> {
        self.alive()
    }
}

/// Keys of every element referenced by `script`, for fixture sanity checks.
pub fn referenced_keys(script: &SimPageScript) -> HashSet<String> {
    fn walk(l: &ListenerSpec, out: &mut HashSet<String>) {
        out.insert(l.element.clone());
        for e in &l.effects {
            match e {
                Effect::Reveal(ks) | Effect::Hide(ks) | Effect::Toggle { elements: ks, .. } => {
                    out.extend(ks.iter().cloned())
                }
                Effect::OpenModal { modal, covers } => {
                    out.insert(modal.clone());
                    out.extend(covers.iter().cloned());
                }
                Effect::AddListener(inner) => walk(inner, out),
                _ => {}
            }
        }
    }
    let mut out = HashSet::new();
    for l in &script.listeners {
        walk(l, &mut out);
    }
    out
}
