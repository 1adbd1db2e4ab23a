//! Simulated fixture pages under `tests/fixtures/pages/<name>/`: a
//! `page.json` script and the `app.js` its handlers name.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use jsprune_core::dom::ElementPath;
use jsprune_core::driver::{sim_load, PageSession, SimPage, SimPageScript};
use jsprune_core::events::{events_from_listeners, Event};
use jsprune_core::js::{scan_functions, FunctionId, FunctionSpan, DEFAULT_PROBE_TOKEN};

use super::oracle::{Ev, Model, DOC};

pub struct Fixture {
    pub name: String,
    pub script: SimPageScript,
    pub source: String,
    pub spans: Vec<FunctionSpan>,
}

pub fn pages_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pages")
}

pub fn load(name: &str) -> Fixture {
    let dir = pages_dir().join(name);
    let source = std::fs::read_to_string(dir.join("app.js")).unwrap();
    let spans = scan_functions(&source, "app.js").unwrap();
    let raw = SimPageScript::from_json(&std::fs::read_to_string(dir.join("page.json")).unwrap()).unwrap();
    let script = raw
        .resolve_handlers(&spans)
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    Fixture {
        name: name.to_string(),
        script,
        source,
        spans,
    }
}

pub fn all() -> Vec<Fixture> {
    let mut names: Vec<String> = std::fs::read_dir(pages_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names.iter().map(|n| load(n)).collect()
}

impl Fixture {
    pub fn open(&self) -> SimPage {
        sim_load(self.script.clone(), DEFAULT_PROBE_TOKEN).unwrap()
    }
}

/// A loaded session and the events its listeners describe.
pub fn open_with_events(script: &SimPageScript) -> (SimPage, Vec<Event>) {
    let mut page = sim_load(script.clone(), DEFAULT_PROBE_TOKEN).unwrap();
    let events = events_from_listeners(&page.listener_dump().unwrap());
    (page, events)
}

pub fn to_event(page: &SimPage, ev: &Ev) -> Event {
    let path = if ev.0 == DOC {
        ElementPath::document()
    } else {
        page.path_of(&ev.0).unwrap().clone()
    };
    Event::new(ev.1.as_str(), path)
}

/// The oracle's forest, in path terms.
pub fn oracle_edges(page: &SimPage, model: &Model) -> BTreeSet<(Option<String>, String)> {
    model
        .forest()
        .iter()
        .map(|(p, c)| {
            (
                p.as_ref().map(|p| to_event(page, p).to_string()),
                to_event(page, c).to_string(),
            )
        })
        .collect()
}

pub fn oracle_used(model: &Model) -> BTreeSet<FunctionId> {
    model.exhaustive_used().iter().map(|h| h.parse().unwrap()).collect()
}
