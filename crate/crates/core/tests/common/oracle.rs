//! A second, key-based model of simulated pages and two searches over it:
//! an exhaustive walk of every reachable state, and the breadth-first
//! dependency forest the bot is expected to find.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use jsprune_core::driver::{Effect, ListenerSpec, SimPageScript};
use serde::Serialize;

pub const DOC: &str = "document";

/// `(element key, event type)`.
pub type Ev = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct State {
    hidden: Vec<bool>,
    modals: Vec<(String, Vec<String>)>,
    flags: BTreeMap<String, bool>,
    /// Indices into the model's table of dynamically added listeners.
    added: Vec<usize>,
    away: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Out {
    Triggered,
    Blocked,
    Navigated,
    Timeout,
}

pub struct Model {
    script: SimPageScript,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    /// Document order of each element key.
    rank: HashMap<String, usize>,
    /// Every listener some effect can add.
    addable: Vec<ListenerSpec>,
}

fn bubbles(t: &str) -> bool {
    !matches!(t, "focus" | "blur" | "hover" | "mouseenter" | "mouseleave")
}

fn triggerable(t: &str) -> bool {
    !matches!(
        t,
        "load" | "DOMContentLoaded" | "unload" | "beforeunload" | "readystatechange" | "resize"
    )
}

impl Model {
    pub fn new(script: &SimPageScript) -> Self {
        let index: HashMap<String, usize> = script
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.key.clone(), i))
            .collect();
        let parent = script
            .elements
            .iter()
            .map(|e| e.parent.as_ref().map(|p| index[p]))
            .collect();
        // Pre-order over the declared tree; top-level elements sit in body.
        let mut rank = HashMap::new();
        fn visit(key: Option<&str>, script: &SimPageScript, rank: &mut HashMap<String, usize>) {
            for e in script.elements.iter().filter(|e| e.parent.as_deref() == key) {
                let n = rank.len();
                rank.insert(e.key.clone(), n);
                visit(Some(&e.key), script, rank);
            }
        }
        visit(None, script, &mut rank);
        fn collect(l: &ListenerSpec, out: &mut Vec<ListenerSpec>) {
            for e in &l.effects {
                if let Effect::AddListener(inner) = e {
                    if !out.contains(inner) {
                        out.push((**inner).clone());
                    }
                    collect(inner, out);
                }
            }
        }
        let mut addable = Vec::new();
        for l in &script.listeners {
            collect(l, &mut addable);
        }
        Model {
            script: script.clone(),
            index,
            parent,
            rank,
            addable,
        }
    }

    pub fn initial(&self) -> State {
        State {
            hidden: self.script.elements.iter().map(|e| e.hidden).collect(),
            modals: Vec::new(),
            flags: BTreeMap::new(),
            added: Vec::new(),
            away: false,
        }
    }

    pub fn load_handlers(&self) -> Vec<String> {
        self.script.on_load.clone()
    }

    fn listeners<'a>(&'a self, s: &State) -> Vec<&'a ListenerSpec> {
        if s.away {
            return Vec::new();
        }
        let mut out: Vec<&ListenerSpec> = self.script.listeners.iter().collect();
        out.extend(s.added.iter().map(|&i| &self.addable[i]));
        out
    }

    /// Distinct events with a listener in `s`.
    pub fn events(&self, s: &State) -> Vec<Ev> {
        let mut seen = HashSet::new();
        self.listeners(s)
            .into_iter()
            .map(|l| (l.element.clone(), l.event.as_str().to_string()))
            .filter(|e| seen.insert(e.clone()))
            .collect()
    }

    pub fn rank(&self, key: &str) -> usize {
        if key == DOC {
            0
        } else {
            self.rank[key] + 1
        }
    }

    fn inside(&self, ancestor: &str, key: &str) -> bool {
        let a = self.index[ancestor];
        let mut cur = Some(self.index[key]);
        while let Some(k) = cur {
            if k == a {
                return true;
            }
            cur = self.parent[k];
        }
        false
    }

    fn hidden(&self, s: &State, key: &str) -> bool {
        let mut cur = Some(self.index[key]);
        while let Some(k) = cur {
            if s.hidden[k] {
                return true;
            }
            cur = self.parent[k];
        }
        false
    }

    fn set_hidden(&self, s: &mut State, key: &str, hidden: bool) {
        s.hidden[self.index[key]] = hidden;
    }

    pub fn reachable(&self, s: &State, key: &str) -> bool {
        if s.away {
            return false;
        }
        if key == DOC {
            return true;
        }
        if self.hidden(s, key) {
            return false;
        }
        match s.modals.last() {
            Some((m, covers)) if !self.hidden(s, m) && !self.inside(m, key) => {
                !(covers.is_empty() || covers.iter().any(|c| self.inside(c, key)))
            }
            _ => true,
        }
    }

    /// One dispatch. Returns `Some` when it ended the dispatch early.
    fn dispatch(&self, s: &mut State, ev: &Ev, fired: &mut Vec<String>) -> Option<Out> {
        let mut chain = vec![ev.0.clone()];
        if bubbles(&ev.1) && ev.0 != DOC {
            let mut cur = self.parent[self.index[&ev.0]];
            while let Some(p) = cur {
                cur = self.parent[p];
                chain.push(self.script.elements[p].key.clone());
            }
            chain.push(DOC.to_string());
        }
        let all = self.listeners(s);
        let firing: Vec<&ListenerSpec> = chain
            .iter()
            .flat_map(|k| all.iter().filter(move |l| l.element == *k && l.event.as_str() == ev.1))
            .copied()
            .collect();
        for l in firing {
            fired.extend(l.handlers.iter().cloned());
            for e in &l.effects {
                match e {
                    Effect::Reveal(ks) => ks.iter().for_each(|k| self.set_hidden(s, k, false)),
                    Effect::Hide(ks) => ks.iter().for_each(|k| self.set_hidden(s, k, true)),
                    Effect::OpenModal { modal, covers } => {
                        self.set_hidden(s, modal, false);
                        s.modals.push((modal.clone(), covers.clone()));
                    }
                    Effect::CloseModal => {
                        if let Some((m, _)) = s.modals.pop() {
                            self.set_hidden(s, &m, true);
                        }
                    }
                    Effect::Toggle { key, elements } => {
                        let f = s.flags.entry(key.clone()).or_insert(false);
                        *f = !*f;
                        let on = *f;
                        for k in elements {
                            self.set_hidden(s, k, !on);
                        }
                    }
                    Effect::NavigateAway(_) => {
                        s.away = true;
                        return Some(Out::Navigated);
                    }
                    Effect::AddListener(spec) => {
                        // A repeated add changes nothing the search can observe.
                        let i = self.addable.iter().position(|a| a == &**spec).unwrap();
                        if !s.added.contains(&i) {
                            s.added.push(i);
                        }
                    }
                    Effect::Log(_) => {}
                    Effect::Stall => return Some(Out::Timeout),
                    Effect::Crash => panic!("the oracle does not model crashes"),
                }
            }
        }
        None
    }

    /// Mirrors the bot's trigger: listener present, element reachable,
    /// three dispatches for clicks. Navigation returns to the initial state.
    pub fn trigger(&self, s: &State, ev: &Ev, fired: &mut Vec<String>) -> (State, Out) {
        let present = self
            .listeners(s)
            .iter()
            .any(|l| l.element == ev.0 && l.event.as_str() == ev.1);
        if !present || !self.reachable(s, &ev.0) {
            return (s.clone(), Out::Blocked);
        }
        let times = if matches!(ev.1.as_str(), "click" | "dblclick") { 3 } else { 1 };
        let mut st = s.clone();
        for k in 0..times {
            if k > 0 && !self.reachable(&st, &ev.0) {
                break;
            }
            match self.dispatch(&mut st, ev, fired) {
                None => {}
                Some(Out::Navigated) => {
                    fired.extend(self.load_handlers());
                    return (self.initial(), Out::Navigated);
                }
                Some(o) => return (st, o),
            }
        }
        (st, Out::Triggered)
    }

    /// Every handler fired in any state reachable from load by any sequence
    /// of triggers.
    pub fn state_count(&self) -> usize {
        let start = self.initial();
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for ev in self.events(&s) {
                let (next, _) = self.trigger(&s, &ev, &mut Vec::new());
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen.len()
    }

    pub fn exhaustive_used(&self) -> BTreeSet<String> {
        let mut used: BTreeSet<String> = self.load_handlers().into_iter().collect();
        let start = self.initial();
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for ev in self.events(&s) {
                if !triggerable(&ev.1) {
                    continue;
                }
                let mut fired = Vec::new();
                let (next, _) = self.trigger(&s, &ev, &mut fired);
                used.extend(fired);
                if seen.insert(next.clone()) {
                    assert!(seen.len() < 200_000, "state space too large");
                    queue.push_back(next);
                }
            }
        }
        used
    }

    /// Every event that is triggerable in some reachable state.
    pub fn exhaustive_events(&self) -> BTreeSet<Ev> {
        let start = self.initial();
        let mut out = BTreeSet::new();
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for ev in self.events(&s) {
                if !triggerable(&ev.1) {
                    continue;
                }
                let (next, o) = self.trigger(&s, &ev, &mut Vec::new());
                if o != Out::Blocked {
                    out.insert(ev);
                }
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        out
    }

    /// The forest the breadth-first search should build: each event hangs
    /// under the first node, in breadth-first order, from whose state it
    /// fires. Returns `(parent, child)` edges with `None` for the base.
    pub fn forest(&self) -> BTreeSet<(Option<Ev>, Ev)> {
        struct Node {
            event: Option<Ev>,
            chain: Vec<Ev>,
        }
        let mut nodes = vec![Node {
            event: None,
            chain: Vec::new(),
        }];
        let mut known: HashSet<Ev> = HashSet::new();
        let mut pending: Vec<Ev> = Vec::new();
        let admit = |evs: Vec<Ev>, known: &mut HashSet<Ev>, pending: &mut Vec<Ev>| {
            let mut fresh: Vec<Ev> = evs.into_iter().filter(|e| known.insert(e.clone())).collect();
            fresh.sort_by(|a, b| self.rank(&a.0).cmp(&self.rank(&b.0)).then(a.1.cmp(&b.1)));
            pending.extend(fresh.into_iter().filter(|e| triggerable(&e.1)));
        };
        admit(self.events(&self.initial()), &mut known, &mut pending);

        // Replays a chain; `None` if a step does not fire.
        let enter = |chain: &[Ev], known: &mut HashSet<Ev>, pending: &mut Vec<Ev>| -> Option<State> {
            let mut s = self.initial();
            admit(self.events(&s), known, pending);
            for ev in chain {
                let (next, o) = self.trigger(&s, ev, &mut Vec::new());
                if o != Out::Triggered {
                    return None;
                }
                s = next;
                admit(self.events(&s), known, pending);
            }
            Some(s)
        };

        let mut edges = BTreeSet::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(p) = queue.pop_front() {
            let chain = nodes[p].chain.clone();
            let Some(mut state) = enter(&chain, &mut known, &mut pending) else {
                continue;
            };
            let mut i = 0;
            while i < pending.len() {
                let ev = pending[i].clone();
                let (_, o) = self.trigger(&state, &ev, &mut Vec::new());
                match o {
                    Out::Triggered | Out::Navigated => {
                        pending.remove(i);
                        edges.insert((nodes[p].event.clone(), ev.clone()));
                        let mut c = chain.clone();
                        c.push(ev.clone());
                        nodes.push(Node {
                            event: Some(ev),
                            chain: c,
                        });
                        queue.push_back(nodes.len() - 1);
                        match enter(&chain, &mut known, &mut pending) {
                            Some(s) => state = s,
                            None => break,
                        }
                    }
                    Out::Blocked => i += 1,
                    Out::Timeout => {
                        i += 1;
                        match enter(&chain, &mut known, &mut pending) {
                            Some(s) => state = s,
                            None => break,
                        }
                    }
                }
            }
        }
        edges
    }
}
