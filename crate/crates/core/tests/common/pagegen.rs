//! Random simulated pages whose interactions form chains: every hidden
//! region has one controlling listener, placed outside the region, so the
//! state reached by replaying a chain is all any later event depends on.

use jsprune_core::driver::{Effect, ListenerSpec, SimElement, SimPageScript};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FILE: &str = "gen.js";
pub const URL: &str = "http://gen.test/";

const TYPES: &[&str] = &["click", "dblclick", "mouseover", "mousedown", "keydown", "hover", "touchstart"];
const TAGS: &[&str] = &["button", "a", "span", "li", "div"];

pub struct PageGen {
    rng: ChaCha8Rng,
    elements: Vec<SimElement>,
    listeners: Vec<ListenerSpec>,
    /// One entry per line of the script file: referenced by some handler or not.
    lines: Vec<bool>,
    handlers: Vec<String>,
}

/// A generated page and the script file its handlers live in.
pub struct GenPage {
    pub script: SimPageScript,
    pub source: String,
}

impl PageGen {
    pub fn generate(seed: u64) -> GenPage {
        let mut g = PageGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            elements: Vec::new(),
            listeners: Vec::new(),
            lines: Vec::new(),
            handlers: Vec::new(),
        };
        let on_load: Vec<String> = (0..g.rng.random_range(0..3)).map(|_| g.handler()).collect();
        let depth = g.rng.random_range(1..4);
        g.group(None, depth);
        if g.rng.random_bool(0.3) {
            let h = g.handler();
            g.listeners.push(ListenerSpec {
                element: "document".into(),
                event: "keyup".into(),
                handlers: vec![h],
                effects: vec![],
            });
        }
        // A region nothing ever reveals.
        if g.rng.random_bool(0.5) {
            let vault = g.element(None, true);
            let inner = g.element(Some(vault), false);
            let h = g.handler();
            g.listeners.push(ListenerSpec {
                element: inner,
                event: "click".into(),
                handlers: vec![h],
                effects: vec![],
            });
        }
        for _ in 0..g.rng.random_range(0..4) {
            g.lines.push(false);
        }
        let source = g
            .lines
            .iter()
            .enumerate()
            .map(|(i, used)| {
                let n = i + 1;
                if *used {
                    format!("function h{n}(e) {{ return e + {n}; }}\n")
                } else {
                    format!("function dead{n}() {{ return {n}; }}\n")
                }
            })
            .collect();
        GenPage {
            script: SimPageScript {
                url: URL.into(),
                on_load,
                load_logs: vec!["generated page".into()],
                elements: g.elements,
                listeners: g.listeners,
            },
            source,
        }
    }

    fn handler(&mut self) -> String {
        if !self.handlers.is_empty() && self.rng.random_bool(0.1) {
            let i = self.rng.random_range(0..self.handlers.len());
            return self.handlers[i].clone();
        }
        if self.rng.random_bool(0.4) {
            self.lines.push(false);
        }
        self.lines.push(true);
        let n = self.lines.len();
        let h = format!("{FILE}|{n}|{n}");
        self.handlers.push(h.clone());
        h
    }

    fn element(&mut self, parent: Option<String>, hidden: bool) -> String {
        let key = format!("e{}", self.elements.len());
        let tag = TAGS[self.rng.random_range(0..TAGS.len())].to_string();
        let (id, class) = match self.rng.random_range(0..3) {
            0 => (Some(format!("id-{key}")), None),
            1 => (None, Some(format!("cls-{key}"))),
            _ => (None, None),
        };
        self.elements.push(SimElement {
            key: key.clone(),
            tag,
            id,
            class,
            parent,
            hidden,
        });
        key
    }

    fn group(&mut self, container: Option<String>, depth: u32) {
        for _ in 0..self.rng.random_range(1..4) {
            let c = self.element(container.clone(), false);
            let event = TYPES[self.rng.random_range(0..TYPES.len())];
            let handlers = (0..self.rng.random_range(1..3)).map(|_| self.handler()).collect();
            let mut effects = Vec::new();
            let pick = if depth == 0 { 0 } else { self.rng.random_range(0..7) };
            match pick {
                1 | 2 => {
                    let panel = self.element(container.clone(), true);
                    effects.push(Effect::Reveal(vec![panel.clone()]));
                    self.group(Some(panel), depth - 1);
                }
                3 => {
                    let panel = self.element(container.clone(), true);
                    effects.push(Effect::Toggle {
                        key: format!("flag-{c}"),
                        elements: vec![panel.clone()],
                    });
                    self.group(Some(panel), depth - 1);
                }
                4 => {
                    let modal = self.element(None, true);
                    let close = self.element(Some(modal.clone()), false);
                    let h = self.handler();
                    self.listeners.push(ListenerSpec {
                        element: close,
                        event: "click".into(),
                        handlers: vec![h],
                        effects: vec![Effect::CloseModal],
                    });
                    effects.push(Effect::OpenModal {
                        modal: modal.clone(),
                        covers: vec![],
                    });
                    self.group(Some(modal), depth - 1);
                }
                5 => effects.push(Effect::NavigateAway("http://away.test/".into())),
                6 => {
                    let h = self.handler();
                    let mut inner = Vec::new();
                    if self.rng.random_bool(0.5) {
                        let panel = self.element(container.clone(), true);
                        inner.push(Effect::Reveal(vec![panel.clone()]));
                        self.group(Some(panel), depth - 1);
                    }
                    effects.push(Effect::AddListener(Box::new(ListenerSpec {
                        element: c.clone(),
                        event: "mouseup".into(),
                        handlers: vec![h],
                        effects: inner,
                    })));
                }
                _ => {}
            }
            self.listeners.push(ListenerSpec {
                element: c,
                event: event.into(),
                handlers,
                effects,
            });
        }
    }
}
