//! Interactivity events and the dependency tree the bot discovers.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::ElementPath;

/// The kind of user interaction an event listener responds to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventType {
    MouseDown,
    MouseUp,
    MouseOver,
    MouseOut,
    KeyDown,
    KeyPress,
    KeyUp,
    DblClick,
    Drag,
    DragStart,
    DragEnd,
    Click,
    Focus,
    Hover,
    Other(String),
}

/// Types the browser fires on its own; the bot never dispatches them.
const NON_INTERACTIVE: &[&str] = &[
    "load",
    "DOMContentLoaded",
    "unload",
    "beforeunload",
    "readystatechange",
    "pageshow",
    "pagehide",
    "visibilitychange",
    "error",
    "abort",
    "message",
    "messageerror",
    "storage",
    "online",
    "offline",
    "hashchange",
    "popstate",
    "resize",
    "beforeprint",
    "afterprint",
    "animationstart",
    "animationend",
    "animationiteration",
    "transitionend",
    "devicemotion",
    "deviceorientation",
];

impl EventType {
    pub fn as_str(&self) -> &str {
        match self {
            EventType::MouseDown => "mousedown",
            EventType::MouseUp => "mouseup",
            EventType::MouseOver => "mouseover",
            EventType::MouseOut => "mouseout",
            EventType::KeyDown => "keydown",
            EventType::KeyPress => "keypress",
            EventType::KeyUp => "keyup",
            EventType::DblClick => "dblclick",
            EventType::Drag => "drag",
            EventType::DragStart => "dragstart",
            EventType::DragEnd => "dragend",
            EventType::Click => "click",
            EventType::Focus => "focus",
            EventType::Hover => "hover",
            EventType::Other(s) => s,
        }
    }

    pub fn is_triggerable(&self) -> bool {
        !NON_INTERACTIVE.contains(&self.as_str())
    }

    /// Click-type events are fired three times per trigger.
    pub fn is_click_type(&self) -> bool {
        matches!(self, EventType::Click | EventType::DblClick)
    }

    pub fn is_keyboard(&self) -> bool {
        matches!(self, EventType::KeyDown | EventType::KeyPress | EventType::KeyUp)
    }
}

impl FromStr for EventType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "mousedown" => EventType::MouseDown,
            "mouseup" => EventType::MouseUp,
            "mouseover" => EventType::MouseOver,
            "mouseout" => EventType::MouseOut,
            "keydown" => EventType::KeyDown,
            "keypress" => EventType::KeyPress,
            "keyup" => EventType::KeyUp,
            "dblclick" => EventType::DblClick,
            "drag" => EventType::Drag,
            "dragstart" => EventType::DragStart,
            "dragend" => EventType::DragEnd,
            "click" => EventType::Click,
            "focus" => EventType::Focus,
            "hover" => EventType::Hover,
            other => EventType::Other(other.to_string()),
        })
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for EventType {
    fn from(s: &str) -> Self {
        s.parse().unwrap()
    }
}

impl Serialize for EventType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(EventType::from(s.as_str()))
    }
}

/// A listener to exercise: an event type on the element at `xpath`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub xpath: ElementPath,
}

impl Event {
    pub fn new(event_type: impl Into<EventType>, xpath: impl Into<ElementPath>) -> Self {
        Event {
            event_type: event_type.into(),
            xpath: xpath.into(),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {}", self.event_type, self.xpath)
    }
}

/// One event per distinct `(path, type)` pair, in first-seen order.
pub fn events_from_listeners(listeners: &[(ElementPath, EventType)]) -> Vec<Event> {
    let mut seen = HashSet::new();
    listeners
        .iter()
        .filter(|pair| seen.insert((*pair).clone()))
        .map(|(p, t)| Event::new(t.clone(), p.clone()))
        .collect()
}

/// Handle to a node of a [`DependencyTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRef(pub usize);

#[derive(Debug, Clone)]
struct TreeNode {
    event: Option<Event>,
    parent: Option<EventRef>,
    successors: Vec<EventRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event {0} is not in the dependency tree")]
pub struct DetachedEventError(pub Event);

#[derive(Debug, Error)]
pub enum TreeFormatError {
    #[error("malformed tree record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported tree schema {0}")]
    Schema(u32),
    #[error("event {0} appears more than once")]
    Duplicate(Event),
}

/// Which events enable which: an edge `a → b` means `b` first became
/// triggerable after `a` fired. The root is the page as loaded.
#[derive(Debug, Clone)]
pub struct DependencyTree {
    nodes: Vec<TreeNode>,
    orphans: Vec<Event>,
}

impl Default for DependencyTree {
    fn default() -> Self {
        Self::new()
    }
}

impl DependencyTree {
    pub fn new() -> Self {
        DependencyTree {
            nodes: vec![TreeNode {
                event: None,
                parent: None,
                successors: Vec::new(),
            }],
            orphans: Vec::new(),
        }
    }

    /// The base event: the loaded page, before any interaction.
    pub fn base(&self) -> EventRef {
        EventRef(0)
    }

    /// Events in the tree, the base excluded.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Adds `event` as the last successor of `parent`.
    ///
    /// Panics if the event is already in the tree or listed as an orphan.
    pub fn attach(&mut self, parent: EventRef, event: Event) -> EventRef {
        assert!(self.find(&event).is_none(), "{event} is already in the tree");
        assert!(!self.orphans.contains(&event), "{event} is an orphan");
        let r = EventRef(self.nodes.len());
        self.nodes.push(TreeNode {
            event: Some(event),
            parent: Some(parent),
            successors: Vec::new(),
        });
        self.nodes[parent.0].successors.push(r);
        r
    }

    /// Records an event that was never triggered.
    pub fn add_orphan(&mut self, event: Event) {
        assert!(self.find(&event).is_none(), "{event} is in the tree");
        if !self.orphans.contains(&event) {
            self.orphans.push(event);
        }
    }

    pub fn orphans(&self) -> &[Event] {
        &self.orphans
    }

    /// `None` for the base.
    pub fn event(&self, r: EventRef) -> Option<&Event> {
        self.nodes[r.0].event.as_ref()
    }

    pub fn parent(&self, r: EventRef) -> Option<EventRef> {
        self.nodes[r.0].parent
    }

    pub fn successors(&self, r: EventRef) -> &[EventRef] {
        &self.nodes[r.0].successors
    }

    pub fn find(&self, event: &Event) -> Option<EventRef> {
        self.nodes
            .iter()
            .position(|n| n.event.as_ref() == Some(event))
            .map(EventRef)
    }

    /// Path from the base to the parent of `r`, both included.
    pub fn chain(&self, r: EventRef) -> Vec<EventRef> {
        let mut out = Vec::new();
        let mut cur = self.parent(r);
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent(p);
        }
        out.reverse();
        out
    }

    /// Base through the parent of `event`.
    pub fn ancestor_chain(&self, event: &Event) -> Result<Vec<EventRef>, DetachedEventError> {
        self.find(event)
            .map(|r| self.chain(r))
            .ok_or_else(|| DetachedEventError(event.clone()))
    }

    /// Edges in breadth-first order; `None` stands for the base.
    pub fn edges(&self) -> Vec<(Option<Event>, Event)> {
        let mut out = Vec::new();
        let mut queue = std::collections::VecDeque::from([self.base()]);
        while let Some(p) = queue.pop_front() {
            for &c in self.successors(p) {
                out.push((self.event(p).cloned(), self.event(c).cloned().unwrap()));
                queue.push_back(c);
            }
        }
        out
    }

    /// Number of ancestors of `r`, the base included.
    pub fn depth(&self, r: EventRef) -> usize {
        self.chain(r).len()
    }

    fn to_record(&self, r: EventRef) -> NodeRecord {
        NodeRecord {
            event: self.event(r).cloned(),
            children: self.successors(r).iter().map(|&c| self.to_record(c)).collect(),
        }
    }
}

impl PartialEq for DependencyTree {
    fn eq(&self, other: &Self) -> bool {
        self.to_record(self.base()) == other.to_record(other.base()) && self.orphans == other.orphans
    }
}

impl Eq for DependencyTree {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct NodeRecord {
    event: Option<Event>,
    #[serde(default)]
    children: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    schema: u32,
    root: NodeRecord,
    #[serde(default)]
    orphans: Vec<Event>,
}

const TREE_SCHEMA: u32 = 1;

/// Nested JSON: `{"schema": 1, "root": {"event": null, "children": [...]}, "orphans": [...]}`.
pub fn serialize_tree(tree: &DependencyTree) -> String {
    let record = TreeRecord {
        schema: TREE_SCHEMA,
        root: tree.to_record(tree.base()),
        orphans: tree.orphans.clone(),
    };
    serde_json::to_string_pretty(&record).expect("tree records always serialize")
}

pub fn parse_tree(text: &str) -> Result<DependencyTree, TreeFormatError> {
    let record: TreeRecord = serde_json::from_str(text)?;
    if record.schema != TREE_SCHEMA {
        return Err(TreeFormatError::Schema(record.schema));
    }
    let mut tree = DependencyTree::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<(EventRef, &NodeRecord)> = record
        .root
        .children
        .iter()
        .rev()
        .map(|c| (tree.base(), c))
        .collect();
    while let Some((parent, node)) = stack.pop() {
        let Some(event) = node.event.clone() else {
            continue;
        };
        if !seen.insert(event.clone()) {
            return Err(TreeFormatError::Duplicate(event));
        }
        let r = tree.attach(parent, event);
        stack.extend(node.children.iter().rev().map(|c| (r, c)));
    }
    for o in record.orphans {
        if !seen.insert(o.clone()) {
            return Err(TreeFormatError::Duplicate(o));
        }
        tree.orphans.push(o);
    }
    Ok(tree)
}
