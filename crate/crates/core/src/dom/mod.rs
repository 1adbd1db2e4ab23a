//! Element tree snapshots and the hybrid attribute/position XPath.

pub(crate) mod markup;
mod xpath;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use xpath::{build_xpath, enumerate_elements, resolve_xpath, XPathBuilder};

/// Index of an element in its [`Document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub tag: String,
    /// Document order, names unique.
    pub attrs: Vec<(String, String)>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

/// An element-only tree. Node 0 is the document itself (tag `#document`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    nodes: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("element {0:?} is not attached to the document")]
pub struct DetachedNodeError(pub NodeId);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported xpath {path:?}: {reason}")]
pub struct GrammarError {
    pub path: String,
    pub reason: String,
}

/// A path that identifies one element across reloads of the same page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementPath(pub String);

impl ElementPath {
    /// The path of the document node, used for listeners on `window` and `document`.
    pub fn document() -> Self {
        ElementPath("/".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for ElementPath {
    fn from(s: String) -> Self {
        ElementPath(s)
    }
}

impl From<&str> for ElementPath {
    fn from(s: &str) -> Self {
        ElementPath(s.to_string())
    }
}

impl Default for Document {
    fn default() -> Self {
        Self::new()
    }
}

impl Document {
    pub fn new() -> Self {
        Document {
            nodes: vec![Element {
                tag: "#document".to_string(),
                attrs: Vec::new(),
                children: Vec::new(),
                parent: None,
            }],
        }
    }

    pub fn parse(html: &str) -> Self {
        markup::parse(html)
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Number of nodes, the document node included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn element(&self, id: NodeId) -> &Element {
        &self.nodes[id.0]
    }

    pub fn tag(&self, id: NodeId) -> &str {
        &self.nodes[id.0].tag
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.nodes[id.0].attr(name)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    /// Sets or, with `None`, removes an attribute.
    pub fn set_attr(&mut self, id: NodeId, name: &str, value: Option<&str>) {
        let attrs = &mut self.nodes[id.0].attrs;
        let pos = attrs.iter().position(|(k, _)| k == name);
        match (pos, value) {
            (Some(i), Some(v)) => attrs[i].1 = v.to_string(),
            (None, Some(v)) => attrs.push((name.to_string(), v.to_string())),
            (Some(i), None) => {
                attrs.remove(i);
            }
            (None, None) => {}
        }
    }

    /// A new element with no parent.
    pub fn create_element(&mut self, tag: &str, attrs: Vec<(String, String)>) -> NodeId {
        let mut unique: Vec<(String, String)> = Vec::with_capacity(attrs.len());
        for (k, v) in attrs {
            if !unique.iter().any(|(u, _)| *u == k) {
                unique.push((k, v));
            }
        }
        self.nodes.push(Element {
            tag: tag.to_ascii_lowercase(),
            attrs: unique,
            children: Vec::new(),
            parent: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Appends `child` to `parent`. Panics if `child` already has a parent or
    /// is an ancestor of `parent`.
    pub fn append_child(&mut self, parent: NodeId, child: NodeId) {
        assert!(self.nodes[child.0].parent.is_none(), "child already attached");
        assert!(
            !self.is_ancestor_or_self(child, parent),
            "append would create a cycle"
        );
        self.nodes[child.0].parent = Some(parent);
        self.nodes[parent.0].children.push(child);
    }

    /// Whether `ancestor` is `node` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.parent(n);
        }
        false
    }

    pub fn is_attached(&self, id: NodeId) -> bool {
        self.is_ancestor_or_self(self.root(), id)
    }

    /// Attached elements in depth-first pre-order, the document node excluded.
    pub fn elements(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<NodeId> = self.children(self.root()).iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev().copied());
        }
        out
    }

    /// Markup for the attached tree. Text content is not retained.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for &c in self.children(self.root()) {
            self.write_node(c, &mut out);
        }
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        let el = self.element(id);
        out.push('<');
        out.push_str(&el.tag);
        for (k, v) in &el.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            for c in v.chars() {
                match c {
                    '&' => out.push_str("&amp;"),
                    '"' => out.push_str("&quot;"),
                    '<' => out.push_str("&lt;"),
                    '>' => out.push_str("&gt;"),
                    _ => out.push(c),
                }
            }
            out.push('"');
        }
        out.push('>');
        if markup::is_void(&el.tag) {
            return;
        }
        for &c in &el.children {
            self.write_node(c, out);
        }
        out.push_str("</");
        out.push_str(&el.tag);
        out.push('>');
    }

    /// `(tag, path)` for every element, one per line.
    pub fn debug_dump(&self) -> String {
        enumerate_elements(self)
            .into_iter()
            .map(|(n, p)| format!("{}\t{}\n", self.tag(n), p))
            .collect()
    }
}
