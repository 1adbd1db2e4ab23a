use std::collections::HashMap;

use super::{DetachedNodeError, Document, ElementPath, GrammarError, NodeId};

/// Builds paths for many nodes of one document, counting ids once.
pub struct XPathBuilder<'a> {
    doc: &'a Document,
    id_counts: HashMap<&'a str, usize>,
}

fn quote(value: &str) -> Option<String> {
    if !value.contains('"') {
        Some(format!("\"{value}\""))
    } else if !value.contains('\'') {
        Some(format!("'{value}'"))
    } else {
        None
    }
}

fn nonempty<'v>(v: Option<&'v str>) -> Option<&'v str> {
    v.filter(|s| !s.is_empty())
}

impl<'a> XPathBuilder<'a> {
    pub fn new(doc: &'a Document) -> Self {
        let mut id_counts: HashMap<&str, usize> = HashMap::new();
        for n in doc.elements() {
            if let Some(id) = nonempty(doc.attr(n, "id")) {
                *id_counts.entry(id).or_default() += 1;
            }
        }
        XPathBuilder { doc, id_counts }
    }

    fn duplicate_id(&self, n: NodeId) -> bool {
        nonempty(self.doc.attr(n, "id")).is_some_and(|id| self.id_counts[id] > 1)
    }

    /// `//tag[@attr = "v"]` when `n` carries a usable id or class.
    fn anchor(&self, n: NodeId) -> Option<String> {
        let tag = self.doc.tag(n);
        for attr in ["id", "class"] {
            if let Some(q) = nonempty(self.doc.attr(n, attr)).and_then(quote) {
                return Some(format!("//{tag}[@{attr} = {q}]"));
            }
        }
        None
    }

    /// `tag[k]`, k counting same-tag siblings from 1.
    fn step(&self, n: NodeId) -> String {
        let tag = self.doc.tag(n);
        let parent = self.doc.parent(n).expect("attached element has a parent");
        let k = self
            .doc
            .children(parent)
            .iter()
            .take_while(|&&c| c != n)
            .filter(|&&c| self.doc.tag(c) == tag)
            .count()
            + 1;
        format!("{tag}[{k}]")
    }

    pub fn build(&self, node: NodeId) -> Result<ElementPath, DetachedNodeError> {
        if !self.doc.is_attached(node) {
            return Err(DetachedNodeError(node));
        }
        let root = self.doc.root();
        if node == root {
            return Ok(ElementPath::document());
        }
        let mut chain = Vec::new();
        let mut cur = node;
        while cur != root {
            chain.push(cur);
            cur = self.doc.parent(cur).unwrap();
        }
        if chain.iter().any(|&n| self.duplicate_id(n)) {
            let steps: Vec<String> = chain.iter().rev().map(|&n| self.step(n)).collect();
            return Ok(ElementPath(format!("/{}", steps.join("/"))));
        }
        let mut steps: Vec<String> = Vec::new();
        for &n in &chain {
            if let Some(head) = self.anchor(n) {
                steps.reverse();
                let mut path = head;
                for s in steps {
                    path.push('/');
                    path.push_str(&s);
                }
                return Ok(ElementPath(path));
            }
            steps.push(self.step(n));
        }
        steps.reverse();
        Ok(ElementPath(format!("/{}", steps.join("/"))))
    }
}

/// The identifying path of `node`.
pub fn build_xpath(doc: &Document, node: NodeId) -> Result<ElementPath, DetachedNodeError> {
    XPathBuilder::new(doc).build(node)
}

/// Every attached element with its path, in depth-first pre-order.
pub fn enumerate_elements(doc: &Document) -> Vec<(NodeId, ElementPath)> {
    let builder = XPathBuilder::new(doc);
    doc.elements()
        .into_iter()
        .map(|n| {
            let p = builder.build(n).expect("enumerated elements are attached");
            (n, p)
        })
        .collect()
}

enum Predicate {
    Position(usize),
    Attr(String, String),
}

struct Step {
    tag: String,
    pred: Predicate,
}

struct Cursor<'p> {
    path: &'p str,
    pos: usize,
}

impl<'p> Cursor<'p> {
    fn fail(&self, reason: &str) -> GrammarError {
        GrammarError {
            path: self.path.to_string(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn rest(&self) -> &'p str {
        &self.path[self.pos..]
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn spaces(&mut self) {
        while self.rest().starts_with(' ') {
            self.pos += 1;
        }
    }

    fn name(&mut self) -> Result<String, GrammarError> {
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':')))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.fail("expected a name"));
        }
        let name = self.rest()[..len].to_ascii_lowercase();
        self.pos += len;
        Ok(name)
    }

    fn step(&mut self) -> Result<Step, GrammarError> {
        let tag = self.name()?;
        if !self.eat("[") {
            return Err(self.fail("expected `[`"));
        }
        let pred = if self.eat("@") {
            let attr = self.name()?;
            self.spaces();
            if !self.eat("=") {
                return Err(self.fail("expected `=`"));
            }
            self.spaces();
            let q = match self.rest().chars().next() {
                Some(q @ ('"' | '\'')) => q,
                _ => return Err(self.fail("expected a quoted value")),
            };
            self.pos += 1;
            let Some(len) = self.rest().find(q) else {
                return Err(self.fail("unterminated value"));
            };
            let value = self.rest()[..len].to_string();
            self.pos += len + 1;
            Predicate::Attr(attr, value)
        } else {
            let len = self
                .rest()
                .find(|c: char| !c.is_ascii_digit())
                .unwrap_or(self.rest().len());
            let k: usize = self.rest()[..len]
                .parse()
                .map_err(|_| self.fail("expected a position"))?;
            if k == 0 {
                return Err(self.fail("positions start at 1"));
            }
            self.pos += len;
            Predicate::Position(k)
        };
        if !self.eat("]") {
            return Err(self.fail("expected `]`"));
        }
        Ok(Step { tag, pred })
    }
}

fn matches_attr(doc: &Document, n: NodeId, tag: &str, attr: &str, value: &str) -> bool {
    doc.tag(n) == tag && doc.attr(n, attr) == Some(value)
}

fn apply(doc: &Document, context: &[NodeId], step: &Step) -> Vec<NodeId> {
    let mut out = Vec::new();
    for &c in context {
        let same_tag = doc.children(c).iter().filter(|&&ch| doc.tag(ch) == step.tag);
        match &step.pred {
            Predicate::Position(k) => out.extend(same_tag.clone().nth(k - 1)),
            Predicate::Attr(a, v) => {
                out.extend(same_tag.filter(|&&ch| doc.attr(ch, a) == Some(v.as_str())))
            }
        }
    }
    out
}

/// Every element matched by a path in the grammar [`build_xpath`] emits,
/// in document order.
pub fn resolve_xpath(doc: &Document, path: &ElementPath) -> Result<Vec<NodeId>, GrammarError> {
    let mut cur = Cursor {
        path: path.as_str(),
        pos: 0,
    };
    if path.as_str() == "/" {
        return Ok(vec![doc.root()]);
    }
    let order = doc.elements();
    let mut nodes: Vec<NodeId> = if cur.eat("//") {
        let head = cur.step()?;
        let Predicate::Attr(a, v) = &head.pred else {
            return Err(cur.fail("a `//` head needs an attribute predicate"));
        };
        order
            .iter()
            .copied()
            .filter(|&n| matches_attr(doc, n, &head.tag, a, v))
            .collect()
    } else if cur.eat("/") {
        let first = cur.step()?;
        apply(doc, &[doc.root()], &first)
    } else {
        return Err(cur.fail("paths start with `/` or `//`"));
    };
    while !cur.rest().is_empty() {
        if cur.rest().starts_with("//") || !cur.eat("/") {
            return Err(cur.fail("expected a child step"));
        }
        let step = cur.step()?;
        nodes = apply(doc, &nodes, &step);
    }
    if nodes.len() > 1 {
        let rank: HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        nodes.sort_by_key(|n| rank[n]);
        nodes.dedup();
    }
    Ok(nodes)
}
