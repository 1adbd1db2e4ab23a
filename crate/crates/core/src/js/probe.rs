use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FunctionId, FunctionSpan};

/// What a console line turned out to be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsoleLine {
    Probe(FunctionId),
    /// Carries the probe token but not a valid id.
    Malformed,
    NotProbe,
}

pub fn classify_console_line(line: &str, token: &str) -> ConsoleLine {
    match line.strip_prefix(token) {
        None => ConsoleLine::NotProbe,
        Some(payload) => match payload.parse::<FunctionId>() {
            Ok(id) => ConsoleLine::Probe(id),
            Err(_) => ConsoleLine::Malformed,
        },
    }
}

/// The function id a probe line reports, if `line` is a well-formed probe.
pub fn parse_probe_log(line: &str, token: &str) -> Option<FunctionId> {
    match classify_console_line(line, token) {
        ConsoleLine::Probe(id) => Some(id),
        _ => None,
    }
}

/// Functions observed executing. Repeated log lines collapse to one entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsedSet {
    pub used: BTreeSet<FunctionId>,
    /// Lines that carried the probe token but no parseable id.
    #[serde(default)]
    pub malformed: usize,
}

impl UsedSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one console line; returns true when it added a new id.
    pub fn record_line(&mut self, line: &str, token: &str) -> bool {
        match classify_console_line(line, token) {
            ConsoleLine::Probe(id) => self.used.insert(id),
            ConsoleLine::Malformed => {
                self.malformed += 1;
                false
            }
            ConsoleLine::NotProbe => false,
        }
    }

    pub fn record_lines<I, S>(&mut self, lines: I, token: &str)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for line in lines {
            self.record_line(line.as_ref(), token);
        }
    }

    pub fn insert(&mut self, id: FunctionId) -> bool {
        self.used.insert(id)
    }

    pub fn contains(&self, id: &FunctionId) -> bool {
        self.used.contains(id)
    }

    pub fn len(&self) -> usize {
        self.used.len()
    }

    pub fn is_empty(&self) -> bool {
        self.used.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FunctionId> {
        self.used.iter()
    }

    /// Members not produced by the scanner for any of `spans`.
    pub fn unknown<'a>(&'a self, spans: &[FunctionSpan]) -> Vec<&'a FunctionId> {
        let known: BTreeSet<FunctionId> = spans.iter().map(FunctionSpan::id).collect();
        self.used.iter().filter(|id| !known.contains(*id)).collect()
    }

    /// The members belonging to `file`.
    pub fn for_file(&self, file: &str) -> UsedSet {
        UsedSet {
            used: self.used.iter().filter(|id| id.file == file).cloned().collect(),
            malformed: 0,
        }
    }
}

impl FromIterator<FunctionId> for UsedSet {
    fn from_iter<T: IntoIterator<Item = FunctionId>>(iter: T) -> Self {
        UsedSet {
            used: iter.into_iter().collect(),
            malformed: 0,
        }
    }
}
