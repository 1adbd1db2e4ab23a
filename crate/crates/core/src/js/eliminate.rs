use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::scanner::number_collisions;
use super::{EliminateError, FunctionId, FunctionSpan, LineIndex, UsedSet};

/// A function still present after elimination, with its position in the new text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivingSpan {
    /// Id in the original source.
    pub original: FunctionId,
    pub span: FunctionSpan,
    /// The body was replaced with `{}`.
    pub emptied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elimination {
    pub text: String,
    pub surviving: Vec<SurvivingSpan>,
    /// Every function not in the used set, nested ones included.
    pub eliminated: Vec<FunctionId>,
    pub removed_bytes: usize,
}

/// Replaces the body of every function missing from `used` with `{}`.
/// Bodies of two bytes or fewer are left as they are.
///
/// Headers stay in place so references to the function still resolve.
/// Functions nested in an emptied body disappear with it; it is an error
/// for one of those to be in `used`.
pub fn eliminate(
    original: &str,
    spans: &[FunctionSpan],
    used: &UsedSet,
) -> Result<Elimination, EliminateError> {
    let known: BTreeSet<FunctionId> = spans.iter().map(FunctionSpan::id).collect();
    if let Some(file) = spans.first().map(|s| s.file.as_str()) {
        if let Some(id) = used.iter().find(|id| id.file == file && !known.contains(*id)) {
            return Err(EliminateError::UnknownSpan(id.clone()));
        }
    }

    let mut order: Vec<&FunctionSpan> = spans.iter().collect();
    order.sort_by(|a, b| {
        a.offsets
            .body_start
            .cmp(&b.offsets.body_start)
            .then(b.offsets.body_end.cmp(&a.offsets.body_end))
    });

    // Outermost unused bodies, disjoint and in source order.
    let mut removed: Vec<(Range<usize>, FunctionId)> = Vec::new();
    for span in &order {
        let id = span.id();
        let body = span.body_range();
        if let Some((outer, outer_id)) = removed.last() {
            if body.start >= outer.start && body.end <= outer.end {
                if used.contains(&id) {
                    return Err(EliminateError::UsedInsideUnused {
                        used: id,
                        outer: outer_id.clone(),
                    });
                }
                continue;
            }
        }
        // A body of two bytes or fewer is no larger than `{}`.
        if !used.contains(&id) && body.len() > 2 {
            removed.push((body, id));
        }
    }

    let mut text = String::with_capacity(original.len());
    let mut cursor = 0;
    let mut removed_bytes = 0;
    for (range, _) in &removed {
        text.push_str(&original[cursor..range.start]);
        text.push_str("{}");
        removed_bytes += range.len() - 2;
        cursor = range.end;
    }
    text.push_str(&original[cursor..]);

    let shift = |offset: usize| -> usize {
        let before: usize = removed
            .iter()
            .take_while(|(r, _)| r.end <= offset)
            .map(|(r, _)| r.len() - 2)
            .sum();
        offset - before
    };
    let lines = LineIndex::new(&text);
    let mut surviving = Vec::new();
    let mut eliminated = Vec::new();
    for span in spans {
        let id = span.id();
        if !used.contains(&id) {
            eliminated.push(id.clone());
        }
        let inside = removed.iter().any(|(r, _)| {
            let b = span.body_range();
            b.start >= r.start && b.end <= r.end && b != *r
        });
        if inside {
            continue;
        }
        let emptied = removed.iter().any(|(r, _)| *r == span.body_range());
        let mut next = span.clone();
        let start = shift(span.offsets.start);
        let body_start = shift(span.offsets.body_start);
        next.offsets.start = start;
        next.offsets.body_start = body_start;
        if emptied {
            next.offsets.body_end = body_start + 2;
            next.offsets.probe_at = body_start + 1;
            next.offsets.expression_body = false;
        } else {
            next.offsets.body_end = shift(span.offsets.body_end);
            next.offsets.probe_at = shift(span.offsets.probe_at);
        }
        next.start_line = lines.line_of(next.offsets.start);
        next.end_line = lines.line_of(next.offsets.body_end - 1);
        surviving.push(SurvivingSpan {
            original: id,
            span: next,
            emptied,
        });
    }
    surviving.sort_by(|a, b| {
        a.span
            .offsets
            .start
            .cmp(&b.span.offsets.start)
            .then(b.span.offsets.body_end.cmp(&a.span.offsets.body_end))
    });
    let mut renumbered: Vec<FunctionSpan> = surviving.iter().map(|s| s.span.clone()).collect();
    number_collisions(&mut renumbered);
    for (s, r) in surviving.iter_mut().zip(renumbered) {
        s.span = r;
    }

    Ok(Elimination {
        text,
        surviving,
        eliminated,
        removed_bytes,
    })
}

/// Fraction of files whose eliminated bytes are identical between two runs.
pub fn diff_eliminated(
    a: &BTreeMap<String, Vec<u8>>,
    b: &BTreeMap<String, Vec<u8>>,
) -> Result<f64, EliminateError> {
    if a.is_empty() && b.is_empty() {
        return Err(EliminateError::Mismatch("both runs are empty".into()));
    }
    if let Some(k) = a.keys().find(|k| !b.contains_key(*k)) {
        return Err(EliminateError::Mismatch(format!("{k} only in the first run")));
    }
    if let Some(k) = b.keys().find(|k| !a.contains_key(*k)) {
        return Err(EliminateError::Mismatch(format!("{k} only in the second run")));
    }
    let same = a.iter().filter(|(k, v)| b[*k] == **v).count();
    Ok(same as f64 / a.len() as f64)
}
