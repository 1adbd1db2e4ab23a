//! Function spans according to a full ECMAScript parser.

use oxc_allocator::Allocator;
use oxc_ast::ast::{ArrowFunctionExpression, Function, MethodDefinition, ObjectProperty, PropertyKind};
use oxc_ast_visit::{walk, Visit};
use oxc_parser::Parser;
use oxc_span::{SourceType, Span};
use oxc_syntax::scope::ScopeFlags;

#[derive(Default)]
struct Collector {
    spans: Vec<(usize, usize)>,
    /// Function values already recorded through their method or property.
    claimed: Vec<Span>,
}

impl<'a> Visit<'a> for Collector {
    fn visit_function(&mut self, it: &Function<'a>, flags: ScopeFlags) {
        if !self.claimed.contains(&it.span) && it.body.is_some() {
            self.spans.push((it.span.start as usize, it.span.end as usize));
        }
        walk::walk_function(self, it, flags);
    }

    fn visit_arrow_function_expression(&mut self, it: &ArrowFunctionExpression<'a>) {
        self.spans.push((it.span.start as usize, it.span.end as usize));
        walk::walk_arrow_function_expression(self, it);
    }

    fn visit_method_definition(&mut self, it: &MethodDefinition<'a>) {
        if it.value.body.is_some() {
            self.spans.push((it.span.start as usize, it.value.span.end as usize));
            self.claimed.push(it.value.span);
        }
        walk::walk_method_definition(self, it);
    }

    fn visit_object_property(&mut self, it: &ObjectProperty<'a>) {
        let accessor = matches!(it.kind, PropertyKind::Get | PropertyKind::Set);
        if it.method || accessor {
            if let oxc_ast::ast::Expression::FunctionExpression(f) = &it.value {
                self.spans.push((it.span.start as usize, f.span.end as usize));
                self.claimed.push(f.span);
            }
        }
        walk::walk_object_property(self, it);
    }
}

fn parse_with<T>(source: &str, f: impl FnOnce(&oxc_ast::ast::Program) -> T) -> Result<T, String> {
    let allocator = Allocator::default();
    for source_type in [SourceType::script(), SourceType::mjs()] {
        let ret = Parser::new(&allocator, source, source_type).parse();
        if ret.diagnostics.is_empty() {
            return Ok(f(&ret.program));
        }
    }
    let ret = Parser::new(&allocator, source, SourceType::mjs()).parse();
    Err(ret
        .diagnostics
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; "))
}

/// Sorted `(start, end)` byte spans of every function with a body.
pub fn function_spans(source: &str) -> Result<Vec<(usize, usize)>, String> {
    parse_with(source, |program| {
        let mut c = Collector::default();
        c.visit_program(program);
        let mut spans = c.spans;
        spans.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        spans
    })
}

/// Whether the source parses without diagnostics as a script or a module.
pub fn parses(source: &str) -> Result<(), String> {
    parse_with(source, |_| ())
}
