use thiserror::Error;

use super::ast::Span;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("illegal character {ch:?}")]
    IllegalCharacter { ch: char, span: Span },

    #[error("expected {}, found {found}", expected.join(" or "))]
    Syntax {
        span: Span,
        expected: Vec<String>,
        found: String,
    },

    #[error("undefined name `{name}`")]
    UndefinedName { name: String, span: Span },

    #[error("`{name}` is already defined")]
    DuplicateName { name: String, span: Span },

    #[error("heuristic leaf must be a label literal -1, 0 or 1")]
    InvalidLabelLeaf { span: Span },

    #[error("expected a {expected} expression, found a {found} expression")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
        span: Span,
    },

    #[error(
        "primitive `{primitive}` mixes raw input `{input}` with other primitives; \
         bind `{input}` to its own primitive first"
    )]
    MixedComposition {
        primitive: String,
        input: String,
        span: Span,
    },

    #[error("division by zero while computing `{within}`")]
    DivisionByZero { within: String, span: Span },

    #[error("missing value for `{name}`")]
    MissingInput { name: String },
}

impl DslError {
    pub fn span(&self) -> Option<Span> {
        match self {
            DslError::IllegalCharacter { span, .. }
            | DslError::Syntax { span, .. }
            | DslError::UndefinedName { span, .. }
            | DslError::DuplicateName { span, .. }
            | DslError::InvalidLabelLeaf { span }
            | DslError::TypeMismatch { span, .. }
            | DslError::MixedComposition { span, .. }
            | DslError::DivisionByZero { span, .. } => Some(*span),
            DslError::MissingInput { .. } => None,
        }
    }

    /// `name:line:col: message` followed by the offending source line and a caret marker.
    pub fn render(&self, source_name: &str, source: &str) -> String {
        let Some(span) = self.span() else {
            return format!("{source_name}: error: {self}");
        };
        let start = span.start.min(source.len());
        let line_start = source[..start].rfind('\n').map_or(0, |i| i + 1);
        let line_end = source[start..]
            .find('\n')
            .map_or(source.len(), |i| start + i);
        let line_no = source[..start].matches('\n').count() + 1;
        let col = source[line_start..start].chars().count() + 1;
        let width = source[start..span.end.min(line_end).max(start)]
            .chars()
            .count()
            .max(1);
        format!(
            "{source_name}:{line_no}:{col}: error: {self}\n  {}\n  {}{}",
            &source[line_start..line_end],
            " ".repeat(col - 1),
            "^".repeat(width)
        )
    }
}
