//! Syntax tree for primitive specifiers and heuristic functions.
//!
//! Equality on every node is structural: spans are carried for diagnostics
//! but ignored by `==`, so a program and its pretty-printed re-parse compare
//! equal.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open byte range `[start, end)` into the program text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    /// Smallest span covering both.
    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Output of a heuristic function. `Abstain` is the language's `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Negative,
    Abstain,
    Positive,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Negative, Label::Abstain, Label::Positive];

    pub fn value(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Abstain => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn from_value(v: i64) -> Option<Label> {
        match v {
            -1 => Some(Label::Negative),
            0 => Some(Label::Abstain),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn negate(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Abstain => Label::Abstain,
            Label::Positive => Label::Negative,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.value()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        Label::from_value(i64::from(v)).ok_or_else(|| format!("label out of range: {v}"))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }

    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }

    /// The operator with its operands swapped: `a < b` is `b > a`.
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
}

impl BoolOp {
    pub fn keyword(self) -> &'static str {
        match self {
            BoolOp::And => "and",
            BoolOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Label(Label),
    Name(String),
    Neg(Box<Expr>),
    Arith {
        op: ArithOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Compare {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Bool {
        op: BoolOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    /// `if c1 { e1 } elif c2 { e2 } ... else { e }`
    Conditional {
        branches: Vec<(Expr, Expr)>,
        otherwise: Box<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Direct children in source order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Number(_) | ExprKind::Label(_) | ExprKind::Name(_) => Vec::new(),
            ExprKind::Neg(e) | ExprKind::Not(e) => vec![e],
            ExprKind::Arith { lhs, rhs, .. }
            | ExprKind::Compare { lhs, rhs, .. }
            | ExprKind::Bool { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Conditional {
                branches,
                otherwise,
            } => {
                let mut out = Vec::with_capacity(branches.len() * 2 + 1);
                for (c, e) in branches {
                    out.push(c);
                    out.push(e);
                }
                out.push(otherwise);
                out
            }
        }
    }

    /// Pre-order walk over the subtree.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        for c in self.children() {
            c.walk(visit);
        }
    }

    /// Every name mentioned anywhere in the subtree, in pre-order (with repeats).
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ExprKind::Name(n) = &e.kind {
                out.push(n.as_str());
            }
        });
        out
    }

    /// Leaves of the conditional structure: the expression itself unless it
    /// is a conditional, in which case the leaves of every branch result.
    pub fn conditional_leaves(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Conditional {
                branches,
                otherwise,
            } => {
                let mut out = Vec::new();
                for (_, e) in branches {
                    out.extend(e.conditional_leaves());
                }
                out.extend(otherwise.conditional_leaves());
                out
            }
            _ => vec![self],
        }
    }

    /// Literal numeric constant (`3`, `-0.5`, `--2`), if the subtree is one.
    pub fn as_constant(&self) -> Option<f64> {
        match &self.kind {
            ExprKind::Number(v) => Some(*v),
            ExprKind::Neg(e) => e.as_constant().map(|v| -v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub target: Ident,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrimitiveSpecifier {
    pub inputs: Vec<Ident>,
    pub assignments: Vec<Assignment>,
}

impl PrimitiveSpecifier {
    pub fn primitive_names(&self) -> impl Iterator<Item = &str> {
        self.assignments.iter().map(|a| a.target.name.as_str())
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|i| i.name.as_str())
    }

    pub fn assignment(&self, name: &str) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.target.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicDecl {
    pub name: Ident,
    pub params: Vec<Ident>,
    pub body: Expr,
}

impl HeuristicDecl {
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub specifier: PrimitiveSpecifier,
    pub heuristics: Vec<HeuristicDecl>,
    pub source_name: String,
}

impl SourceUnit {
    pub fn heuristic(&self, name: &str) -> Option<&HeuristicDecl> {
        self.heuristics.iter().find(|h| h.name.name == name)
    }
}
