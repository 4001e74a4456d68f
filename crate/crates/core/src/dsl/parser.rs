//! Recursive-descent parser plus the semantic checks that make a
//! [`SourceUnit`] valid: definition-before-use, unique names, label leaves
//! and expression typing.

use std::collections::HashSet;

use super::ast::*;
use super::error::DslError;
use super::lexer::{tokenize, Token, TokenKind};

/// Parse and validate a whole program.
pub fn parse(source: &str) -> Result<SourceUnit, DslError> {
    parse_named(source, "<input>")
}

pub fn parse_named(source: &str, source_name: &str) -> Result<SourceUnit, DslError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        eof: Span::new(source.len(), source.len()),
    };
    let (specifier, heuristics) = parser.program()?;
    let unit = SourceUnit {
        specifier,
        heuristics,
        source_name: source_name.to_string(),
    };
    validate(&unit)?;
    Ok(unit)
}

/// Parse a single expression (no semantic checks). Used by tests and tooling.
pub fn parse_expr(source: &str) -> Result<Expr, DslError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        eof: Span::new(source.len(), source.len()),
    };
    let e = parser.expr()?;
    parser.expect_eof()?;
    Ok(e)
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    eof: Span,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn at(&self, kind: TokenKind) -> bool {
        self.peek_kind() == Some(kind)
    }

    fn bump(&mut self) -> Token<'a> {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: TokenKind) -> Option<Token<'a>> {
        if self.at(kind) {
            Some(self.bump())
        } else {
            None
        }
    }

    fn error(&self, expected: &[&str]) -> DslError {
        let (span, found) = match self.peek() {
            Some(t) => (t.span, format!("`{}`", t.lexeme)),
            None => (self.eof, "end of input".to_string()),
        };
        DslError::Syntax {
            span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token<'a>, DslError> {
        self.eat(kind).ok_or_else(|| self.error(&[kind.describe()]))
    }

    fn expect_eof(&self) -> Result<(), DslError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.error(&["end of input"])),
        }
    }

    fn ident(&mut self) -> Result<Ident, DslError> {
        let t = self.expect(TokenKind::Ident)?;
        Ok(Ident {
            name: t.lexeme.to_string(),
            span: t.span,
        })
    }

    fn program(&mut self) -> Result<(PrimitiveSpecifier, Vec<HeuristicDecl>), DslError> {
        let specifier = self.specifier()?;
        let mut heuristics = Vec::new();
        while self.peek().is_some() {
            if !self.at(TokenKind::Hf) {
                return Err(self.error(&["`hf`", "end of input"]));
            }
            heuristics.push(self.heuristic()?);
        }
        Ok((specifier, heuristics))
    }

    fn specifier(&mut self) -> Result<PrimitiveSpecifier, DslError> {
        self.expect(TokenKind::Primitives)?;
        self.expect(TokenKind::LBrace)?;
        let mut spec = PrimitiveSpecifier::default();
        while self.eat(TokenKind::Input).is_some() {
            spec.inputs.push(self.ident()?);
            while self.eat(TokenKind::Comma).is_some() {
                spec.inputs.push(self.ident()?);
            }
            self.eat(TokenKind::Semicolon);
        }
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => {
                    self.bump();
                    break;
                }
                Some(TokenKind::Ident) => {
                    let target = self.ident()?;
                    self.expect(TokenKind::Assign)?;
                    let value = self.expr()?;
                    self.eat(TokenKind::Semicolon);
                    spec.assignments.push(Assignment { target, value });
                }
                Some(TokenKind::Input) => {
                    return Err(self.error(&["assignment", "`}`"]));
                }
                _ => return Err(self.error(&["`input`", "identifier", "`}`"])),
            }
        }
        Ok(spec)
    }

    fn heuristic(&mut self) -> Result<HeuristicDecl, DslError> {
        self.expect(TokenKind::Hf)?;
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.at(TokenKind::RParen) {
            params.push(self.ident()?);
            while self.eat(TokenKind::Comma).is_some() {
                params.push(self.ident()?);
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LBrace)?;
        let body = self.expr()?;
        self.expect(TokenKind::RBrace)?;
        let body = into_label_tree(body)?;
        Ok(HeuristicDecl { name, params, body })
    }

    pub(super) fn expr(&mut self) -> Result<Expr, DslError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.and_expr()?;
        while self.eat(TokenKind::Or).is_some() {
            let rhs = self.and_expr()?;
            lhs = bool_node(BoolOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.not_expr()?;
        while self.eat(TokenKind::And).is_some() {
            let rhs = self.not_expr()?;
            lhs = bool_node(BoolOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        if let Some(t) = self.eat(TokenKind::Not) {
            let inner = self.not_expr()?;
            let span = t.span.join(inner.span);
            return Ok(Expr::new(ExprKind::Not(Box::new(inner)), span));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DslError> {
        let lhs = self.add_expr()?;
        let op = match self.peek_kind() {
            Some(TokenKind::Lt) => CmpOp::Lt,
            Some(TokenKind::Le) => CmpOp::Le,
            Some(TokenKind::Gt) => CmpOp::Gt,
            Some(TokenKind::Ge) => CmpOp::Ge,
            Some(TokenKind::EqEq) => CmpOp::Eq,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        let span = lhs.span.join(rhs.span);
        Ok(Expr::new(
            ExprKind::Compare {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        ))
    }

    fn add_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => ArithOp::Add,
                Some(TokenKind::Minus) => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = arith_node(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => ArithOp::Mul,
                Some(TokenKind::Slash) => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = arith_node(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if let Some(t) = self.eat(TokenKind::Minus) {
            let inner = self.unary()?;
            let span = t.span.join(inner.span);
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek_kind() {
            Some(TokenKind::Number) => {
                let t = self.bump();
                let v: f64 = t.lexeme.parse().map_err(|_| DslError::Syntax {
                    span: t.span,
                    expected: vec!["number".into()],
                    found: format!("`{}`", t.lexeme),
                })?;
                Ok(Expr::new(ExprKind::Number(v), t.span))
            }
            Some(TokenKind::Ident) => {
                let t = self.bump();
                Ok(Expr::new(ExprKind::Name(t.lexeme.to_string()), t.span))
            }
            Some(TokenKind::LParen) => {
                // The inner span is kept so diagnostics point at the
                // expression itself, not its parentheses.
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            Some(TokenKind::If) => self.conditional(),
            _ => Err(self.error(&["number", "identifier", "`(`", "`-`", "`not`", "`if`"])),
        }
    }

    fn block(&mut self) -> Result<(Expr, Span), DslError> {
        self.expect(TokenKind::LBrace)?;
        let e = self.expr()?;
        let close = self.expect(TokenKind::RBrace)?;
        Ok((e, close.span))
    }

    fn conditional(&mut self) -> Result<Expr, DslError> {
        let start = self.expect(TokenKind::If)?.span;
        let mut branches = Vec::new();
        let cond = self.expr()?;
        let (then, _) = self.block()?;
        branches.push((cond, then));
        loop {
            if self.eat(TokenKind::Elif).is_some() {
                let cond = self.expr()?;
                let (then, _) = self.block()?;
                branches.push((cond, then));
            } else if self.eat(TokenKind::Else).is_some() {
                let (otherwise, end) = self.block()?;
                return Ok(Expr::new(
                    ExprKind::Conditional {
                        branches,
                        otherwise: Box::new(otherwise),
                    },
                    start.join(end),
                ));
            } else {
                return Err(self.error(&["`elif`", "`else`"]));
            }
        }
    }
}

fn arith_node(op: ArithOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.join(rhs.span);
    Expr::new(
        ExprKind::Arith {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
        span,
    )
}

fn bool_node(op: BoolOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.join(rhs.span);
    Expr::new(
        ExprKind::Bool {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
        span,
    )
}

/// Rewrites the leaves of a heuristic body's conditional structure into
/// label literals. Any leaf that is not `-1`, `0` or `1` is rejected.
fn into_label_tree(e: Expr) -> Result<Expr, DslError> {
    let span = e.span;
    match e.kind {
        ExprKind::Conditional {
            branches,
            otherwise,
        } => {
            let branches = branches
                .into_iter()
                .map(|(c, r)| Ok((c, into_label_tree(r)?)))
                .collect::<Result<Vec<_>, DslError>>()?;
            let otherwise = Box::new(into_label_tree(*otherwise)?);
            Ok(Expr::new(
                ExprKind::Conditional {
                    branches,
                    otherwise,
                },
                span,
            ))
        }
        ExprKind::Label(_) => Ok(Expr::new(e.kind, span)),
        kind => {
            let leaf = Expr::new(kind, span);
            let label = leaf
                .as_constant()
                .filter(|v| v.fract() == 0.0)
                .and_then(|v| Label::from_value(v as i64));
            match label {
                Some(l) => Ok(Expr::new(ExprKind::Label(l), span)),
                None => Err(DslError::InvalidLabelLeaf { span }),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Bool,
    Label,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Num => "numeric",
            Ty::Bool => "boolean",
            Ty::Label => "label",
        }
    }
}

/// Semantic validation of an already-parsed unit.
pub fn validate(unit: &SourceUnit) -> Result<(), DslError> {
    let spec = &unit.specifier;
    let mut inputs: HashSet<&str> = HashSet::new();
    let mut primitives: HashSet<&str> = HashSet::new();

    for input in &spec.inputs {
        if !inputs.insert(&input.name) {
            return Err(DslError::DuplicateName {
                name: input.name.clone(),
                span: input.span,
            });
        }
    }
    for a in &spec.assignments {
        // Only earlier names are in scope, which keeps the order topological.
        check_names(&a.value, |n| inputs.contains(n) || primitives.contains(n))?;
        let mentions_primitive = a.value.names().iter().any(|n| primitives.contains(n));
        if mentions_primitive {
            let mut raw = None;
            a.value.walk(&mut |e| {
                if let ExprKind::Name(n) = &e.kind {
                    if raw.is_none() && inputs.contains(n.as_str()) {
                        raw = Some((n.clone(), e.span));
                    }
                }
            });
            if let Some((input, span)) = raw {
                return Err(DslError::MixedComposition {
                    primitive: a.target.name.clone(),
                    input,
                    span,
                });
            }
        }
        expect_type(&a.value, Ty::Num)?;
        let name = a.target.name.as_str();
        if inputs.contains(name) || !primitives.insert(name) {
            return Err(DslError::DuplicateName {
                name: name.to_string(),
                span: a.target.span,
            });
        }
    }

    let mut hf_names: HashSet<&str> = HashSet::new();
    for hf in &unit.heuristics {
        if !hf_names.insert(&hf.name.name) {
            return Err(DslError::DuplicateName {
                name: hf.name.name.clone(),
                span: hf.name.span,
            });
        }
        let mut params: HashSet<&str> = HashSet::new();
        for p in &hf.params {
            if !primitives.contains(p.name.as_str()) {
                return Err(DslError::UndefinedName {
                    name: p.name.clone(),
                    span: p.span,
                });
            }
            if !params.insert(&p.name) {
                return Err(DslError::DuplicateName {
                    name: p.name.clone(),
                    span: p.span,
                });
            }
        }
        check_names(&hf.body, |n| params.contains(n))?;
        for leaf in hf.body.conditional_leaves() {
            if !matches!(leaf.kind, ExprKind::Label(_)) {
                return Err(DslError::InvalidLabelLeaf { span: leaf.span });
            }
        }
        expect_type(&hf.body, Ty::Label)?;
    }
    Ok(())
}

fn check_names(e: &Expr, in_scope: impl Fn(&str) -> bool) -> Result<(), DslError> {
    let mut err = None;
    e.walk(&mut |node| {
        if err.is_some() {
            return;
        }
        if let ExprKind::Name(n) = &node.kind {
            if !in_scope(n) {
                err = Some(DslError::UndefinedName {
                    name: n.clone(),
                    span: node.span,
                });
            }
        }
    });
    err.map_or(Ok(()), Err)
}

fn expect_type(e: &Expr, want: Ty) -> Result<(), DslError> {
    let got = type_of(e)?;
    if got != want {
        return Err(DslError::TypeMismatch {
            expected: want.name(),
            found: got.name(),
            span: e.span,
        });
    }
    Ok(())
}

fn type_of(e: &Expr) -> Result<Ty, DslError> {
    Ok(match &e.kind {
        ExprKind::Number(_) | ExprKind::Name(_) => Ty::Num,
        ExprKind::Label(_) => Ty::Label,
        ExprKind::Neg(inner) => {
            expect_type(inner, Ty::Num)?;
            Ty::Num
        }
        ExprKind::Arith { lhs, rhs, .. } => {
            expect_type(lhs, Ty::Num)?;
            expect_type(rhs, Ty::Num)?;
            Ty::Num
        }
        ExprKind::Compare { lhs, rhs, .. } => {
            expect_type(lhs, Ty::Num)?;
            expect_type(rhs, Ty::Num)?;
            Ty::Bool
        }
        ExprKind::Bool { lhs, rhs, .. } => {
            expect_type(lhs, Ty::Bool)?;
            expect_type(rhs, Ty::Bool)?;
            Ty::Bool
        }
        ExprKind::Not(inner) => {
            expect_type(inner, Ty::Bool)?;
            Ty::Bool
        }
        ExprKind::Conditional {
            branches,
            otherwise,
        } => {
            let ty = type_of(otherwise)?;
            if ty == Ty::Bool {
                return Err(DslError::TypeMismatch {
                    expected: Ty::Num.name(),
                    found: ty.name(),
                    span: otherwise.span,
                });
            }
            for (cond, then) in branches {
                expect_type(cond, Ty::Bool)?;
                expect_type(then, ty)?;
            }
            ty
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUNNING: &str = "
        primitives {
            input image_area, image_intensity, image_perimeter
            area = image_area
            intensity = image_intensity
            perimeter = image_perimeter
            ratio = intensity / perimeter
        }
    ";

    #[test]
    fn running_example_specifier() {
        let unit = parse(RUNNING).unwrap();
        let spec = &unit.specifier;
        assert_eq!(spec.assignments.len(), 4);
        let ratio = spec.assignment("ratio").unwrap();
        match &ratio.value.kind {
            ExprKind::Arith { op, lhs, rhs } => {
                assert_eq!(*op, ArithOp::Div);
                assert_eq!(lhs.kind, ExprKind::Name("intensity".into()));
                assert_eq!(rhs.kind, ExprKind::Name("perimeter".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hf_area_is_two_branch_conditional() {
        let src = "primitives { input a area = a }
            hf hf_area(area) {
                if area >= 100000 { 1 } elif area <= 30000 { -1 } else { 0 }
            }";
        let unit = parse(src).unwrap();
        let hf = &unit.heuristics[0];
        assert_eq!(hf.param_names().collect::<Vec<_>>(), vec!["area"]);
        let ExprKind::Conditional {
            branches,
            otherwise,
        } = &hf.body.kind
        else {
            panic!("body is not a conditional");
        };
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[0].1.kind, ExprKind::Label(Label::Positive));
        assert_eq!(branches[1].1.kind, ExprKind::Label(Label::Negative));
        assert_eq!(otherwise.kind, ExprKind::Label(Label::Abstain));
    }

    #[test]
    fn out_of_range_leaf() {
        let src = "primitives { input a x = a } hf h(x) { if x > 1 { 2 } else { 0 } }";
        let err = parse(src).unwrap_err();
        let at = src.find("{ 2 }").unwrap() + 2;
        assert_eq!(
            err,
            DslError::InvalidLabelLeaf {
                span: Span::new(at, at + 1)
            }
        );
    }

    #[test]
    fn name_leaf_is_not_a_label() {
        let src = "primitives { input a x = a } hf h(x) { x }";
        assert!(matches!(parse(src), Err(DslError::InvalidLabelLeaf { .. })));
        let src = "primitives { input a x = a } hf h(x) { 0.5 }";
        assert!(matches!(parse(src), Err(DslError::InvalidLabelLeaf { .. })));
    }

    #[test]
    fn use_before_definition() {
        let src = "primitives { input a  b = c + a  c = a }";
        let err = parse(src).unwrap_err();
        assert_eq!(
            err,
            DslError::UndefinedName {
                name: "c".into(),
                span: Span::new(src.find("c +").unwrap(), src.find("c +").unwrap() + 1)
            }
        );
    }

    #[test]
    fn hf_body_limited_to_params() {
        let src = "primitives { input a  x = a  y = a } hf h(x) { if y > 0 { 1 } else { 0 } }";
        assert!(matches!(parse(src), Err(DslError::UndefinedName { name, .. }) if name == "y"));
        let src = "primitives { input a  x = a } hf h(a) { 1 }";
        assert!(matches!(parse(src), Err(DslError::UndefinedName { name, .. }) if name == "a"));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(matches!(
            parse("primitives { input a x = a x = a }"),
            Err(DslError::DuplicateName { .. })
        ));
        assert!(matches!(
            parse("primitives { input a x = a } hf h(x) { 1 } hf h(x) { 0 }"),
            Err(DslError::DuplicateName { .. })
        ));
        assert!(matches!(
            parse("primitives { input a a = a }"),
            Err(DslError::DuplicateName { .. })
        ));
    }

    #[test]
    fn mixed_composition_rejected() {
        let err = parse("primitives { input a, s x = a y = x * s }").unwrap_err();
        assert!(matches!(err, DslError::MixedComposition { ref input, .. } if input == "s"));
    }

    #[test]
    fn type_errors() {
        assert!(matches!(
            parse("primitives { input a x = a > 1 }"),
            Err(DslError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse("primitives { input a x = a } hf h(x) { if x { 1 } else { 0 } }"),
            Err(DslError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse("primitives { input a x = a } hf h(x) { if x > 0 and x { 1 } else { 0 } }"),
            Err(DslError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_expected_set() {
        let src = "primitives { input a x = a + }";
        let err = parse(src).unwrap_err();
        match err {
            DslError::Syntax {
                span,
                expected,
                found,
            } => {
                assert_eq!(span, Span::new(src.len() - 1, src.len()));
                assert!(expected.iter().any(|e| e == "number"));
                assert_eq!(found, "`}`");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_else_is_a_syntax_error() {
        let err = parse("primitives { input a x = a } hf h(x) { if x > 0 { 1 } }").unwrap_err();
        assert!(
            matches!(err, DslError::Syntax { ref expected, .. } if expected.contains(&"`else`".to_string()))
        );
    }

    #[test]
    fn eof_span_is_empty_at_end() {
        let src = "primitives { input a";
        let err = parse(src).unwrap_err();
        assert_eq!(err.span(), Some(Span::new(src.len(), src.len())));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c > 1 and not d < 2 or e == 3").unwrap();
        let ExprKind::Bool {
            op: BoolOp::Or,
            lhs,
            ..
        } = &e.kind
        else {
            panic!()
        };
        let ExprKind::Bool {
            op: BoolOp::And,
            lhs: cmp,
            rhs: not,
        } = &lhs.kind
        else {
            panic!()
        };
        assert!(matches!(not.kind, ExprKind::Not(_)));
        let ExprKind::Compare { lhs: sum, .. } = &cmp.kind else {
            panic!()
        };
        let ExprKind::Arith {
            op: ArithOp::Add,
            rhs: prod,
            ..
        } = &sum.kind
        else {
            panic!()
        };
        assert!(matches!(
            prod.kind,
            ExprKind::Arith {
                op: ArithOp::Mul,
                ..
            }
        ));
    }

    #[test]
    fn subtraction_is_left_associative() {
        let e = parse_expr("a - b - c").unwrap();
        let ExprKind::Arith { lhs, rhs, .. } = &e.kind else {
            panic!()
        };
        assert!(matches!(
            lhs.kind,
            ExprKind::Arith {
                op: ArithOp::Sub,
                ..
            }
        ));
        assert_eq!(rhs.kind, ExprKind::Name("c".into()));
    }

    #[test]
    fn spans_nest() {
        let src = "primitives { input p, q a = p b = q c = (a + b) * -a / 2 }
            hf h(a, c) { if a > 1 and not c <= 2 { if a == 3 { 1 } else { -1 } } else { 0 } }";
        let unit = parse(src).unwrap();
        let mut exprs: Vec<&Expr> = unit
            .specifier
            .assignments
            .iter()
            .map(|a| &a.value)
            .collect();
        exprs.extend(unit.heuristics.iter().map(|h| &h.body));
        for root in exprs {
            root.walk(&mut |parent| {
                assert!(parent.span.end <= src.len());
                for child in parent.children() {
                    assert!(parent.span.contains(&child.span), "{parent:?} / {child:?}");
                }
            });
        }
    }
}
