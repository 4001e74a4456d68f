//! Canonical formatting. Output re-parses to a structurally equal unit.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    out.push_str("primitives {\n");
    let spec = &unit.specifier;
    if !spec.inputs.is_empty() {
        let names: Vec<&str> = spec.input_names().collect();
        let _ = writeln!(out, "{INDENT}input {}", names.join(", "));
    }
    for a in &spec.assignments {
        let _ = write!(out, "{INDENT}{} = ", a.target.name);
        write_block_expr(&mut out, &a.value, 1);
        out.push('\n');
    }
    out.push_str("}\n");
    for hf in &unit.heuristics {
        let params: Vec<&str> = hf.param_names().collect();
        let _ = writeln!(out, "\nhf {}({}) {{", hf.name.name, params.join(", "));
        out.push_str(INDENT);
        write_block_expr(&mut out, &hf.body, 1);
        out.push_str("\n}\n");
    }
    out
}

/// Single-line rendering of an expression with minimal parentheses.
pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

// Binding strength; higher binds tighter.
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_NOT: u8 = 3;
const P_CMP: u8 = 4;
const P_ADD: u8 = 5;
const P_MUL: u8 = 6;
const P_NEG: u8 = 7;
const P_ATOM: u8 = 8;

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Number(_)
        | ExprKind::Label(_)
        | ExprKind::Name(_)
        | ExprKind::Conditional { .. } => P_ATOM,
        ExprKind::Neg(_) => P_NEG,
        ExprKind::Arith { op, .. } => match op {
            ArithOp::Add | ArithOp::Sub => P_ADD,
            ArithOp::Mul | ArithOp::Div => P_MUL,
        },
        ExprKind::Compare { .. } => P_CMP,
        ExprKind::Not(_) => P_NOT,
        ExprKind::Bool {
            op: BoolOp::And, ..
        } => P_AND,
        ExprKind::Bool { op: BoolOp::Or, .. } => P_OR,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let prec = precedence(e);
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Number(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Label(l) => {
            let _ = write!(out, "{l}");
        }
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, P_NEG);
        }
        ExprKind::Not(inner) => {
            out.push_str("not ");
            write_expr(out, inner, P_NOT);
        }
        ExprKind::Arith { op, lhs, rhs } => {
            write_expr(out, lhs, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, prec + 1);
        }
        ExprKind::Compare { op, lhs, rhs } => {
            write_expr(out, lhs, P_CMP + 1);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, rhs, P_CMP + 1);
        }
        ExprKind::Bool { op, lhs, rhs } => {
            write_expr(out, lhs, prec);
            let _ = write!(out, " {} ", op.keyword());
            write_expr(out, rhs, prec + 1);
        }
        ExprKind::Conditional {
            branches,
            otherwise,
        } => {
            for (i, (cond, then)) in branches.iter().enumerate() {
                out.push_str(if i == 0 { "if " } else { " elif " });
                write_expr(out, cond, 0);
                out.push_str(" { ");
                write_expr(out, then, 0);
                out.push_str(" }");
            }
            out.push_str(" else { ");
            write_expr(out, otherwise, 0);
            out.push_str(" }");
        }
    }
    if paren {
        out.push(')');
    }
}

/// Top-level conditionals and conditionals in branch results are laid out
/// one clause per line; everything else stays inline.
fn write_block_expr(out: &mut String, e: &Expr, depth: usize) {
    let ExprKind::Conditional {
        branches,
        otherwise,
    } = &e.kind
    else {
        write_expr(out, e, 0);
        return;
    };
    let inner = INDENT.repeat(depth + 1);
    let outer = INDENT.repeat(depth);
    for (i, (cond, then)) in branches.iter().enumerate() {
        out.push_str(if i == 0 { "if " } else { " elif " });
        write_expr(out, cond, 0);
        out.push_str(" {\n");
        out.push_str(&inner);
        write_block_expr(out, then, depth + 1);
        out.push('\n');
        out.push_str(&outer);
        out.push('}');
    }
    out.push_str(" else {\n");
    out.push_str(&inner);
    write_block_expr(out, otherwise, depth + 1);
    out.push('\n');
    out.push_str(&outer);
    out.push('}');
}
