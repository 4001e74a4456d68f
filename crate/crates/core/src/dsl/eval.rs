use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::error::DslError;

/// Primitive name → value, as produced by a primitive specifier.
pub type PrimitiveValues = BTreeMap<String, f64>;

/// Name lookup used by the evaluator.
pub trait Env {
    fn get(&self, name: &str) -> Option<f64>;
}

impl Env for HashMap<String, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        HashMap::get(self, name).copied()
    }
}

impl Env for BTreeMap<String, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        BTreeMap::get(self, name).copied()
    }
}

impl<F: Fn(&str) -> Option<f64>> Env for F {
    fn get(&self, name: &str) -> Option<f64> {
        self(name)
    }
}

/// Runs every assignment in order over the raw inputs of one data point.
pub fn evaluate_specifier(
    spec: &PrimitiveSpecifier,
    raw: &impl Env,
) -> Result<PrimitiveValues, DslError> {
    let mut inputs = HashMap::with_capacity(spec.inputs.len());
    for input in &spec.inputs {
        let v = raw.get(&input.name).ok_or_else(|| DslError::MissingInput {
            name: input.name.clone(),
        })?;
        inputs.insert(input.name.as_str(), v);
    }
    let mut values = PrimitiveValues::new();
    for a in &spec.assignments {
        let lookup = |n: &str| inputs.get(n).copied().or_else(|| values.get(n).copied());
        let v = eval_num(&a.value, &lookup, &a.target.name)?;
        values.insert(a.target.name.clone(), v);
    }
    Ok(values)
}

/// Evaluates a heuristic over primitive values. Only the parameters are read.
pub fn evaluate_hf(hf: &HeuristicDecl, prims: &impl Env) -> Result<Label, DslError> {
    let mut params = HashMap::with_capacity(hf.params.len());
    for p in &hf.params {
        let v = prims.get(&p.name).ok_or_else(|| DslError::MissingInput {
            name: p.name.clone(),
        })?;
        params.insert(p.name.as_str(), v);
    }
    let lookup = |n: &str| params.get(n).copied();
    eval_label(&hf.body, &lookup, &hf.name.name)
}

/// Evaluates the body of an HF against positional parameter values (same
/// order as `hf.params`). Faster path for table materialisation.
pub fn evaluate_hf_positional(hf: &HeuristicDecl, values: &[f64]) -> Result<Label, DslError> {
    let lookup = |n: &str| {
        hf.params
            .iter()
            .position(|p| p.name == n)
            .map(|i| values[i])
    };
    eval_label(&hf.body, &lookup, &hf.name.name)
}

/// Evaluates a numeric expression. `within` names the primitive or heuristic
/// reported on division by zero.
pub fn evaluate_expr(e: &Expr, env: &impl Env, within: &str) -> Result<f64, DslError> {
    eval_num(e, env, within)
}

fn eval_label(e: &Expr, env: &impl Env, within: &str) -> Result<Label, DslError> {
    match &e.kind {
        ExprKind::Label(l) => Ok(*l),
        ExprKind::Conditional {
            branches,
            otherwise,
        } => {
            for (cond, then) in branches {
                if eval_bool(cond, env, within)? {
                    return eval_label(then, env, within);
                }
            }
            eval_label(otherwise, env, within)
        }
        _ => Err(DslError::InvalidLabelLeaf { span: e.span }),
    }
}

fn eval_num(e: &Expr, env: &impl Env, within: &str) -> Result<f64, DslError> {
    match &e.kind {
        ExprKind::Number(v) => Ok(*v),
        ExprKind::Name(n) => env
            .get(n)
            .ok_or_else(|| DslError::MissingInput { name: n.clone() }),
        ExprKind::Neg(inner) => Ok(-eval_num(inner, env, within)?),
        ExprKind::Arith { op, lhs, rhs } => {
            let a = eval_num(lhs, env, within)?;
            let b = eval_num(rhs, env, within)?;
            match op {
                ArithOp::Add => Ok(a + b),
                ArithOp::Sub => Ok(a - b),
                ArithOp::Mul => Ok(a * b),
                ArithOp::Div => {
                    if b == 0.0 {
                        Err(DslError::DivisionByZero {
                            within: within.to_string(),
                            span: e.span,
                        })
                    } else {
                        Ok(a / b)
                    }
                }
            }
        }
        ExprKind::Conditional {
            branches,
            otherwise,
        } => {
            for (cond, then) in branches {
                if eval_bool(cond, env, within)? {
                    return eval_num(then, env, within);
                }
            }
            eval_num(otherwise, env, within)
        }
        _ => Err(DslError::TypeMismatch {
            expected: "numeric",
            found: "non-numeric",
            span: e.span,
        }),
    }
}

fn eval_bool(e: &Expr, env: &impl Env, within: &str) -> Result<bool, DslError> {
    match &e.kind {
        ExprKind::Compare { op, lhs, rhs } => {
            Ok(op.apply(eval_num(lhs, env, within)?, eval_num(rhs, env, within)?))
        }
        ExprKind::Bool { op, lhs, rhs } => {
            let a = eval_bool(lhs, env, within)?;
            match op {
                BoolOp::And => Ok(a && eval_bool(rhs, env, within)?),
                BoolOp::Or => Ok(a || eval_bool(rhs, env, within)?),
            }
        }
        ExprKind::Not(inner) => Ok(!eval_bool(inner, env, within)?),
        _ => Err(DslError::TypeMismatch {
            expected: "boolean",
            found: "non-boolean",
            span: e.span,
        }),
    }
}
