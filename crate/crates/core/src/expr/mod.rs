//! Density formulas: parsing, evaluation and exact first derivatives.
//!
//! The grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | "pi" | "e" | variable
//!         | func "(" expr ")" | "pow" "(" expr "," expr ")"
//!         | "(" expr ")" ;
//! func    = "abs" | "exp" | "log" | "ln" | "sqrt" | "atan" | "arctan" ;
//! variable = "V" | "v" | "x" ;
//! ```
//!
//! Exactly one variable name may appear in an expression. Derivatives come
//! from forward-mode dual arithmetic; `abs` at exactly zero is evaluated from
//! both sides and the two slopes must agree.

mod ast;
mod dual;
mod parse;

pub use ast::{BinaryOp, Node, UnaryOp};
pub use dual::DualValue;
pub use parse::VARIABLE_NAMES;

use std::cell::Cell;
use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_KINK_ATOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(f64),
    Var,
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize),
}

/// A parsed density formula in one variable, compiled to a postfix program.
#[derive(Debug, Clone)]
pub struct DensityExpr {
    source: String,
    variable: String,
    root: Node,
    program: Vec<Instr>,
    /// Rendered subexpressions, indexed by the instruction that produced them.
    subexprs: Vec<String>,
    max_depth: usize,
}

impl PartialEq for DensityExpr {
    fn eq(&self, other: &Self) -> bool {
        self.variable == other.variable && self.root == other.root
    }
}

pub fn parse(text: &str) -> Result<DensityExpr> {
    let (root, variable) = parse::parse_tree(text)?;
    let variable = variable.ok_or_else(|| Error::Syntax {
        offset: 0,
        message: "expression has no variable".into(),
    })?;
    Ok(DensityExpr::compile(text.to_string(), variable, root))
}

impl DensityExpr {
    fn compile(source: String, variable: String, root: Node) -> Self {
        let mut program = Vec::new();
        let mut subexprs = Vec::new();
        let mut depth = 0;
        let mut max_depth = 0;
        emit(&root, &variable, &mut program, &mut subexprs, &mut depth, &mut max_depth);
        Self {
            source,
            variable,
            root,
            program,
            subexprs,
            max_depth,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        let kink = Cell::new(false);
        let out = self.run(DualValue::constant(v), 1.0, &kink)?;
        Ok(out.primal)
    }

    pub fn eval_dual(&self, v: f64) -> Result<DualValue> {
        self.eval_dual_with(v, DEFAULT_KINK_ATOL)
    }

    /// Dual evaluation; at an `abs` kink both one-sided slopes are computed
    /// and must agree within `kink_atol`.
    pub fn eval_dual_with(&self, v: f64, kink_atol: f64) -> Result<DualValue> {
        let kink = Cell::new(false);
        let right = self.run(DualValue::variable(v), 1.0, &kink)?;
        let right = if kink.get() {
            let left = self.run(DualValue::variable(v), -1.0, &Cell::new(false))?;
            if !((right.tangent - left.tangent).abs() <= kink_atol) {
                return Err(Error::NonSmooth {
                    at: v,
                    left: left.tangent,
                    right: right.tangent,
                });
            }
            DualValue {
                primal: right.primal,
                tangent: 0.5 * (right.tangent + left.tangent),
            }
        } else {
            right
        };
        if !right.tangent.is_finite() {
            return Err(Error::NonFinite { at: v });
        }
        Ok(right)
    }

    fn run(&self, x: DualValue, side: f64, kink: &Cell<bool>) -> Result<DualValue> {
        let mut stack: Vec<DualValue> = Vec::with_capacity(self.max_depth);
        for (idx, instr) in self.program.iter().enumerate() {
            let value = match *instr {
                Instr::Const(c) => DualValue::constant(c),
                Instr::Var => x,
                Instr::Unary(op, _) => {
                    let a = stack.pop().expect("well-formed program");
                    match op {
                        UnaryOp::Neg => -a,
                        UnaryOp::Abs => {
                            if a.primal == 0.0 && a.tangent != 0.0 {
                                kink.set(true);
                            }
                            a.abs_one_sided(side)
                        }
                        UnaryOp::Exp => a.exp(),
                        UnaryOp::Log => {
                            if !(a.primal > 0.0) {
                                return Err(self.domain(idx, x.primal, "log of a non-positive value"));
                            }
                            a.ln()
                        }
                        UnaryOp::Sqrt => {
                            if !(a.primal >= 0.0) {
                                return Err(self.domain(idx, x.primal, "sqrt of a negative value"));
                            }
                            a.sqrt()
                        }
                        UnaryOp::Atan => a.atan(),
                    }
                }
                Instr::Binary(op, _) => {
                    let b = stack.pop().expect("well-formed program");
                    let a = stack.pop().expect("well-formed program");
                    match op {
                        BinaryOp::Add => a + b,
                        BinaryOp::Sub => a - b,
                        BinaryOp::Mul => a * b,
                        BinaryOp::Div => {
                            if b.primal == 0.0 {
                                return Err(self.domain(idx, x.primal, "division by zero"));
                            }
                            a / b
                        }
                        BinaryOp::Pow => {
                            if b.tangent != 0.0 && !(a.primal > 0.0) {
                                return Err(self.domain(
                                    idx,
                                    x.primal,
                                    "variable exponent needs a positive base",
                                ));
                            }
                            let p = a.pow(b);
                            if p.primal.is_nan() {
                                return Err(self.domain(idx, x.primal, "power is undefined"));
                            }
                            p
                        }
                    }
                }
            };
            stack.push(value);
        }
        let out = stack.pop().expect("well-formed program");
        if !out.primal.is_finite() {
            return Err(Error::NonFinite { at: x.primal });
        }
        Ok(out)
    }

    fn domain(&self, idx: usize, at: f64, message: &str) -> Error {
        let subexpr = match self.program[idx] {
            Instr::Unary(_, s) | Instr::Binary(_, s) => self.subexprs[s].clone(),
            _ => String::new(),
        };
        Error::Domain {
            subexpr,
            at,
            message: message.to_string(),
        }
    }
}

fn emit(
    node: &Node,
    var: &str,
    program: &mut Vec<Instr>,
    subexprs: &mut Vec<String>,
    depth: &mut usize,
    max_depth: &mut usize,
) {
    match node {
        Node::Const(c) => {
            program.push(Instr::Const(*c));
            *depth += 1;
        }
        Node::Var => {
            program.push(Instr::Var);
            *depth += 1;
        }
        Node::Unary(op, a) => {
            emit(a, var, program, subexprs, depth, max_depth);
            subexprs.push(node.display(var).to_string());
            program.push(Instr::Unary(*op, subexprs.len() - 1));
        }
        Node::Binary(op, a, b) => {
            emit(a, var, program, subexprs, depth, max_depth);
            emit(b, var, program, subexprs, depth, max_depth);
            subexprs.push(node.display(var).to_string());
            program.push(Instr::Binary(*op, subexprs.len() - 1));
            *depth -= 1;
        }
    }
    *max_depth = (*max_depth).max(*depth);
}

impl fmt::Display for DensityExpr {
    /// Canonical, fully parenthesized form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root.display(&self.variable))
    }
}
