//! Scalar expressions in the radial variable `r`.
//!
//! Custom model manifolds are described by formulas such as
//! `sinh(sqrt(kappa)*r)/sqrt(kappa)`. This module parses those strings into an
//! [`ExprAst`], evaluates them in IEEE double precision and checks that a
//! user-supplied derivative matches its primitive by central differences.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          // right associative
//! primary := number | 'r' | 'pi' | 'e' | param
//!          | func '(' expr ')' | '(' expr ')'
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Errors raised while parsing or evaluating an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

/// A node of the expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Param(String),
    Const(Constant),
    Neg(Box<Node>),
    Binary {
        op: BinaryOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
    },
    Call {
        func: Func,
        arg: Box<Node>,
    },
}

/// Parsed expression together with the set of parameter names it references.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    params: BTreeSet<String>,
}

impl ExprAst {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn params(&self) -> &BTreeSet<String> {
        &self.params
    }

    /// Evaluates the expression at `r`.
    ///
    /// Every non-finite intermediate result (overflow, `log(0)`, ...) is
    /// reported as [`ExprError::Domain`]; NaN never escapes.
    pub fn eval(&self, r: f64, params: &BTreeMap<String, f64>) -> Result<f64, ExprError> {
        eval_node(&self.root, r, params)
    }

    /// Substitutes numeric values for every parameter.
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<ExprAst, ExprError> {
        let root = bind_node(&self.root, params)?;
        Ok(ExprAst {
            root,
            params: BTreeSet::new(),
        })
    }

    pub fn is_constant_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

/// Fully parenthesized rendering; re-parsing yields the same tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var => f.write_str("r"),
            Node::Param(name) => f.write_str(name),
            Node::Const(Constant::Pi) => f.write_str("pi"),
            Node::Const(Constant::E) => f.write_str("e"),
            Node::Neg(inner) => write!(f, "(-{inner})"),
            Node::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Node::Call { func, arg } => write!(f, "{}({arg})", func.name()),
        }
    }
}

fn domain(node: &Node, reason: &'static str) -> ExprError {
    ExprError::Domain {
        expr: node.to_string(),
        reason,
    }
}

fn finite(node: &Node, v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(node, "non-finite result"))
    }
}

fn eval_node(node: &Node, r: f64, params: &BTreeMap<String, f64>) -> Result<f64, ExprError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var => Ok(r),
        Node::Param(name) => params
            .get(name)
            .copied()
            .ok_or_else(|| ExprError::UnboundParameter(name.clone())),
        Node::Const(Constant::Pi) => Ok(std::f64::consts::PI),
        Node::Const(Constant::E) => Ok(std::f64::consts::E),
        Node::Neg(inner) => Ok(-eval_node(inner, r, params)?),
        Node::Binary { op, lhs, rhs } => {
            let a = eval_node(lhs, r, params)?;
            let b = eval_node(rhs, r, params)?;
            let v = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    a / b
                }
                BinaryOp::Pow => {
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(domain(node, "non-integer power of a negative base"));
                    }
                    if a == 0.0 && b < 0.0 {
                        return Err(domain(node, "negative power of zero"));
                    }
                    a.powf(b)
                }
            };
            finite(node, v)
        }
        Node::Call { func, arg } => {
            let x = eval_node(arg, r, params)?;
            let v = match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain(node, "logarithm of a non-positive number"));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(node, "square root of a negative number"));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            };
            finite(node, v)
        }
    }
}

fn bind_node(node: &Node, params: &BTreeMap<String, f64>) -> Result<Node, ExprError> {
    Ok(match node {
        Node::Param(name) => Node::Num(
            params
                .get(name)
                .copied()
                .ok_or_else(|| ExprError::UnboundParameter(name.clone()))?,
        ),
        Node::Neg(inner) => Node::Neg(Box::new(bind_node(inner, params)?)),
        Node::Binary { op, lhs, rhs } => Node::Binary {
            op: *op,
            lhs: Box::new(bind_node(lhs, params)?),
            rhs: Box::new(bind_node(rhs, params)?),
        },
        Node::Call { func, arg } => Node::Call {
            func: *func,
            arg: Box::new(bind_node(arg, params)?),
        },
        other => other.clone(),
    })
}

/// Parses an expression that may only reference `r`, constants and functions.
pub fn parse(source: &str) -> Result<ExprAst, ExprError> {
    parse_with_params(source, &[])
}

/// Parses an expression whose free identifiers must come from `allowed`.
pub fn parse_with_params(source: &str, allowed: &[&str]) -> Result<ExprAst, ExprError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: source.len(),
        allowed,
        params: BTreeSet::new(),
    };
    let root = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ExprError::Syntax {
            offset: tok.offset,
            expected: vec!["operator", "end of input"],
        });
    }
    Ok(ExprAst {
        root,
        params: parser.params,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part: e, E followed by optional sign and at least one digit
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &source[start..i];
            let value = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                offset: start,
                expected: vec!["number"],
            })?;
            tokens.push(Token {
                kind: TokKind::Num(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokKind::Ident(source[start..i].to_string()),
                offset: start,
            });
        } else {
            let kind = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => TokKind::Op(c as char),
                b'(' => TokKind::LParen,
                b')' => TokKind::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        offset: start,
                        expected: vec!["number", "identifier", "operator", "parenthesis"],
                    })
                }
            };
            i += 1;
            tokens.push(Token {
                kind,
                offset: start,
            });
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    allowed: &'a [&'a str],
    params: BTreeSet<String>,
}

const OPERAND: [&str; 4] = ["number", "identifier", "'('", "'-'"];

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Node::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Node::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Binary {
                op: BinaryOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exponent),
            });
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ExprError::Syntax {
                offset: self.offset(),
                expected: vec!["')'", "operator"],
            }),
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(ExprError::Syntax {
                offset: self.end,
                expected: OPERAND.to_vec(),
            });
        };
        match tok.kind {
            TokKind::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            TokKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                self.pos += 1;
                let is_call = matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokKind::LParen,
                        ..
                    })
                );
                if is_call {
                    let func = Func::lookup(&name).ok_or(ExprError::UnknownFunction {
                        name,
                        offset: tok.offset,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call {
                        func,
                        arg: Box::new(arg),
                    });
                }
                match name.as_str() {
                    "r" => Ok(Node::Var),
                    "pi" => Ok(Node::Const(Constant::Pi)),
                    "e" => Ok(Node::Const(Constant::E)),
                    _ if self.allowed.contains(&name.as_str()) => {
                        self.params.insert(name.clone());
                        Ok(Node::Param(name))
                    }
                    _ => Err(ExprError::UnknownIdentifier {
                        name,
                        offset: tok.offset,
                    }),
                }
            }
            TokKind::Op(_) | TokKind::RParen => Err(ExprError::Syntax {
                offset: tok.offset,
                expected: OPERAND.to_vec(),
            }),
        }
    }
}

/// Maximum relative deviation between a central difference of `f` and `fprime`.
///
/// The step at `r` is `1e-5 * max(1, |r|)`; the deviation at each sample is
/// `|fd - fprime(r)| / max(1, |fprime(r)|)`.
pub fn derivative_consistency(
    f: &ExprAst,
    fprime: &ExprAst,
    sample: &[f64],
    params: &BTreeMap<String, f64>,
) -> Result<f64, ExprError> {
    derivative_deviation(
        |x| f.eval(x, params),
        |x| fprime.eval(x, params),
        sample,
    )
}

/// Same check as [`derivative_consistency`] over arbitrary callables.
pub fn derivative_deviation<E>(
    f: impl Fn(f64) -> Result<f64, E>,
    fprime: impl Fn(f64) -> Result<f64, E>,
    sample: &[f64],
) -> Result<f64, E> {
    let mut worst = 0.0_f64;
    for &r in sample {
        let h = 1e-5 * r.abs().max(1.0);
        let fd = (f(r + h)? - f(r - h)?) / (2.0 * h);
        let d = fprime(r)?;
        worst = worst.max((fd - d).abs() / d.abs().max(1.0));
    }
    Ok(worst)
}
