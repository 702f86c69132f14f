//! Scalar calculator expressions over `t` and the state components `x1..xn`.
//!
//! Grammar, from loosest to tightest binding:
//!
//! ```text
//! sum      := product (('+' | '-') product)*
//! product  := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := primary ('^' exponent)*
//! exponent := '-' exponent | primary
//! primary  := number | variable | function '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`. All binary
//! operators, `^` included, associate to the left.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// A variable slot. `State(k)` is zero-based: `x1` is `State(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Time,
    State(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl UnaryOp {
    fn function(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at offset {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("`{name}` takes exactly one argument, got {got} (offset {offset})")]
    Arity {
        name: String,
        got: usize,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
    #[error("non-finite value produced by `{node}`")]
    NonFinite { node: String },
    #[error("variable `{name}` is not bound")]
    Unbound { name: String },
}

/// Parsed, immutable expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
    time_name: String,
}

/// Parses `text` as an expression in `t, x1..xn`.
pub fn parse_expression(text: &str, n: usize) -> Result<Expression, ParseError> {
    Expression::parse(text, n)
}

/// Evaluates `e` in an environment keyed by variable name.
pub fn eval_expression(e: &Expression, env: &HashMap<String, f64>) -> Result<f64, EvalError> {
    e.eval_env(env)
}

impl Expression {
    pub fn parse(text: &str, n: usize) -> Result<Self, ParseError> {
        Self::parse_with(text, n, "t")
    }

    /// Parses a function of a single variable called `name` (for example the
    /// density `s` of a linear functional). The variable occupies the time slot.
    pub fn parse_univariate(text: &str, name: &str) -> Result<Self, ParseError> {
        Self::parse_with(text, 0, name)
    }

    fn parse_with(text: &str, dim: usize, time_name: &str) -> Result<Self, ParseError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            dim,
            time_name,
            len: text.len(),
        };
        if parser.peek().is_none() {
            return Err(ParseError::Syntax {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let root = parser.sum()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected `{}`", tok.kind),
            });
        }
        Ok(Expression {
            root,
            dim,
            time_name: time_name.to_string(),
        })
    }

    /// Wraps an already built tree. Variable indices must be below `dim`.
    pub fn from_node(root: Node, dim: usize) -> Self {
        Expression {
            root,
            dim,
            time_name: "t".into(),
        }
    }

    pub fn constant(value: f64) -> Self {
        Expression::from_node(Node::Const(value), 0)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates with `t` bound to `t` and `xk` bound to `x[k-1]`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        self.eval_node(&self.root, t, x)
    }

    pub fn eval_env(&self, env: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let t = env.get(&self.time_name).copied();
        let mut x = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            x.push(env.get(&format!("x{}", k + 1)).copied());
        }
        self.check_bound(&self.root, t.is_some(), &x)?;
        let x: Vec<f64> = x.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        self.eval(t.unwrap_or(f64::NAN), &x)
    }

    fn check_bound(&self, node: &Node, has_t: bool, x: &[Option<f64>]) -> Result<(), EvalError> {
        match node {
            Node::Const(_) => Ok(()),
            Node::Var(Var::Time) if !has_t => Err(EvalError::Unbound {
                name: self.time_name.clone(),
            }),
            Node::Var(Var::State(k)) if x.get(*k).copied().flatten().is_none() => {
                Err(EvalError::Unbound {
                    name: format!("x{}", k + 1),
                })
            }
            Node::Var(_) => Ok(()),
            Node::Unary(_, a) => self.check_bound(a, has_t, x),
            Node::Binary(_, a, b) => {
                self.check_bound(a, has_t, x)?;
                self.check_bound(b, has_t, x)
            }
        }
    }

    fn eval_node(&self, node: &Node, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        let value = match node {
            Node::Const(c) => return Ok(*c),
            Node::Var(Var::Time) => return Ok(t),
            Node::Var(Var::State(k)) => {
                return x.get(*k).copied().ok_or_else(|| EvalError::Unbound {
                    name: format!("x{}", k + 1),
                })
            }
            Node::Unary(op, arg) => {
                let v = self.eval_node(arg, t, x)?;
                match op {
                    UnaryOp::Neg => -v,
                    UnaryOp::Exp => v.exp(),
                    UnaryOp::Log => {
                        if v <= 0.0 {
                            return Err(self.domain(node, "log of a non-positive value"));
                        }
                        v.ln()
                    }
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Sqrt => {
                        if v < 0.0 {
                            return Err(self.domain(node, "square root of a negative value"));
                        }
                        v.sqrt()
                    }
                    UnaryOp::Abs => v.abs(),
                }
            }
            Node::Binary(op, lhs, rhs) => {
                let a = self.eval_node(lhs, t, x)?;
                let b = self.eval_node(rhs, t, x)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain(node, "division by zero"));
                        }
                        a / b
                    }
                    BinaryOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() {
                            return Err(self.domain(node, "power of a negative base"));
                        }
                        v
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite {
                node: self.render(node),
            })
        }
    }

    fn domain(&self, node: &Node, reason: &'static str) -> EvalError {
        EvalError::Domain {
            node: self.render(node),
            reason,
        }
    }

    fn render(&self, node: &Node) -> String {
        let mut out = String::new();
        write_node(&mut out, node, &self.time_name).expect("writing to a String");
        out
    }
}

/// Canonical, fully parenthesised form. Parsing the output yields a tree that
/// prints identically.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.time_name)
    }
}

fn write_node<W: fmt::Write>(out: &mut W, node: &Node, time_name: &str) -> fmt::Result {
    match node {
        Node::Const(c) => {
            if c.is_sign_negative() {
                write!(out, "(-{:?})", -c)
            } else {
                write!(out, "{:?}", c)
            }
        }
        Node::Var(Var::Time) => out.write_str(time_name),
        Node::Var(Var::State(k)) => write!(out, "x{}", k + 1),
        Node::Unary(UnaryOp::Neg, a) => {
            out.write_str("(-")?;
            write_node(out, a, time_name)?;
            out.write_char(')')
        }
        Node::Unary(op, a) => {
            write!(out, "{}(", op.name())?;
            write_node(out, a, time_name)?;
            out.write_char(')')
        }
        Node::Binary(op, a, b) => {
            out.write_char('(')?;
            write_node(out, a, time_name)?;
            write!(out, " {} ", op.symbol())?;
            write_node(out, b, time_name)?;
            out.write_char(')')
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(v) => write!(f, "{}", v),
            TokenKind::Ident(s) => f.write_str(s),
            TokenKind::Op(c) => write!(f, "{}", c),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Comma => f.write_str(","),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                TokenKind::Op(c as char)
            }
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b',' => {
                i += 1;
                TokenKind::Comma
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
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
                let literal = &text[start..i];
                let value = literal.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{}`", literal),
                })?;
                TokenKind::Number(value)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", ch),
                });
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    dim: usize,
    time_name: &'a str,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn next(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn end_error(&self) -> ParseError {
        ParseError::Syntax {
            offset: self.len,
            message: "unexpected end of input".into(),
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.product()?;
            let op = if c == '+' {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            let arg = self.unary()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(arg)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let mut base = self.primary()?;
        while self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.exponent()?;
            base = Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Node, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            let arg = self.exponent()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(arg)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let tok = self.next().ok_or_else(|| self.end_error())?;
        match &tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(*v)),
            TokenKind::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if let Some(op) = UnaryOp::function(name) {
                    return self.call(op, name, tok.offset);
                }
                if let Some(var) = self.variable(name) {
                    return Ok(Node::Var(var));
                }
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    })
                ) {
                    return Err(ParseError::Syntax {
                        offset: tok.offset,
                        message: format!("unknown function `{}`", name),
                    });
                }
                Err(ParseError::UnknownVariable {
                    name: name.clone(),
                    offset: tok.offset,
                })
            }
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected `{}`", other),
            }),
        }
    }

    fn call(&mut self, op: UnaryOp, name: &str, offset: usize) -> Result<Node, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::LParen,
                ..
            }) => self.pos += 1,
            _ => {
                return Err(ParseError::Arity {
                    name: name.to_string(),
                    got: 0,
                    offset,
                })
            }
        }
        if matches!(
            self.peek(),
            Some(Token {
                kind: TokenKind::RParen,
                ..
            })
        ) {
            return Err(ParseError::Arity {
                name: name.to_string(),
                got: 0,
                offset,
            });
        }
        let arg = self.sum()?;
        let mut extra = 0;
        while matches!(
            self.peek(),
            Some(Token {
                kind: TokenKind::Comma,
                ..
            })
        ) {
            self.pos += 1;
            self.sum()?;
            extra += 1;
        }
        self.expect_rparen()?;
        if extra > 0 {
            return Err(ParseError::Arity {
                name: name.to_string(),
                got: 1 + extra,
                offset,
            });
        }
        Ok(Node::Unary(op, Box::new(arg)))
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(tok) => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("expected `)`, found `{}`", tok.kind),
            }),
            None => Err(self.end_error()),
        }
    }

    fn variable(&self, name: &str) -> Option<Var> {
        if name == self.time_name {
            return Some(Var::Time);
        }
        let index = name.strip_prefix('x')?;
        if index.starts_with('0') {
            return None;
        }
        let k: usize = index.parse().ok()?;
        (1..=self.dim).contains(&k).then_some(Var::State(k - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, n: usize, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        parse_expression(text, n).unwrap().eval(t, x)
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1+2*3", 1, 0.0, &[0.0]).unwrap(), 7.0);
        assert_eq!(eval("(1+2)*3", 1, 0.0, &[0.0]).unwrap(), 9.0);
        assert_eq!(eval("8/4/2", 0, 0.0, &[]).unwrap(), 1.0);
        assert_eq!(eval("2^3^2", 0, 0.0, &[]).unwrap(), 64.0);
        assert_eq!(eval("2^-1", 0, 0.0, &[]).unwrap(), 0.5);
    }

    #[test]
    fn unary_minus_is_looser_than_power() {
        assert_eq!(eval("-x1^2", 1, 0.0, &[3.0]).unwrap(), -9.0);
        assert_eq!(eval("(-x1)^2", 1, 0.0, &[3.0]).unwrap(), 9.0);
    }

    #[test]
    fn exponential_field_component() {
        assert_eq!(eval("-2*x1*exp(x2)", 2, 0.0, &[1.0, 0.0]).unwrap(), -2.0);
        assert_eq!(eval("x1^2", 1, 0.0, &[3.0]).unwrap(), 9.0);
        assert_eq!(eval("exp(x1)", 1, 0.0, &[0.0]).unwrap(), 1.0);
        assert_eq!(eval(" t *  2 ", 0, 1.5, &[]).unwrap(), 3.0);
        assert_eq!(eval("1.5e-1*10", 0, 0.0, &[]).unwrap(), 1.5);
    }

    #[test]
    fn dangling_operator_reports_offset() {
        assert_eq!(
            parse_expression("2+", 1).unwrap_err(),
            ParseError::Syntax {
                offset: 2,
                message: "unexpected end of input".into()
            }
        );
    }

    #[test]
    fn unknown_variables_and_arity() {
        assert!(matches!(
            parse_expression("x3", 2),
            Err(ParseError::UnknownVariable { .. })
        ));
        assert!(matches!(
            parse_expression("y", 2),
            Err(ParseError::UnknownVariable { .. })
        ));
        assert!(matches!(
            parse_expression("x0", 2),
            Err(ParseError::UnknownVariable { .. })
        ));
        assert!(matches!(
            parse_expression("exp(1, 2)", 0),
            Err(ParseError::Arity { got: 2, .. })
        ));
        assert!(matches!(
            parse_expression("exp + 1", 0),
            Err(ParseError::Arity { got: 0, .. })
        ));
        assert!(matches!(
            parse_expression("foo(1)", 0),
            Err(ParseError::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("", 0),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("(1", 0),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("1 $ 2", 0),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn domain_errors_name_the_node() {
        let err = eval("x1/x2", 2, 0.0, &[1.0, 0.0]).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                node: "(x1 / x2)".into(),
                reason: "division by zero"
            }
        );
        assert!(matches!(
            eval("log(x1)", 1, 0.0, &[0.0]),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            eval("sqrt(-1)", 0, 0.0, &[]),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            eval("exp(1000)", 0, 0.0, &[]),
            Err(EvalError::NonFinite { .. })
        ));
    }

    #[test]
    fn env_evaluation() {
        let e = parse_expression("t + x2", 2).unwrap();
        let mut env = HashMap::new();
        env.insert("t".to_string(), 1.0);
        env.insert("x2".to_string(), 2.0);
        assert_eq!(eval_expression(&e, &env).unwrap(), 3.0);
        env.remove("x2");
        assert_eq!(
            eval_expression(&e, &env).unwrap_err(),
            EvalError::Unbound { name: "x2".into() }
        );
    }

    #[test]
    fn univariate_density() {
        let e = Expression::parse_univariate("1 - s", "s").unwrap();
        assert_eq!(e.eval(0.25, &[]).unwrap(), 0.75);
        assert_eq!(e.to_string(), "(1.0 - s)");
        assert!(Expression::parse_univariate("t", "s").is_err());
    }

    #[test]
    fn canonical_print_is_a_fixed_point() {
        for text in [
            "-2*x1*exp(-x2)",
            "1 - -3",
            "x1^-2/(t+1)",
            "abs(sin(t))*cos(x1)",
        ] {
            let once = parse_expression(text, 2).unwrap().to_string();
            let twice = parse_expression(&once, 2).unwrap().to_string();
            assert_eq!(once, twice);
        }
    }
}
