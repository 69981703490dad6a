//! A small expression language over one real variable.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" [ "-" ] integer ] ;
//! atom    = number | variable | "pi" | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "sqrt" | "exp" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! Exponents must be integer literals. `-s^2` parses as `-(s^2)`, and `^` binds
//! tighter than unary minus on its left operand only.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors produced while parsing an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("non-integer exponent at offset {offset}")]
    NonIntegerExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonIntegerExponent { offset } => *offset,
        }
    }
}

/// Raised when an expression is evaluated outside its natural domain.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("division by zero at {at}")]
    DivisionByZero { at: f64 },
    #[error("square root of negative value {value} at {at}")]
    NegativeSqrt { at: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Sqrt,
    Exp,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn eval(&self, x: f64) -> Result<f64, DomainError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Unary(op, a) => {
                let a = a.eval(x)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sqrt => {
                        if a < 0.0 {
                            return Err(DomainError::NegativeSqrt { at: x, value: a });
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(x)?;
                let b = b.eval(x)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(DomainError::DivisionByZero { at: x });
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, n) => {
                let a = a.eval(x)?;
                if *n < 0 && a == 0.0 {
                    return Err(DomainError::DivisionByZero { at: x });
                }
                a.powi(*n)
            }
        })
    }

    /// Value and first derivative by forward-mode dual numbers.
    pub fn eval_dual(&self, x: f64) -> Result<(f64, f64), DomainError> {
        Ok(match self {
            Expr::Const(c) => (*c, 0.0),
            Expr::Var => (x, 1.0),
            Expr::Unary(op, a) => {
                let (a, da) = a.eval_dual(x)?;
                match op {
                    UnaryOp::Neg => (-a, -da),
                    UnaryOp::Sin => (a.sin(), a.cos() * da),
                    UnaryOp::Cos => (a.cos(), -a.sin() * da),
                    UnaryOp::Exp => {
                        let e = a.exp();
                        (e, e * da)
                    }
                    UnaryOp::Sqrt => {
                        if a <= 0.0 {
                            return Err(DomainError::NegativeSqrt { at: x, value: a });
                        }
                        let r = a.sqrt();
                        (r, da / (2.0 * r))
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, da) = a.eval_dual(x)?;
                let (b, db) = b.eval_dual(x)?;
                match op {
                    BinaryOp::Add => (a + b, da + db),
                    BinaryOp::Sub => (a - b, da - db),
                    BinaryOp::Mul => (a * b, da * b + a * db),
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(DomainError::DivisionByZero { at: x });
                        }
                        (a / b, (da * b - a * db) / (b * b))
                    }
                }
            }
            Expr::Pow(a, n) => {
                let (a, da) = a.eval_dual(x)?;
                match *n {
                    0 => (1.0, 0.0),
                    n => {
                        if n < 0 && a == 0.0 {
                            return Err(DomainError::DivisionByZero { at: x });
                        }
                        (a.powi(n), f64::from(n) * a.powi(n - 1) * da)
                    }
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, var: &str) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c == std::f64::consts::PI {
                    write!(f, "pi")
                } else if *c < 0.0 {
                    write!(f, "-{:?}", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var => write!(f, "{var}"),
            Expr::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                a.write_wrapped(f, var, a.precedence() < 3)
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                a.write(f, var)?;
                write!(f, ")")
            }
            Expr::Binary(op, a, b) => {
                let p = self.precedence();
                a.write_wrapped(f, var, a.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                // left-associative: the right operand needs parentheses at equal precedence
                b.write_wrapped(f, var, b.precedence() <= p)
            }
            Expr::Pow(a, n) => {
                a.write_wrapped(f, var, a.precedence() <= 4)?;
                write!(f, "^{n}")
            }
        }
    }

    fn write_wrapped(&self, f: &mut fmt::Formatter<'_>, var: &str, paren: bool) -> fmt::Result {
        if paren {
            write!(f, "(")?;
            self.write(f, var)?;
            write!(f, ")")
        } else {
            self.write(f, var)
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

/// A smooth function of one real variable, given by an expression tree.
#[derive(Debug, Clone)]
pub struct SmoothFn {
    root: Expr,
    source: String,
    var: String,
}

impl SmoothFn {
    pub fn from_expr(root: Expr, var: &str) -> Self {
        let mut f = SmoothFn {
            root,
            source: String::new(),
            var: var.to_string(),
        };
        f.source = f.to_string();
        f
    }

    pub fn constant(c: f64) -> Self {
        SmoothFn::from_expr(Expr::Const(c), "s")
    }

    pub fn identity() -> Self {
        SmoothFn::from_expr(Expr::Var, "s")
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// The text this function was parsed from.
    pub fn source_text(&self) -> &str {
        &self.source
    }

    pub fn variable(&self) -> &str {
        &self.var
    }

    pub fn eval(&self, x: f64) -> Result<f64, DomainError> {
        self.root.eval(x)
    }

    pub fn eval_dual(&self, x: f64) -> Result<(f64, f64), DomainError> {
        self.root.eval_dual(x)
    }

    /// Structural equality of the trees, ignoring source text.
    pub fn same_tree(&self, other: &SmoothFn) -> bool {
        self.root == other.root
    }

    fn binary(op: BinaryOp, a: &SmoothFn, b: &SmoothFn) -> SmoothFn {
        SmoothFn::from_expr(
            Expr::Binary(op, Box::new(a.root.clone()), Box::new(b.root.clone())),
            &a.var,
        )
    }

    pub fn add(&self, other: &SmoothFn) -> SmoothFn {
        SmoothFn::binary(BinaryOp::Add, self, other)
    }

    pub fn sub(&self, other: &SmoothFn) -> SmoothFn {
        SmoothFn::binary(BinaryOp::Sub, self, other)
    }

    pub fn mul(&self, other: &SmoothFn) -> SmoothFn {
        SmoothFn::binary(BinaryOp::Mul, self, other)
    }

    pub fn div(&self, other: &SmoothFn) -> SmoothFn {
        SmoothFn::binary(BinaryOp::Div, self, other)
    }
}

impl fmt::Display for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f, &self.var)
    }
}

impl PartialEq for SmoothFn {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.var == other.var
    }
}

impl Serialize for SmoothFn {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for SmoothFn {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expr(&text).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for SmoothFn {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

/// Parses an expression in the variable `s`.
pub fn parse_expr(text: &str) -> Result<SmoothFn, ParseError> {
    parse_expr_in(text, "s")
}

/// Parses an expression in a caller-chosen variable name.
pub fn parse_expr_in(text: &str, var: &str) -> Result<SmoothFn, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        var,
    };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(SmoothFn {
        root,
        source: text.trim().to_string(),
        var: var.to_string(),
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let start = {
            self.skip_ws();
            self.pos
        };
        let negative = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return match self.src.get(self.pos) {
                None => Err(self.syntax("expected integer exponent")),
                Some(_) => Err(ParseError::NonIntegerExponent { offset: start }),
            };
        }
        if matches!(self.src.get(self.pos), Some(b'.' | b'e' | b'E')) {
            return Err(ParseError::NonIntegerExponent { offset: start });
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).expect("ascii digits");
        let n: i32 = text
            .parse()
            .map_err(|_| ParseError::NonIntegerExponent { offset: start })?;
        Ok(Expr::Pow(Box::new(base), if negative { -n } else { n }))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.syntax("malformed exponent in number"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if name == self.var {
            return Ok(Expr::Var);
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        let op = match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "sqrt" => UnaryOp::Sqrt,
            "exp" => UnaryOp::Exp,
            _ => {
                return Err(ParseError::UnknownIdentifier {
                    name: name.to_string(),
                    offset: start,
                })
            }
        };
        self.expect(b'(')?;
        let arg = self.expr()?;
        self.expect(b')')?;
        Ok(Expr::Unary(op, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_profile() {
        let f = parse_expr("1 - s*cos(s) + sin(s)").unwrap();
        for &s in &[-0.7, 0.0, 0.3, 1.1] {
            let expected = 1.0 - s * f64::cos(s) + f64::sin(s);
            assert!((f.eval(s).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_is_variable_node() {
        let f = parse_expr("s").unwrap();
        assert_eq!(f.root(), &Expr::Var);
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        let err = parse_expr("sin(").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn unknown_identifier() {
        let err = parse_expr("s + tan(s)").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "tan".into(),
                offset: 4
            }
        );
    }

    #[test]
    fn non_integer_exponent() {
        assert!(matches!(
            parse_expr("s^2.5"),
            Err(ParseError::NonIntegerExponent { .. })
        ));
        assert!(matches!(
            parse_expr("s^s"),
            Err(ParseError::NonIntegerExponent { .. })
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_expr("-s^2 + 2*s - 3/s/2").unwrap();
        let s = 1.7;
        assert!((f.eval(s).unwrap() - (-(s * s) + 2.0 * s - 3.0 / s / 2.0)).abs() < 1e-14);
        let g = parse_expr("s - (s - 1) - 2^-2").unwrap();
        assert!((g.eval(5.0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn declared_variable() {
        let f = parse_expr_in("u^3 + 1", "u").unwrap();
        assert_eq!(f.eval(2.0).unwrap(), 9.0);
        assert!(matches!(
            parse_expr_in("s", "u"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn domain_errors() {
        let f = parse_expr("sqrt(s)").unwrap();
        assert!(matches!(f.eval(-1.0), Err(DomainError::NegativeSqrt { .. })));
        let g = parse_expr("1/s").unwrap();
        assert!(matches!(g.eval(0.0), Err(DomainError::DivisionByZero { .. })));
    }

    #[test]
    fn dual_matches_difference_quotient() {
        let f = parse_expr("exp(sin(s))*sqrt(2 + s^2)/(3 - cos(s))").unwrap();
        let x = 0.4;
        let (v, d) = f.eval_dual(x).unwrap();
        let e = 1e-6;
        let fd = (f.eval(x + e).unwrap() - f.eval(x - e).unwrap()) / (2.0 * e);
        assert!((v - f.eval(x).unwrap()).abs() < 1e-15);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn printing_round_trips() {
        for text in [
            "(-s^2+2)*cos(s) + 2*s*sin(s) - 1",
            "-(s - 1)^3",
            "1/(2/s)",
            "s - (s + 1)",
            "2^-3 * pi",
            "1.5e-3*s",
        ] {
            let a = parse_expr(text).unwrap();
            let b = parse_expr(&a.to_string()).unwrap();
            assert!(a.same_tree(&b), "{text} -> {a}");
        }
    }
}
