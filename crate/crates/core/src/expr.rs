//! A small expression language for custom densities, kernels and weights.
//!
//! ```text
//! expr   = or ;
//! or     = and , { "||" , and } ;
//! and    = cmp , { "&&" , cmp } ;
//! cmp    = sum , [ ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) , sum ] ;
//! sum    = term , { ( "+" | "-" ) , term } ;
//! term   = unary , { ( "*" | "/" ) , unary } ;
//! unary  = "-" , unary | power ;
//! power  = atom , [ "^" , unary ] ;
//! atom   = number | var | "pi" | call | "(" , expr , ")" ;
//! var    = "s" | "s1" | "s2" | "s3" | "s4" | "u" | "x" ;
//! call   = ( "exp" | "log" | "abs" | "sqrt" | "ind" ) , "(" , expr , ")"
//!        | ( "pow" | "min" | "max" ) , "(" , expr , "," , expr , ")" ;
//! ```
//!
//! Comparisons evaluate to 1 or 0; `ind(c)` is 1 when `c` is nonzero.
//! `s` and `s1` both name the first coordinate of a point of the parameter
//! space; `s2`..`s4` are the remaining coordinates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Coordinate `k` (zero based) of the parameter point.
    S(usize),
    U,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
    Ind,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Parsed expression, cheap to clone and share across threads.
#[derive(Clone)]
pub struct Expr {
    source: Arc<str>,
    root: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            src,
        };
        let root = p.or()?;
        if p.pos != tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: src.into(),
            root: Arc::new(root),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn uses(&self, var: Var) -> bool {
        fn walk(n: &Node, v: Var) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(w) => *w == v,
                Node::Neg(a) => walk(a, v),
                Node::Bin(_, a, b) => walk(a, v) || walk(b, v),
                Node::Call(_, args) => args.iter().any(|a| walk(a, v)),
            }
        }
        walk(&self.root, var)
    }

    pub fn eval(&self, s: f64, u: f64, x: f64) -> f64 {
        eval(&self.root, &[s], u, x)
    }

    /// Evaluation at a multi-dimensional parameter point; missing
    /// coordinates read as zero.
    pub fn eval_nd(&self, s: &[f64], u: f64, x: f64) -> f64 {
        eval(&self.root, s, u, x)
    }

    /// Largest parameter coordinate index referenced, plus one.
    pub fn s_dim(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Num(_) => 0,
                Node::Var(Var::S(k)) => k + 1,
                Node::Var(_) => 0,
                Node::Neg(a) => walk(a),
                Node::Bin(_, a, b) => walk(a).max(walk(b)),
                Node::Call(_, args) => args.iter().map(walk).max().unwrap_or(0),
            }
        }
        walk(&self.root)
    }
}

fn truth(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

fn eval(n: &Node, s: &[f64], u: f64, x: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::S(k)) => s.get(*k).copied().unwrap_or(0.0),
        Node::Var(Var::U) => u,
        Node::Var(Var::X) => x,
        Node::Neg(a) => -eval(a, s, u, x),
        Node::Bin(op, a, b) => {
            let l = eval(a, s, u, x);
            let r = eval(b, s, u, x);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::Pow => l.powf(r),
                BinOp::Lt => truth(l < r),
                BinOp::Le => truth(l <= r),
                BinOp::Gt => truth(l > r),
                BinOp::Ge => truth(l >= r),
                BinOp::Eq => truth(l == r),
                BinOp::Ne => truth(l != r),
                BinOp::And => truth(l != 0.0 && r != 0.0),
                BinOp::Or => truth(l != 0.0 || r != 0.0),
            }
        }
        Node::Call(func, args) => {
            let a = eval(&args[0], s, u, x);
            match func {
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Abs => a.abs(),
                Func::Sqrt => a.sqrt(),
                Func::Ind => truth(a != 0.0),
                Func::Pow => a.powf(eval(&args[1], s, u, x)),
                Func::Min => a.min(eval(&args[1], s, u, x)),
                Func::Max => a.max(eval(&args[1], s, u, x)),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    const OPS: [&str; 15] = [
        "<=", ">=", "==", "!=", "&&", "||", "<", ">", "+", "-", "*", "/", "^", "(", ")",
    ];
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| {
                Error::ConfigParse(format!("bad number {text:?} at column {}", start + 1))
            })?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        if c == ',' {
            out.push((Tok::Comma, i));
            i += 1;
            continue;
        }
        let rest = &src[i..];
        let Some(op) = OPS.iter().find(|op| rest.starts_with(**op)) else {
            return Err(Error::ConfigParse(format!(
                "unexpected character {c:?} at column {} in {src:?}",
                i + 1
            )));
        };
        let tok = match *op {
            "(" => Tok::LParen,
            ")" => Tok::RParen,
            other => Tok::Op(other),
        };
        out.push((tok, i));
        i += op.len();
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(Tok, usize)],
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let col = self
            .tokens
            .get(self.pos)
            .map(|t| t.1 + 1)
            .unwrap_or(self.src.len() + 1);
        Error::ConfigParse(format!("{msg} at column {col} in {:?}", self.src))
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.tokens.get(self.pos) {
            Some((Tok::Op(op), _)) => Some(op),
            _ => None,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        match self.tokens.get(self.pos) {
            Some((t, _)) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&format!("expected {what}"))),
        }
    }

    fn or(&mut self) -> Result<Node> {
        let mut lhs = self.and()?;
        while self.peek_op() == Some("||") {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Node::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Node> {
        let mut lhs = self.cmp()?;
        while self.peek_op() == Some("&&") {
            self.pos += 1;
            let rhs = self.cmp()?;
            lhs = Node::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Node> {
        let lhs = self.sum()?;
        let op = match self.peek_op() {
            Some("<") => BinOp::Lt,
            Some("<=") => BinOp::Le,
            Some(">") => BinOp::Gt,
            Some(">=") => BinOp::Ge,
            Some("==") => BinOp::Eq,
            Some("!=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_op() {
                Some("+") => BinOp::Add,
                Some("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_op() {
                Some("*") => BinOp::Mul,
                Some("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek_op() == Some("-") {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some("^") {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.or()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "s" | "s1" => Ok(Node::Var(Var::S(0))),
                "s2" => Ok(Node::Var(Var::S(1))),
                "s3" => Ok(Node::Var(Var::S(2))),
                "s4" => Ok(Node::Var(Var::S(3))),
                "u" => Ok(Node::Var(Var::U)),
                "x" => Ok(Node::Var(Var::X)),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                _ => {
                    let (func, arity) = match name.as_str() {
                        "exp" => (Func::Exp, 1),
                        "log" => (Func::Log, 1),
                        "abs" => (Func::Abs, 1),
                        "sqrt" => (Func::Sqrt, 1),
                        "ind" => (Func::Ind, 1),
                        "pow" => (Func::Pow, 2),
                        "min" => (Func::Min, 2),
                        "max" => (Func::Max, 2),
                        _ => {
                            self.pos -= 1;
                            return Err(self.error(&format!("unknown identifier {name:?}")));
                        }
                    };
                    self.expect(Tok::LParen, "'(' after function name")?;
                    let mut args = vec![self.or()?];
                    while arity > args.len() {
                        self.expect(Tok::Comma, "','")?;
                        args.push(self.or()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Node::Call(func, args))
                }
            },
            _ => {
                self.pos -= 1;
                Err(self.error("unexpected token"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2 * 3 ^ 2 - -4 / 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 1.0 + 18.0 + 2.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 512.0);
    }

    #[test]
    fn kernel_expression() {
        let e = Expr::parse("exp(-(u-s))*ind(s<=u)").unwrap();
        assert!((e.eval(0.0, 1.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(e.eval(2.0, 1.0, 0.0), 0.0);
        assert!(e.uses(Var::U) && e.uses(Var::S(0)) && !e.uses(Var::X));
    }

    #[test]
    fn indicator_conjunction() {
        let e = Expr::parse("ind(x > 0 && x <= 1) * pow(x, -0.5)").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.25), 2.0);
        assert_eq!(e.eval(0.0, 0.0, 1.5), 0.0);
        let e = Expr::parse("1.5e-1 * abs(x) + log(exp(2))").unwrap();
        assert!((e.eval(0.0, 0.0, -2.0) - 2.3).abs() < 1e-14);
    }

    #[test]
    fn multi_dimensional_parameter() {
        let e = Expr::parse("s1 + 10*s2 + 100*s4").unwrap();
        assert_eq!(e.eval_nd(&[1.0, 2.0, 3.0, 4.0], 0.0, 0.0), 421.0);
        assert_eq!(e.eval(1.0, 0.0, 0.0), 1.0);
        assert_eq!(e.s_dim(), 4);
    }

    #[test]
    fn errors_carry_position() {
        let err = Expr::parse("exp(x").unwrap_err();
        assert!(matches!(err, Error::ConfigParse(ref m) if m.contains("column")), "{err}");
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("x $ 2").is_err());
    }
}
