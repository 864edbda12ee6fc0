//! Small arithmetic expression language for custom densities.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! cmp   := sum (('<' | '<=' | '>' | '>=') sum)?
//! sum   := prod (('+' | '-') prod)*
//! prod  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' cmp (',' cmp)* ')' | '(' cmp ')'
//! ```
//!
//! Functions: `exp log sqrt abs pow(a, b) indicator(c)`. Comparisons yield
//! 1 or 0. Identifiers resolve against a variable list fixed at compile time,
//! plus the constants `pi` and `e`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("expression error at column {column}: {message}")]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
    Indicator,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A compiled expression over a fixed list of variable slots.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ExprError { column: col, message: format!("bad number {text:?}") })?;
            out.push((Tok::Num(v), col));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op: &'static str = match two.as_str() {
            "<=" => "<=",
            ">=" => ">=",
            "**" => "^",
            _ => match c {
                '+' => "+",
                '-' | '\u{2212}' => "-",
                '*' | '\u{00d7}' => "*",
                '/' | '\u{00f7}' => "/",
                '^' => "^",
                '<' => "<",
                '>' => ">",
                '(' => "(",
                ')' => ")",
                ',' => ",",
                _ => return Err(ExprError { column: col, message: format!("unexpected character {c:?}") }),
            },
        };
        i += if matches!(two.as_str(), "<=" | ">=" | "**") { 2 } else { 1 };
        out.push((Tok::Op(op), col));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
    consts: &'a BTreeMap<String, f64>,
    end: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        let column = self.toks.get(self.pos).map_or(self.end, |t| t.1);
        Err(ExprError { column, message: message.into() })
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(o), _)) => Some(o),
            _ => None,
        }
    }

    fn eat(&mut self, op: &str) -> bool {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn cmp(&mut self) -> Result<Node, ExprError> {
        let lhs = self.sum()?;
        let op = match self.peek_op() {
            Some("<") => BinOp::Lt,
            Some("<=") => BinOp::Le,
            Some(">") => BinOp::Gt,
            Some(">=") => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.prod()?;
        loop {
            let op = match self.peek_op() {
                Some("+") => BinOp::Add,
                Some("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.prod()?));
        }
    }

    fn prod(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_op() {
                Some("*") => BinOp::Mul,
                Some("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat("-") {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat("^") {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op("(") => {
                let inner = self.cmp()?;
                if !self.eat(")") {
                    return self.err("expected ')'");
                }
                Ok(inner)
            }
            Tok::Op(o) => {
                self.pos -= 1;
                self.err(format!("unexpected {o:?}"))
            }
            Tok::Ident(name) => {
                if self.eat("(") {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        "pow" => Func::Pow,
                        "indicator" => Func::Indicator,
                        _ => {
                            self.pos -= 2;
                            return self.err(format!("unknown function {name:?}"));
                        }
                    };
                    let mut args = vec![self.cmp()?];
                    while self.eat(",") {
                        args.push(self.cmp()?);
                    }
                    if !self.eat(")") {
                        return self.err("expected ')' after arguments");
                    }
                    let want = if func == Func::Pow { 2 } else { 1 };
                    if args.len() != want {
                        return self.err(format!("{name} takes {want} argument(s), got {}", args.len()));
                    }
                    return Ok(Node::Call(func, args));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                if let Some(v) = self.consts.get(&name) {
                    return Ok(Node::Num(*v));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => {
                        self.pos -= 1;
                        self.err(format!("unknown identifier {name:?}"))
                    }
                }
            }
        }
    }
}

impl Expr {
    /// Compiles `src`; `vars` become evaluation slots, `consts` are folded in.
    pub fn compile(src: &str, vars: &[&str], consts: &BTreeMap<String, f64>) -> Result<Expr, ExprError> {
        let toks = tokenize(src)?;
        let end = src.chars().count() + 1;
        let mut p = Parser { toks, pos: 0, vars, consts, end };
        let root = p.cmp()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(Expr { source: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, slots: &[f64]) -> f64 {
        eval(&self.root, slots)
    }

    /// True when the expression does not read slot `i`.
    pub fn ignores(&self, i: usize) -> bool {
        !reads(&self.root, i)
    }
}

fn reads(n: &Node, i: usize) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(j) => *j == i,
        Node::Neg(a) => reads(a, i),
        Node::Bin(_, a, b) => reads(a, i) || reads(b, i),
        Node::Call(_, args) => args.iter().any(|a| reads(a, i)),
    }
}

fn eval(n: &Node, s: &[f64]) -> f64 {
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => s[*i],
        Node::Neg(a) => -eval(a, s),
        Node::Bin(op, l, r) => {
            let x = eval(l, s);
            // a zero left factor annihilates, so `indicator(..) * f` is safe off its domain
            if matches!(op, BinOp::Mul) && x == 0.0 {
                return 0.0;
            }
            let y = eval(r, s);
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => x.powf(y),
                BinOp::Lt => b(x < y),
                BinOp::Le => b(x <= y),
                BinOp::Gt => b(x > y),
                BinOp::Ge => b(x >= y),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], s);
            match f {
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Pow => a.powf(eval(&args[1], s)),
                Func::Indicator => b(a != 0.0 && !a.is_nan()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compile(src: &str) -> Expr {
        let mut consts = BTreeMap::new();
        consts.insert("b".to_string(), 2.0);
        Expr::compile(src, &["x", "theta"], &consts).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(compile("1 + 2 * 3").eval(&[0.0, 0.0]), 7.0);
        assert_eq!(compile("2 ^ 3 ^ 2").eval(&[0.0, 0.0]), 512.0);
        assert_eq!(compile("-2 ^ 2").eval(&[0.0, 0.0]), -4.0);
        assert_eq!(compile("8 / 2 / 2").eval(&[0.0, 0.0]), 2.0);
        assert_eq!(compile("1.5e1 - x").eval(&[5.0, 0.0]), 10.0);
    }

    #[test]
    fn functions_constants_and_indicator() {
        let e = compile("exp(-abs(x - theta) / b) / (2 * b)");
        assert!((e.eval(&[1.0, 1.0]) - 0.25).abs() < 1e-15);
        assert_eq!(compile("indicator(x >= 0) * sqrt(x)").eval(&[-1.0, 0.0]), 0.0);
        assert_eq!(compile("indicator(x >= 0) * sqrt(x)").eval(&[4.0, 0.0]), 2.0);
        assert!((compile("pow(e, log(3))").eval(&[0.0, 0.0]) - 3.0).abs() < 1e-14);
        assert!((compile("pi").eval(&[0.0, 0.0]) - std::f64::consts::PI).abs() < 1e-16);
    }

    #[test]
    fn unicode_operators() {
        assert_eq!(compile("4 \u{2212} 1 \u{00d7} 2").eval(&[0.0, 0.0]), 2.0);
    }

    #[test]
    fn errors_carry_columns() {
        let consts = BTreeMap::new();
        let err = Expr::compile("x + y", &["x"], &consts).unwrap_err();
        assert_eq!(err.column, 5);
        assert!(Expr::compile("(x", &["x"], &consts).is_err());
        assert!(Expr::compile("sin(x)", &["x"], &consts).is_err());
        assert!(Expr::compile("x x", &["x"], &consts).is_err());
        assert!(Expr::compile("pow(x)", &["x"], &consts).is_err());
    }

    #[test]
    fn slot_usage() {
        let e = compile("x * 2");
        assert!(e.ignores(1));
        assert!(!e.ignores(0));
    }
}
