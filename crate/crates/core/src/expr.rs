//! Arithmetic expressions over `i`, `j` and `N` for family definitions.
//!
//! Grammar: numbers, the variables, `+ - * / ^` (with `^` right
//! associative), unary minus, parentheses and the functions `floor`, `ceil`,
//! `round`, `sqrt`, `log2`, `ln`, `abs`, `pow`, `min`, `max`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    I,
    J,
    N,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings {
    pub i: f64,
    pub j: f64,
    pub n: f64,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, b: Bindings) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::I) => b.i,
            Expr::Var(Var::J) => b.j,
            Expr::Var(Var::N) => b.n,
            Expr::Neg(e) => -e.eval(b),
            Expr::Bin(op, l, r) => {
                let (l, r) = (l.eval(b), r.eval(b));
                match op {
                    '+' => l + r,
                    '-' => l - r,
                    '*' => l * r,
                    '/' => l / r,
                    '^' => l.powf(r),
                    _ => unreachable!("parser only builds known operators"),
                }
            }
            Expr::Call(name, args) => {
                let a: Vec<f64> = args.iter().map(|e| e.eval(b)).collect();
                match (name.as_str(), a.as_slice()) {
                    ("floor", [x]) => x.floor(),
                    ("ceil", [x]) => x.ceil(),
                    ("round", [x]) => x.round(),
                    ("sqrt", [x]) => x.sqrt(),
                    ("log2", [x]) => x.log2(),
                    ("ln", [x]) => x.ln(),
                    ("abs", [x]) => x.abs(),
                    ("pow", [x, y]) => x.powf(*y),
                    ("min", [x, y]) => x.min(*y),
                    ("max", [x, y]) => x.max(*y),
                    _ => unreachable!("arity checked at parse time"),
                }
            }
        }
    }
}

fn arity(name: &str) -> Option<usize> {
    match name {
        "floor" | "ceil" | "round" | "sqrt" | "log2" | "ln" | "abs" => Some(1),
        "pow" | "min" | "max" => Some(2),
        _ => None,
    }
}

struct Parser<'s> {
    src: &'s [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit()
                        || self.src[self.pos] == b'.'
                        || self.src[self.pos] == b'e'
                        || (self.src[self.pos] == b'-' && self.src[self.pos - 1] == b'e'))
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                text.parse()
                    .map(Expr::Num)
                    .map_err(|_| ExprError {
                        pos: start,
                        msg: format!("bad number {text:?}"),
                    })
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                match name {
                    "i" => return Ok(Expr::Var(Var::I)),
                    "j" => return Ok(Expr::Var(Var::J)),
                    "N" => return Ok(Expr::Var(Var::N)),
                    _ => {}
                }
                let want = arity(name).ok_or(ExprError {
                    pos: start,
                    msg: format!("unknown name {name:?}"),
                })?;
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected `(` after function name"));
                }
                self.pos += 1;
                let mut args = vec![self.sum()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    args.push(self.sum()?);
                }
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                if args.len() != want {
                    return Err(ExprError {
                        pos: start,
                        msg: format!("{name} takes {want} argument(s), got {}", args.len()),
                    });
                }
                Ok(Expr::Call(name.to_string(), args))
            }
            _ => Err(self.err("expected a number, variable, function or `(`")),
        }
    }
}
