//! Field expressions: sums of products of constants and plane-wave factors.
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := number | ('cos' | 'sin') '(' int (',' int)* ')'
//! ```
//!
//! `cos(k1, k2)` stands for `cos(2π(k1·x1 + k2·x2))`; missing trailing modes
//! are zero. Example: `0.5*cos(1) + 0.2*sin(1,2)*cos(0,1) - 3`.

use std::f64::consts::PI;
use std::fmt;

use fracmfg::{PeriodicGrid, SpectralField};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset} in {source_text:?}")]
pub struct ExprError {
    pub message: String,
    pub offset: usize,
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Factor {
    Const(f64),
    Cos(Vec<i64>),
    Sin(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    /// Each term is a sign-carrying product of factors.
    terms: Vec<(f64, Vec<Factor>)>,
    text: String,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ExprError {
        ExprError {
            message: message.into(),
            offset: self.pos,
            source_text: self.src.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let mut end = 0;
        let bytes = rest.as_bytes();
        while end < bytes.len() {
            let c = bytes[end];
            let exp_sign = (c == b'+' || c == b'-') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                end += 1;
            } else {
                break;
            }
        }
        if end == 0 {
            return Err(self.err("expected a number, cos(...) or sin(...)"));
        }
        let value: f64 = rest[..end].parse().map_err(|_| self.err(format!("bad number {:?}", &rest[..end])))?;
        self.pos += end;
        Ok(value)
    }

    fn integer(&mut self) -> Result<i64, ExprError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let neg = rest.starts_with('-');
        let digits = rest[neg as usize..].bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(self.err("expected an integer mode"));
        }
        let len = neg as usize + digits;
        let v = rest[..len].parse().map_err(|_| self.err("mode out of range"))?;
        self.pos += len;
        Ok(v)
    }

    fn factor(&mut self) -> Result<Factor, ExprError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let wave = if rest.starts_with("cos") {
            Some(true)
        } else if rest.starts_with("sin") {
            Some(false)
        } else {
            None
        };
        let Some(is_cos) = wave else {
            return Ok(Factor::Const(self.number()?));
        };
        self.pos += 3;
        if !self.eat('(') {
            return Err(self.err("expected '('"));
        }
        let mut modes = vec![self.integer()?];
        while self.eat(',') {
            modes.push(self.integer()?);
        }
        if !self.eat(')') {
            return Err(self.err("expected ')'"));
        }
        Ok(if is_cos { Factor::Cos(modes) } else { Factor::Sin(modes) })
    }

    fn term(&mut self) -> Result<Vec<Factor>, ExprError> {
        let mut factors = vec![self.factor()?];
        while self.eat('*') {
            factors.push(self.factor()?);
        }
        Ok(factors)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: text, pos: 0 };
        let mut terms = Vec::new();
        let mut sign = if p.eat('-') { -1.0 } else { 1.0 };
        loop {
            terms.push((sign, p.term()?));
            if p.eat('+') {
                sign = 1.0;
            } else if p.eat('-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        if p.peek().is_some() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self {
            terms,
            text: text.to_string(),
        })
    }

    /// Largest number of modes given to any factor, i.e. the smallest
    /// dimension the expression makes sense in.
    pub fn min_dim(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|(_, fs)| fs)
            .map(|f| match f {
                Factor::Const(_) => 0,
                Factor::Cos(k) | Factor::Sin(k) => k.len(),
            })
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let phase = |k: &[i64]| 2.0 * PI * k.iter().zip(x).map(|(&ki, xi)| ki as f64 * xi).sum::<f64>();
        self.terms
            .iter()
            .map(|(sign, factors)| {
                sign * factors
                    .iter()
                    .map(|f| match f {
                        Factor::Const(c) => *c,
                        Factor::Cos(k) => phase(k).cos(),
                        Factor::Sin(k) => phase(k).sin(),
                    })
                    .product::<f64>()
            })
            .sum()
    }

    pub fn sample(&self, grid: &PeriodicGrid) -> SpectralField {
        SpectralField::from_fn(grid, |x| self.eval(x))
    }
}
