//! Arithmetic expressions accepted wherever a config expects a real number,
//! so priors can be written as `"logit(0.1)"` or `"(ln(8)/1.96)^2"`.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A number that remembers the expression it was written as.
#[derive(Debug, Clone, PartialEq)]
pub struct Num {
    value: f64,
    text: Option<String>,
}

impl Num {
    pub fn new(value: f64) -> Self {
        Num { value, text: None }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        Ok(Num { value: eval(text)?, text: Some(text.to_string()) })
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::new(v)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.text {
            Some(t) => s.serialize_str(t),
            None => s.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or an arithmetic expression string")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num::new(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num::new(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num::new(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                Num::parse(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Evaluate an expression over numbers, `+ - * / ^`, parentheses and the
/// functions `ln`, `exp`, `sqrt`, `logit`, `expit`.
pub fn eval(text: &str) -> Result<f64, String> {
    let mut p = Parser { s: text.as_bytes(), i: 0 };
    let v = p.expr()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(format!("unexpected input at offset {} in {text:?}", p.i));
    }
    if !v.is_finite() {
        return Err(format!("{text:?} does not evaluate to a finite number"));
    }
    Ok(v)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut v = self.term()?;
        loop {
            if self.eat(b'+') {
                v += self.term()?;
            } else if self.eat(b'-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            if self.eat(b'*') {
                v *= self.unary()?;
            } else if self.eat(b'/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, String> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(base.powf(self.unary()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.expr()?;
                if !self.eat(b')') {
                    return Err("missing ')'".into());
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.i;
                while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
                    self.i += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                if !self.eat(b'(') {
                    return Err(format!("expected '(' after {name}"));
                }
                let a = self.expr()?;
                if !self.eat(b')') {
                    return Err("missing ')'".into());
                }
                match name {
                    "ln" | "log" => Ok(a.ln()),
                    "exp" => Ok(a.exp()),
                    "sqrt" => Ok(a.sqrt()),
                    "logit" => Ok((a / (1.0 - a)).ln()),
                    "expit" => Ok(1.0 / (1.0 + (-a).exp())),
                    _ => Err(format!("unknown function {name}")),
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                    self.i += 1;
                }
                if self.i < self.s.len() && matches!(self.s[self.i], b'e' | b'E') {
                    let save = self.i;
                    self.i += 1;
                    if self.i < self.s.len() && matches!(self.s[self.i], b'+' | b'-') {
                        self.i += 1;
                    }
                    let digits = self.i;
                    while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                        self.i += 1;
                    }
                    if self.i == digits {
                        self.i = save;
                    }
                }
                let lit = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                lit.parse::<f64>().map_err(|_| format!("bad number {lit:?}"))
            }
            Some(c) => Err(format!("unexpected {:?}", c as char)),
            None => Err("unexpected end of expression".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functions_and_precedence() {
        assert_eq!(eval("1 + 2 * 3").unwrap(), 7.0);
        assert_eq!(eval("-2^2").unwrap(), -4.0);
        assert_eq!(eval("2^3^2").unwrap(), 512.0);
        assert!((eval("logit(0.1)").unwrap() - (0.1f64 / 0.9).ln()).abs() < 1e-15);
        assert!((eval("ln(13.5)").unwrap() - 13.5f64.ln()).abs() < 1e-15);
        let v = eval("(ln(8)/1.96)^2").unwrap();
        assert!((v - (8f64.ln() / 1.96).powi(2)).abs() < 1e-15);
        assert_eq!(eval("1e-3").unwrap(), 0.001);
        assert_eq!(eval("1/8").unwrap(), 0.125);
    }

    #[test]
    fn rejects_garbage() {
        assert!(eval("ln(").is_err());
        assert!(eval("foo(1)").is_err());
        assert!(eval("1 2").is_err());
        assert!(eval("ln(0)").is_err());
        assert!(eval("").is_err());
    }

    #[test]
    fn keeps_source_text() {
        let n: Num = serde_json::from_str("\"logit(0.5)\"").unwrap();
        assert_eq!(n.value(), 0.0);
        assert_eq!(serde_json::to_string(&n).unwrap(), "\"logit(0.5)\"");
        let n: Num = serde_json::from_str("3").unwrap();
        assert_eq!(n.value(), 3.0);
    }
}
