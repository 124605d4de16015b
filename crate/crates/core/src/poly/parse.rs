//! Parser for the polynomial text grammar:
//!
//! ```text
//! poly    ::= ['+'|'-'] term (('+'|'-') term)*
//! term    ::= factor ('*' factor)*
//! factor  ::= rational | decimal | 'sqrt(' uint ')' | ident ('^' uint)?
//! ```
//!
//! Whitespace is insignificant and `−` (U+2212) is accepted as a minus sign.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Monomial, MultiPoly, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based column of the offending character within the parsed text.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Number(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' | '−' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, col));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '/') {
                i += 1;
            }
            out.push((Tok::Number(chars[start..i].iter().collect()), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            return Err(ParseError {
                column: col,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            column: self.col(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn uint(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Some(Tok::Number(s)) if s.chars().all(|c| c.is_ascii_digit()) => {
                let v = s.parse::<u64>();
                match v {
                    Ok(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    Err(_) => self.err("integer out of range"),
                }
            }
            _ => self.err("expected unsigned integer"),
        }
    }

    fn poly(&mut self) -> Result<MultiPoly, ParseError> {
        let n = self.names.len();
        let mut acc = MultiPoly::zero(n);
        let mut first = true;
        loop {
            let negative = match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    false
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    true
                }
                _ if first => false,
                None => break,
                _ => return self.err("expected '+' or '-'"),
            };
            let col = self.col();
            let term = self.term()?;
            let term = if negative { -term } else { term };
            acc = acc.try_add(&term).map_err(|e| ParseError {
                column: col,
                message: e.to_string(),
            })?;
            first = false;
            if self.peek().is_none() {
                break;
            }
        }
        if first {
            return self.err("empty polynomial");
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<MultiPoly, ParseError> {
        let n = self.names.len();
        let mut coef = Scalar::one();
        let mut exps = vec![0u32; n];
        loop {
            let col = self.col();
            match self.peek().cloned() {
                Some(Tok::Number(s)) => {
                    self.pos += 1;
                    let r = Scalar::parse_rational(&s).ok_or(ParseError {
                        column: col,
                        message: format!("invalid number '{s}'"),
                    })?;
                    coef = coef * Scalar::from_rational(r);
                }
                Some(Tok::Ident(name)) if name == "sqrt" => {
                    self.pos += 1;
                    self.expect(Tok::LParen, "'(' after sqrt")?;
                    let radicand = self.uint()?;
                    self.expect(Tok::RParen, "')'")?;
                    let s = Scalar::surd(
                        BigRational::from_integer(BigInt::from(0)),
                        BigRational::from_integer(BigInt::from(1)),
                        radicand,
                    );
                    coef = coef.try_mul(&s).map_err(|e| ParseError {
                        column: col,
                        message: e.to_string(),
                    })?;
                }
                Some(Tok::Ident(name)) => {
                    self.pos += 1;
                    let Some(index) = self.names.iter().position(|v| *v == name) else {
                        return Err(ParseError {
                            column: col,
                            message: format!("unknown variable '{name}'"),
                        });
                    };
                    let mut power = 1u32;
                    if self.peek() == Some(&Tok::Caret) {
                        self.pos += 1;
                        let e = self.uint()?;
                        power = u32::try_from(e).map_err(|_| ParseError {
                            column: col,
                            message: "exponent out of range".into(),
                        })?;
                    }
                    exps[index] += power;
                }
                _ => return self.err("expected number, sqrt(..) or variable"),
            }
            if self.peek() == Some(&Tok::Star) {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(MultiPoly::from_terms(n, [(Monomial::new(exps), coef)]))
    }
}

/// Parses `text` as a polynomial in the variables `names` (in order).
pub fn parse_poly(text: &str, names: &[String]) -> Result<MultiPoly, ParseError> {
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end_col: text.chars().count() + 1,
        names,
    };
    parser.poly()
}

/// Parses a constant expression such as `1/2`, `0.1` or `7/10*sqrt(2)`.
pub fn parse_scalar(text: &str) -> Result<Scalar, ParseError> {
    let p = parse_poly(text, &[])?;
    Ok(p.constant_term())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_terms_and_signs() {
        let vars = names(&["x", "y"]);
        let p = parse_poly(" - x^2*y + 3/4 * y − 0.5 ", &vars).unwrap();
        assert_eq!(p.num_terms(), 3);
        assert_eq!(p.constant_term(), Scalar::from_frac(-1, 2));
        assert_eq!(p.coeff(&Monomial::new(vec![2, 1])), Scalar::from_int(-1));
    }

    #[test]
    fn surd_coefficients() {
        let s = parse_scalar("0.7*sqrt(2)").unwrap();
        assert_eq!(&s * &s, Scalar::from_frac(49, 50));
        assert_eq!(parse_scalar("sqrt(98)").unwrap(), parse_scalar("7*sqrt(2)").unwrap());
    }

    #[test]
    fn reports_error_columns() {
        let vars = names(&["x"]);
        let e = parse_poly("x + q", &vars).unwrap_err();
        assert_eq!(e.column, 5);
        assert!(e.message.contains("unknown variable"));
        let e = parse_poly("x + ", &vars).unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_poly("x $ 1", &vars).unwrap_err();
        assert_eq!(e.column, 3);
        assert!(parse_poly("", &vars).is_err());
        assert!(parse_poly("sqrt(2)*x + sqrt(3)", &vars).is_err());
    }
}
