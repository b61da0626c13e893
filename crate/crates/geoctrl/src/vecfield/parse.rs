//! Parser for polynomial expressions like `x1*x2 + (1/2)*x1^2`.
//!
//! Grammar: rational literals (`3`, `1/2`), variable names from the chart,
//! `+`, `-`, `*`, `^` with nonnegative integer exponents, parentheses.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::poly::Polynomial;
use super::Chart;
use crate::error::{Error, Result};

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Name(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn next_token(&mut self) -> Result<Spanned> {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.bump();
        }
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(Spanned {
                tok: Tok::End,
                line,
                col,
            });
        };
        let tok = match c {
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'-' => {
                self.bump();
                Tok::Minus
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'^' => {
                self.bump();
                Tok::Caret
            }
            b'/' => {
                self.bump();
                Tok::Slash
            }
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'0'..=b'9' => {
                let mut digits = String::new();
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    digits.push(self.bump().unwrap() as char);
                }
                Tok::Num(digits.parse::<BigInt>().expect("digits"))
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut name = String::new();
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    name.push(self.bump().unwrap() as char);
                }
                Tok::Name(name)
            }
            other => {
                return Err(Error::Parse {
                    line,
                    col,
                    msg: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(Spanned { tok, line, col })
    }
}

struct Parser<'a> {
    chart: &'a Chart,
    lookahead: Spanned,
    lexer: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, chart: &'a Chart) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let lookahead = lexer.next_token()?;
        Ok(Parser {
            chart,
            lookahead,
            lexer,
        })
    }

    fn advance(&mut self) -> Result<Spanned> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.lookahead, next))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.lookahead.line,
            col: self.lookahead.col,
            msg: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = match self.lookahead.tok {
            Tok::Minus => {
                self.advance()?;
                self.term()?.neg()
            }
            _ => self.term()?,
        };
        loop {
            match self.lookahead.tok {
                Tok::Plus => {
                    self.advance()?;
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.advance()?;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.factor()?;
        while self.lookahead.tok == Tok::Star {
            self.advance()?;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial> {
        let base = self.primary()?;
        if self.lookahead.tok == Tok::Caret {
            self.advance()?;
            let sp = self.advance()?;
            let Tok::Num(e) = sp.tok else {
                return Err(Error::Parse {
                    line: sp.line,
                    col: sp.col,
                    msg: "expected integer exponent after `^`".into(),
                });
            };
            let e: u32 = e.try_into().map_err(|_| Error::Parse {
                line: sp.line,
                col: sp.col,
                msg: "exponent out of range".into(),
            })?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Polynomial> {
        let n = self.chart.dim();
        let sp = self.advance()?;
        match sp.tok {
            Tok::Num(numer) => {
                // Optional `/ denom` makes a rational literal.
                if self.lookahead.tok == Tok::Slash {
                    self.advance()?;
                    let dsp = self.advance()?;
                    let Tok::Num(denom) = dsp.tok else {
                        return Err(Error::Parse {
                            line: dsp.line,
                            col: dsp.col,
                            msg: "expected denominator after `/`".into(),
                        });
                    };
                    if denom == BigInt::from(0) {
                        return Err(Error::Parse {
                            line: dsp.line,
                            col: dsp.col,
                            msg: "zero denominator".into(),
                        });
                    }
                    Ok(Polynomial::constant(n, BigRational::new(numer, denom)))
                } else {
                    Ok(Polynomial::constant(n, BigRational::from_integer(numer)))
                }
            }
            Tok::Name(name) => match self.chart.index_of(&name) {
                Some(i) => Ok(Polynomial::var(n, i)),
                None => Err(Error::Parse {
                    line: sp.line,
                    col: sp.col,
                    msg: format!("unknown variable `{name}`"),
                }),
            },
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.advance()?;
                if close.tok != Tok::RParen {
                    return Err(Error::Parse {
                        line: close.line,
                        col: close.col,
                        msg: "expected `)`".into(),
                    });
                }
                Ok(inner)
            }
            Tok::Minus => Ok(self.factor()?.neg()),
            other => Err(Error::Parse {
                line: sp.line,
                col: sp.col,
                msg: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// Parse an expression string into a polynomial on the chart.
pub fn parse_polynomial(src: &str, chart: &Chart) -> Result<Polynomial> {
    let mut p = Parser::new(src, chart)?;
    let poly = p.expr()?;
    if p.lookahead.tok != Tok::End {
        return Err(p.err("trailing input"));
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_the_reference_expression() {
        let chart = Chart::standard(2);
        let p = parse_polynomial("x1*x2 + (1/2)*x1^2", &chart).unwrap();
        assert_eq!(p.eval_rational(&[q(1, 1), q(2, 1)]).unwrap(), q(5, 2));
    }

    #[test]
    fn parses_negatives_and_rationals() {
        let chart = Chart::standard(2);
        let p = parse_polynomial("-x1 + 3/4 - (-2)*x2", &chart).unwrap();
        assert_eq!(p.eval_rational(&[q(0, 1), q(0, 1)]).unwrap(), q(3, 4));
        assert_eq!(p.eval_rational(&[q(1, 1), q(1, 1)]).unwrap(), q(7, 4));
    }

    #[test]
    fn reports_error_position() {
        let chart = Chart::standard(2);
        let err = parse_polynomial("x1 + x9", &chart).unwrap_err();
        match err {
            Error::Parse { line, col, msg } => {
                assert_eq!(line, 1);
                assert_eq!(col, 6);
                assert!(msg.contains("x9"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_trailing_input() {
        let chart = Chart::standard(1);
        assert!(parse_polynomial("x1 )", &chart).is_err());
        assert!(parse_polynomial("x1 x1", &chart).is_err());
    }

    #[test]
    fn display_roundtrips_through_parser() {
        let chart = Chart::standard(3);
        let src = "(1/3)*x1^2*x3 - x2 + 5";
        let p = parse_polynomial(src, &chart).unwrap();
        let rendered = p.display_with(chart.names());
        let q2 = parse_polynomial(&rendered, &chart).unwrap();
        assert_eq!(p, q2);
    }
}
