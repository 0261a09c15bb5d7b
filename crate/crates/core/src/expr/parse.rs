//! Recursive-descent parser for the expression grammar.
//!
//! Precedence: `^` > unary minus > `*` `/` > `+` `-`, left-associative.
//! Exponents must be (optionally signed) integer literals in [-8, 8], so
//! chained `^` is rejected rather than associated. Implicit multiplication
//! is inserted for a number followed by an identifier or `(`, and for
//! `)` followed by `(`. The unicode operators `−`, `×`, `÷` are accepted
//! as aliases.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Expr, ExprError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ExprError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' => {
                out.push(Spanned { tok: Tok::Plus, pos });
                i += 1;
            }
            '-' | '−' => {
                out.push(Spanned { tok: Tok::Minus, pos });
                i += 1;
            }
            '*' | '×' => {
                out.push(Spanned { tok: Tok::Star, pos });
                i += 1;
            }
            '/' | '÷' => {
                out.push(Spanned { tok: Tok::Slash, pos });
                i += 1;
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, pos });
                i += 1;
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, pos });
                i += 1;
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, pos });
                i += 1;
            }
            c if c.is_ascii_digit() => {
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
                let mut frac_digits = 0usize;
                if i < chars.len()
                    && chars[i].1 == '.'
                    && i + 1 < chars.len()
                    && chars[i + 1].1.is_ascii_digit()
                {
                    i += 1;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                        frac_digits += 1;
                    }
                }
                let end = if i < chars.len() { chars[i].0 } else { text.len() };
                let slice = &text[pos..end];
                let digits: String = slice.chars().filter(|c| *c != '.').collect();
                let numer: BigInt = digits.parse().map_err(|_| ExprError::Syntax {
                    pos,
                    msg: format!("invalid number {slice:?}"),
                })?;
                let denom = BigInt::from(10u32).pow(frac_digits as u32);
                out.push(Spanned {
                    tok: Tok::Num(BigRational::new(numer, denom)),
                    pos,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start_pos = pos;
                let mut name = String::new();
                while i < chars.len()
                    && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_')
                {
                    name.push(chars[i].1);
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(name),
                    pos: start_pos,
                });
            }
            other => {
                return Err(ExprError::Syntax {
                    pos,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.idx)
    }

    fn advance(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn error_at(&self, msg: &str) -> ExprError {
        let pos = self.peek().map(|t| t.pos).unwrap_or(self.end);
        ExprError::Syntax {
            pos,
            msg: msg.to_string(),
        }
    }

    fn parse_sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_product()?;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Plus => {
                    self.advance();
                    let rhs = self.parse_product()?;
                    lhs = Expr::Add(vec![lhs, rhs]);
                }
                Tok::Minus => {
                    self.advance();
                    let rhs = self.parse_product()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let Some(t) = self.peek() else { break };
            match &t.tok {
                Tok::Star => {
                    self.advance();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(vec![lhs, rhs]);
                }
                Tok::Slash => {
                    self.advance();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                // implicit multiplication: 2x, 2(x+1), (a)(b)
                Tok::Ident(_) if lhs_tail_is_number(&lhs) => {
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(vec![lhs, rhs]);
                }
                Tok::LParen => {
                    let allowed = lhs_tail_is_number(&lhs) || lhs_ends_with_group(&lhs);
                    if !allowed {
                        break;
                    }
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(vec![lhs, rhs]);
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        if let Some(t) = self.peek() {
            if t.tok == Tok::Minus {
                self.advance();
                let operand = self.parse_unary()?;
                return Ok(Expr::Neg(Box::new(operand)));
            }
            if t.tok == Tok::Plus {
                self.advance();
                return self.parse_unary();
            }
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ExprError> {
        let base = self.parse_atom()?;
        if self.peek().map(|t| &t.tok) == Some(&Tok::Caret) {
            self.advance();
            let exp = self.parse_exponent_literal()?;
            if self.peek().map(|t| &t.tok) == Some(&Tok::Caret) {
                return Err(self.error_at("chained exponent requires a literal exponent"));
            }
            return Ok(Expr::Pow(Box::new(base), exp));
        }
        Ok(base)
    }

    fn parse_exponent_literal(&mut self) -> Result<i32, ExprError> {
        let mut negative = false;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Minus => {
                    negative = !negative;
                    self.advance();
                }
                Tok::Plus => {
                    self.advance();
                }
                _ => break,
            }
        }
        let Some(t) = self.advance() else {
            return Err(self.error_at("expected integer exponent"));
        };
        let Tok::Num(n) = t.tok else {
            return Err(ExprError::Syntax {
                pos: t.pos,
                msg: "exponent must be an integer literal".into(),
            });
        };
        if !n.is_integer() {
            return Err(ExprError::Syntax {
                pos: t.pos,
                msg: "exponent must be an integer literal".into(),
            });
        }
        let v = n.to_integer();
        let small: i32 = TryInto::<i32>::try_into(&v).map_err(|_| ExprError::Syntax {
            pos: t.pos,
            msg: "exponent out of range [-8, 8]".into(),
        })?;
        let signed = if negative { -small } else { small };
        if !(-8..=8).contains(&signed) {
            return Err(ExprError::Syntax {
                pos: t.pos,
                msg: "exponent out of range [-8, 8]".into(),
            });
        }
        Ok(signed)
    }

    fn parse_atom(&mut self) -> Result<Expr, ExprError> {
        let Some(t) = self.advance() else {
            return Err(self.error_at("unexpected end of input"));
        };
        match t.tok {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Ident(name) => Ok(Expr::Var(name)),
            Tok::LParen => {
                let inner = self.parse_sum()?;
                match self.advance() {
                    Some(Spanned {
                        tok: Tok::RParen, ..
                    }) => Ok(inner),
                    _ => Err(ExprError::Syntax {
                        pos: t.pos,
                        msg: "unclosed parenthesis".into(),
                    }),
                }
            }
            other => Err(ExprError::Syntax {
                pos: t.pos,
                msg: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// True when the most recently parsed operand ends in a bare number,
/// making `2x` / `2(...)` an implicit product.
fn lhs_tail_is_number(lhs: &Expr) -> bool {
    match lhs {
        Expr::Num(_) => true,
        Expr::Mul(xs) => xs.last().map(lhs_tail_is_number).unwrap_or(false),
        _ => false,
    }
}

/// True when the operand was a parenthesized group or ends in one, making
/// `(a)(b)` an implicit product.
fn lhs_ends_with_group(lhs: &Expr) -> bool {
    match lhs {
        Expr::Add(_) | Expr::Sub(_, _) | Expr::Div(_, _) => true,
        Expr::Mul(xs) => xs.last().map(lhs_ends_with_group).unwrap_or(false),
        _ => false,
    }
}

/// Parse a textual expression.
pub fn parse_expr(text: &str) -> Result<Expr, ExprError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(ExprError::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        toks,
        idx: 0,
        end: text.len(),
    };
    let expr = parser.parse_sum()?;
    if parser.idx != parser.toks.len() {
        return Err(parser.error_at("trailing input"));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_grouping() {
        let e = parse_expr("2*(3+4)").unwrap();
        assert_eq!(
            e,
            Expr::Mul(vec![
                Expr::int(2),
                Expr::Add(vec![Expr::int(3), Expr::int(4)])
            ])
        );
    }

    #[test]
    fn implicit_multiplication() {
        let e = parse_expr("2x+1").unwrap();
        assert_eq!(
            e,
            Expr::Add(vec![
                Expr::Mul(vec![Expr::int(2), Expr::var("x")]),
                Expr::int(1)
            ])
        );
        assert!(parse_expr("2(x+1)").is_ok());
        assert!(parse_expr("(x+1)(x-1)").is_ok());
        // identifier adjacency is not multiplication
        assert!(parse_expr("area is l").is_err());
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_expr("-2^2").unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::int(2)), 2))));
    }

    #[test]
    fn signed_exponents_parse_as_literals() {
        assert_eq!(
            parse_expr("x^-2").unwrap(),
            Expr::Pow(Box::new(Expr::var("x")), -2)
        );
        assert!(parse_expr("x^9").is_err());
        assert!(parse_expr("x^y").is_err());
        assert!(parse_expr("x^2^2").is_err());
    }

    #[test]
    fn division_by_zero_parses() {
        assert!(parse_expr("1/0").is_ok());
    }

    #[test]
    fn errors_carry_byte_positions() {
        match parse_expr("2*(3+4") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_expr("2 @ 3") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unicode_operator_aliases() {
        assert_eq!(parse_expr("6÷3").unwrap(), parse_expr("6/3").unwrap());
        assert_eq!(parse_expr("2×x").unwrap(), parse_expr("2*x").unwrap());
        assert_eq!(parse_expr("5−1").unwrap(), parse_expr("5-1").unwrap());
    }

    #[test]
    fn decimals_are_exact_rationals() {
        let e = parse_expr("0.25").unwrap();
        assert_eq!(
            e,
            Expr::Num(BigRational::new(BigInt::from(25), BigInt::from(100)))
        );
    }
}
