//! Parser for the functional grammar.
//!
//! ```text
//! expr   := "-"? term (("+" | "-") term)*
//! term   := factor ("*" factor)*
//! factor := atom ("^" nonneg-integer)?
//! atom   := number | ident | "E[" expr "]" | "inv(" expr ")"
//!         | "Var(" ident ")" | "Cov(" ident "," ident ")"
//!         | ("exp" | "log" | "sqrt") "(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers are base random variables and may only appear inside an
//! expectation. Numbers are decimal literals read exactly. `Var(X)` and
//! `Cov(X,Y)` expand to `E[X^2] - E[X]^2` and `E[X*Y] - E[X]*E[Y]`.

use num::{BigInt, BigRational, Zero};
use std::ops::Neg;
use thiserror::Error;

use crate::expr::{FuncExpr, RvExpr, SmoothFn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Parses a decimal literal (optional sign, digits, optional fraction) exactly.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = num::pow(BigInt::from(10), frac.len());
    let value = BigRational::new(digits, scale);
    Some(if neg { -value } else { value })
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '^' => Some(Tok::Caret),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            i += 1;
            col += 1;
            continue;
        }
        let begin = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let lit: String = chars[begin..i].iter().collect();
            let value = parse_decimal(&lit)
                .ok_or_else(|| err(start_line, start_col, format!("malformed number `{lit}`")))?;
            out.push(Token {
                tok: Tok::Num(value),
                line: start_line,
                column: start_col,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[begin..i].iter().collect()),
                line: start_line,
                column: start_col,
            });
        } else {
            return Err(err(
                start_line,
                start_col,
                format!("unexpected character `{c}`"),
            ));
        }
        col += i - begin;
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

/// Untyped syntax tree; lowered to a functional or a random variable
/// depending on context.
#[derive(Debug, Clone)]
enum Ast {
    Num(BigRational),
    Ident(String, usize, usize),
    Expect(Box<Ast>),
    Inv(Box<Ast>),
    Smooth(SmoothFn, Box<Ast>),
    Variance(String),
    Covariance(String, String),
    Sum(Vec<(bool, Ast)>),
    Product(Vec<Ast>),
    Pow(Box<Ast>, u32),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(err(
                t.line,
                t.column,
                format!("expected {what}, found {}", describe(&t.tok)),
            ))
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut terms = Vec::new();
        let mut negative = false;
        if self.peek().tok == Tok::Minus {
            self.next();
            negative = true;
        }
        terms.push((negative, self.term()?));
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    terms.push((false, self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    terms.push((true, self.term()?));
                }
                _ => break,
            }
        }
        if terms.len() == 1 && !terms[0].0 {
            return Ok(terms.pop().unwrap().1);
        }
        Ok(Ast::Sum(terms))
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut factors = vec![self.factor()?];
        while self.peek().tok == Tok::Star {
            self.next();
            factors.push(self.factor()?);
        }
        if factors.len() == 1 {
            return Ok(factors.pop().unwrap());
        }
        Ok(Ast::Product(factors))
    }

    fn factor(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.next();
        let t = self.next();
        let k = match &t.tok {
            Tok::Num(n) if n.is_integer() => u32::try_from(n.to_integer())
                .map_err(|_| err(t.line, t.column, "exponent too large"))?,
            other => {
                return Err(err(
                    t.line,
                    t.column,
                    format!(
                        "expected a nonnegative integer exponent, found {}",
                        describe(other)
                    ),
                ))
            }
        };
        Ok(Ast::Pow(Box::new(base), k))
    }

    fn ident_arg(&mut self) -> Result<String, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(name) => Ok(name),
            other => Err(err(
                t.line,
                t.column,
                format!("expected a variable name, found {}", describe(&other)),
            )),
        }
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(n) => Ok(Ast::Num(n)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => match self.peek().tok {
                Tok::LBracket if name == "E" => {
                    self.next();
                    let inner = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Ast::Expect(Box::new(inner)))
                }
                Tok::LParen => {
                    self.next();
                    let node = match name.as_str() {
                        "inv" => Ast::Inv(Box::new(self.expr()?)),
                        "Var" => Ast::Variance(self.ident_arg()?),
                        "Cov" => {
                            let a = self.ident_arg()?;
                            self.expect(Tok::Comma, "`,`")?;
                            let b = self.ident_arg()?;
                            Ast::Covariance(a, b)
                        }
                        other => match SmoothFn::from_name(other) {
                            Some(g) => Ast::Smooth(g, Box::new(self.expr()?)),
                            None => {
                                return Err(err(
                                    t.line,
                                    t.column,
                                    format!("unknown function `{other}`"),
                                ))
                            }
                        },
                    };
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(node)
                }
                _ => Ok(Ast::Ident(name, t.line, t.column)),
            },
            other => Err(err(
                t.line,
                t.column,
                format!("expected an operand, found {}", describe(&other)),
            )),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number `{n}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Caret => "`^`".into(),
        Tok::Comma => "`,`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::End => "end of input".into(),
    }
}

fn parse_ast(text: &str) -> Result<Ast, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let ast = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(err(
            t.line,
            t.column,
            format!("unexpected {} after expression", describe(&t.tok)),
        ));
    }
    Ok(ast)
}

fn lower_func(ast: &Ast) -> Result<FuncExpr, ParseError> {
    Ok(match ast {
        Ast::Num(n) => FuncExpr::Const(n.clone()),
        Ast::Ident(name, line, column) => {
            return Err(err(
                *line,
                *column,
                format!("random variable `{name}` used outside an expectation"),
            ))
        }
        Ast::Expect(inner) => FuncExpr::moment(lower_rv(inner)?),
        Ast::Inv(inner) => FuncExpr::recip(lower_func(inner)?),
        Ast::Smooth(g, inner) => FuncExpr::smooth(*g, lower_func(inner)?),
        Ast::Variance(x) => FuncExpr::variance(x),
        Ast::Covariance(x, y) => FuncExpr::covariance(x, y),
        Ast::Sum(terms) => FuncExpr::sum(
            terms
                .iter()
                .map(|(neg, t)| lower_func(t).map(|f| if *neg { f.neg() } else { f }))
                .collect::<Result<_, _>>()?,
        ),
        Ast::Product(fs) => FuncExpr::product(fs.iter().map(lower_func).collect::<Result<_, _>>()?),
        Ast::Pow(b, k) => FuncExpr::pow(lower_func(b)?, *k),
    })
}

fn lower_rv(ast: &Ast) -> Result<RvExpr, ParseError> {
    Ok(match ast {
        Ast::Num(n) => RvExpr::Const(n.clone()),
        Ast::Ident(name, ..) => RvExpr::var(name.clone()),
        Ast::Expect(_) | Ast::Inv(_) | Ast::Smooth(..) | Ast::Variance(_) | Ast::Covariance(..) => {
            RvExpr::embed_distributed(lower_func(ast)?)
        }
        Ast::Sum(terms) => RvExpr::sum(
            terms
                .iter()
                .map(|(neg, t)| lower_rv(t).map(|e| if *neg { e.neg() } else { e }))
                .collect::<Result<_, _>>()?,
        ),
        Ast::Product(fs) => RvExpr::product(fs.iter().map(lower_rv).collect::<Result<_, _>>()?),
        Ast::Pow(b, k) => RvExpr::pow(lower_rv(b)?, *k),
    })
}

/// Parses a functional `ψ(P)`.
pub fn parse_expression(text: &str) -> Result<FuncExpr, ParseError> {
    lower_func(&parse_ast(text)?)
}

/// Parses a random-variable expression (identifiers allowed at top level).
pub fn parse_rv_expression(text: &str) -> Result<RvExpr, ParseError> {
    lower_rv(&parse_ast(text)?)
}

/// `inv(0)` style literals are accepted by the grammar; this reports
/// whether a parsed functional has a reciprocal of a literal zero.
pub fn has_literal_zero_reciprocal(psi: &FuncExpr) -> bool {
    psi.any(&|f| matches!(f, FuncExpr::Recip(b) if matches!(**b, FuncExpr::Const(ref c) if c.is_zero())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canonicalize_func;
    use crate::measure::ratio;

    #[test]
    fn covariance_text() {
        let psi = parse_expression("E[X*Y] - E[X]*E[Y]").unwrap();
        assert_eq!(psi, FuncExpr::covariance("X", "Y"));
        assert_eq!(parse_expression("Cov(X, Y)").unwrap(), psi);
    }

    #[test]
    fn mean_and_sugar() {
        assert_eq!(parse_expression("E[X]").unwrap(), FuncExpr::mean("X"));
        let sugar = parse_expression("Var(X)").unwrap();
        let text = parse_expression("E[X^2] - E[X]^2").unwrap();
        assert_eq!(
            canonicalize_func(&sugar).unwrap(),
            canonicalize_func(&text).unwrap()
        );
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_decimal("0.1").unwrap(), ratio(1, 10));
        assert_eq!(parse_decimal("-2.50").unwrap(), ratio(-5, 2));
        assert_eq!(parse_decimal(".5").unwrap(), ratio(1, 2));
        assert!(parse_decimal("1.2.3").is_none());
        assert!(parse_decimal("").is_none());
        assert_eq!(
            parse_expression("0.3").unwrap(),
            FuncExpr::Const(ratio(3, 10))
        );
        assert_eq!(
            parse_expression("inv(3)").unwrap(),
            FuncExpr::Const(ratio(1, 3))
        );
    }

    #[test]
    fn nested_expectations_are_scalars() {
        let psi = parse_expression("E[(X - E[X])^2]").unwrap();
        let FuncExpr::Moment(inner) = &psi else {
            panic!("expected a moment, got {psi:?}");
        };
        assert!(inner.to_string().contains("E[X]"));
        assert!(parse_expression("E[E[X]]").is_ok());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expression("E[X] +").unwrap_err();
        assert_eq!((e.line, e.column), (1, 7));
        let e = parse_expression("foo(X)").unwrap_err();
        assert!(e.message.contains("unknown function"), "{e}");
        let e = parse_expression("X + 1").unwrap_err();
        assert!(e.message.contains("outside an expectation"), "{e}");
        let e = parse_expression("E[X]\n  ^ Y").unwrap_err();
        assert_eq!((e.line, e.column), (2, 5));
        assert!(parse_expression("E[X] $").is_err());
        assert!(parse_expression("E[X]^1.5").is_err());
    }

    #[test]
    fn unary_minus_and_powers() {
        let psi = parse_expression("-E[X]^2 + 1").unwrap();
        assert_eq!(psi.to_string(), "-E[X]^2 + 1");
        assert_eq!(parse_expression("E[X]^0").unwrap(), FuncExpr::one());
    }

    #[test]
    fn smooth_names() {
        let psi = parse_expression("log(E[X])").unwrap();
        assert!(psi.has_smooth());
        assert!(has_literal_zero_reciprocal(
            &parse_expression("inv(0)").unwrap()
        ));
    }
}
