//! Recursive-descent parser for operator bodies.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := unary ("^" uint)?
//! unary  := "-" unary | atom
//! atom   := number | "i" | coord | jetvar | func "(" expr ")" | "(" expr ")"
//! coord  := "x" "[" uint "]" ("." uint)?
//! jetvar := "u" "[" uint ("," uint)* "]" "(" midx (";" midx)* ")"
//! midx   := "(" uint ("," uint)* ")"
//! ```

use thiserror::Error;

use super::ast::{BinOp, Expr, Func, JetVar};
use crate::jetcore::MultiIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown function `{name}` at {line}:{column}")]
    UnknownFunction { line: usize, column: usize, name: String },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Number { text: String, value: f64 },
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number { text, .. } => format!("number `{text}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::End => "end of input".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut k = 0;
    while k < chars.len() {
        let ch = chars[k];
        let (l0, c0) = (line, column);
        if ch == '\n' {
            line += 1;
            column = 1;
            k += 1;
            continue;
        }
        if ch.is_whitespace() {
            column += 1;
            k += 1;
            continue;
        }
        let start = k;
        let tok = if ch.is_ascii_digit() {
            while k < chars.len() && chars[k].is_ascii_digit() {
                k += 1;
            }
            if k + 1 < chars.len() && chars[k] == '.' && chars[k + 1].is_ascii_digit() {
                k += 1;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
            }
            if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                let mut j = k + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    k = j;
                }
            }
            let text: String = chars[start..k].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: l0,
                column: c0,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax { line: l0, column: c0, message: format!("number `{text}` overflows") });
            }
            Tok::Number { text, value }
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            Tok::Ident(chars[start..k].iter().collect())
        } else {
            k += 1;
            match ch {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                other => {
                    return Err(ParseError::Syntax {
                        line: l0,
                        column: c0,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        column += k - start;
        out.push(Spanned { tok, line: l0, column: c0 });
    }
    out.push(Spanned { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::Syntax { line: t.line, column: t.column, message: message.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn uint(&mut self) -> Result<u64, ParseError> {
        match self.peek().clone() {
            Tok::Number { text, .. } if text.bytes().all(|b| b.is_ascii_digit()) => {
                let v = text.parse().map_err(|_| self.error_here("integer too large"))?;
                self.bump();
                Ok(v)
            }
            other => Err(self.error_here(format!("expected unsigned integer, found {}", other.describe()))),
        }
    }

    fn small_uint<T: TryFrom<u64>>(&mut self) -> Result<T, ParseError> {
        let v = self.uint()?;
        T::try_from(v).map_err(|_| self.error_here("integer too large"))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.small_uint()?;
            return Ok(Expr::Pow { base: Box::new(base), exponent });
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let here = self.toks[self.pos].clone();
        match here.tok {
            Tok::Number { value, .. } => {
                self.bump();
                Ok(Expr::Number(value))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "i" => Ok(Expr::ImagUnit),
                    "x" => self.coord(),
                    "u" => self.jetvar(),
                    _ if *self.peek() == Tok::LParen => {
                        let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction {
                            line: here.line,
                            column: here.column,
                            name: name.clone(),
                        })?;
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::Call { func, arg: Box::new(arg) })
                    }
                    _ => Err(ParseError::Syntax {
                        line: here.line,
                        column: here.column,
                        message: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            other => Err(self.error_here(format!("expected an operand, found {}", other.describe()))),
        }
    }

    fn coord(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LBracket, "`[` after `x`")?;
        let particle = self.small_uint()?;
        self.expect(Tok::RBracket, "`]`")?;
        let component = if *self.peek() == Tok::Dot {
            self.bump();
            Some(self.small_uint()?)
        } else {
            None
        };
        Ok(Expr::Coord { particle, component })
    }

    fn jetvar(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LBracket, "`[` after `u`")?;
        let mut internal = vec![self.small_uint()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            internal.push(self.small_uint()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::LParen, "`(` opening the multi-index list")?;
        let mut derivs = vec![self.midx()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            derivs.push(self.midx()?);
        }
        self.expect(Tok::RParen, "`)` closing the multi-index list")?;
        Ok(Expr::Var(JetVar { internal, derivs }))
    }

    fn midx(&mut self) -> Result<MultiIndex, ParseError> {
        self.expect(Tok::LParen, "`(` opening a multi-index")?;
        let mut entries = vec![self.small_uint()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            entries.push(self.small_uint()?);
        }
        self.expect(Tok::RParen, "`)` closing a multi-index")?;
        Ok(MultiIndex::new(entries))
    }
}

pub fn parse_operator(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error_here(format!("unexpected {} after expression", p.peek().describe())));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(internal: &[usize], derivs: &[&[u32]]) -> Expr {
        Expr::Var(JetVar {
            internal: internal.to_vec(),
            derivs: derivs.iter().map(|d| MultiIndex::new(d.to_vec())).collect(),
        })
    }

    #[test]
    fn single_jet_variable() {
        assert_eq!(parse_operator("u[0]((2))").unwrap(), var(&[0], &[&[2]]));
        assert_eq!(parse_operator(" u[ 1 , 0 ]( (1,0) ; (0,2) ) ").unwrap(), var(&[1, 0], &[&[1, 0], &[0, 2]]));
    }

    #[test]
    fn cubic_nls_body() {
        let e = parse_operator("-u[0]((2)) + abs2(u[0]((0)))*u[0]((0))").unwrap();
        let want = Expr::binary(
            BinOp::Add,
            Expr::Neg(Box::new(var(&[0], &[&[2]]))),
            Expr::binary(
                BinOp::Mul,
                Expr::Call { func: Func::Abs2, arg: Box::new(var(&[0], &[&[0]])) },
                var(&[0], &[&[0]]),
            ),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn unbalanced_parenthesis() {
        match parse_operator("u[0]((1)") {
            Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 9)),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_and_identifier() {
        assert!(matches!(parse_operator("1 + sin(u[0]((0)))"), Err(ParseError::UnknownFunction { column: 5, .. })));
        assert!(matches!(parse_operator("y"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn error_positions_track_lines() {
        match parse_operator("u[0]((0))\n  + * 2") {
            Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn numbers_and_precedence() {
        assert_eq!(parse_operator("2.5e-3").unwrap(), Expr::Number(2.5e-3));
        assert_eq!(parse_operator("1E2").unwrap(), Expr::Number(100.0));
        assert!(parse_operator("1e999").is_err());
        // unary minus binds tighter than ^
        let e = parse_operator("-x[0]^2").unwrap();
        assert!(matches!(e, Expr::Pow { ref base, exponent: 2 } if matches!(**base, Expr::Neg(_))));
        let e = parse_operator("1 - 2 - 3").unwrap();
        match e {
            Expr::Binary { op: BinOp::Sub, lhs, .. } => assert!(matches!(*lhs, Expr::Binary { op: BinOp::Sub, .. })),
            other => panic!("{other:?}"),
        }
        assert!(parse_operator("2^2^2").is_err());
        assert!(parse_operator("2^1.5").is_err());
    }

    #[test]
    fn coordinates() {
        assert_eq!(parse_operator("x[1].0").unwrap(), Expr::Coord { particle: 1, component: Some(0) });
        assert_eq!(parse_operator("x[0]").unwrap(), Expr::Coord { particle: 0, component: None });
    }
}
