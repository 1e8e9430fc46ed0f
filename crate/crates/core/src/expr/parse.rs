use super::{BinOp, Expr, Func, NamedConst};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    /// Byte offset into the source text.
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("exponent must be an integer literal")]
    NonIntegerExponent,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num { value: f64, integer: bool },
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek_byte(&self, offset: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + offset).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.peek_byte(0).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(b) = self.peek_byte(0) else {
            return Ok((Tok::End, start));
        };
        if b.is_ascii_digit() || (b == b'.' && self.peek_byte(1).is_some_and(|c| c.is_ascii_digit())) {
            return self.number(start);
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            while self
                .peek_byte(0)
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
            {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        if matches!(b, b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')') {
            self.pos += 1;
            return Ok((Tok::Sym(b as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError {
            position: start,
            kind: ParseErrorKind::Syntax(format!("unexpected character `{ch}`")),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let mut integer = true;
        while self.peek_byte(0).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek_byte(0) == Some(b'.') {
            integer = false;
            self.pos += 1;
            while self.peek_byte(0).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        // an exponent part only if digits follow, so `2e` stays `2 e`
        if matches!(self.peek_byte(0), Some(b'e' | b'E')) {
            let digit_at = match self.peek_byte(1) {
                Some(b'+' | b'-') => 2,
                _ => 1,
            };
            if self.peek_byte(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                integer = false;
                self.pos += digit_at;
                while self.peek_byte(0).is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| ParseError {
            position: start,
            kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
        })?;
        Ok((Tok::Num { value, integer }, start))
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    coords: &'a [String],
}

/// Parse `source` as an expression over the coordinates `coords`.
///
/// Coordinate names shadow the constants `pi` and `e`.
pub fn parse_expr(source: &str, coords: &[String]) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(source)?;
    let mut p = Parser {
        toks,
        at: 0,
        coords,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        tok => Err(p.syntax(format!("unexpected {}", describe(tok)))),
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num { value, .. } => format!("number {value}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".to_string(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn position(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, msg: String) -> ParseError {
        ParseError {
            position: self.position(),
            kind: ParseErrorKind::Syntax(msg),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{c}`, found {}", describe(self.peek()))))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while self.eat('^') {
            let k = self.integer_exponent()?;
            base = Expr::Pow(Box::new(base), k);
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let parenthesized = self.eat('(');
        let negative = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        let position = self.position();
        let k = match self.bump() {
            Tok::Num {
                value,
                integer: true,
            } if value <= i32::MAX as f64 => value as i32,
            _ => {
                return Err(ParseError {
                    position,
                    kind: ParseErrorKind::NonIntegerExponent,
                })
            }
        };
        if parenthesized {
            self.expect(')')?;
        }
        Ok(if negative { -k } else { k })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let position = self.position();
        match self.bump() {
            Tok::Num { value, .. } => Ok(Expr::Const(value)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(index) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::Var { index, name });
                }
                if let Some(k) = NamedConst::from_name(&name) {
                    return Ok(Expr::Named(k));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Err(ParseError {
                    position,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                })
            }
            tok => Err(ParseError {
                position,
                kind: ParseErrorKind::Syntax(format!("unexpected {}", describe(&tok))),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn reports_unknown_identifier_with_position() {
        let err = parse_expr("x + zz", &c(&["x"])).unwrap_err();
        assert_eq!(err.position, 4);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("zz".into()));
    }

    #[test]
    fn rejects_fractional_exponent() {
        let err = parse_expr("x^2.5", &c(&["x"])).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonIntegerExponent);
        assert_eq!(err.position, 2);
        let err = parse_expr("x^y", &c(&["x", "y"])).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonIntegerExponent);
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "1 +", "(x", "x)", "sin x", "2 $ 3", "x y"] {
            let err = parse_expr(bad, &c(&["x"])).unwrap_err();
            assert!(matches!(err.kind, ParseErrorKind::Syntax(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn exponents_and_constants() {
        let coords = c(&["x"]);
        let e = parse_expr("x^-2 + x^(-1) + 2e-1 + e + pi", &coords).unwrap();
        let v = e.eval(&[2.0]).unwrap();
        let expect = 0.25 + 0.5 + 0.2 + std::f64::consts::E + std::f64::consts::PI;
        assert!((v - expect).abs() < 1e-15);
        // `2e` is two times Euler's number
        let e = parse_expr("2e", &coords);
        assert!(e.is_err(), "juxtaposition is not multiplication");
    }

    #[test]
    fn coordinates_shadow_constants() {
        let e = parse_expr("e", &c(&["e"])).unwrap();
        assert!(matches!(e, Expr::Var { index: 0, .. }));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_expr("-x^2", &c(&["x"])).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
    }
}
