use num_rational::Rational64;

use super::{Expr, Func, Number, SymbolTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Number),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    /// 1-based column of the first character.
    col: usize,
}

fn syntax(col: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line: 1, column: col, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Token>> {
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
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, col });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_float = false;
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let num = if is_float {
                Number::Float(lit.parse::<f64>().map_err(|_| syntax(col, format!("bad number `{lit}`")))?)
            } else {
                match lit.parse::<i64>() {
                    Ok(v) => Number::Rational(Rational64::from_integer(v)),
                    Err(_) => {
                        Number::Float(lit.parse::<f64>().map_err(|_| syntax(col, format!("bad number `{lit}`")))?)
                    }
                }
            };
            out.push(Token { tok: Tok::Num(num), col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), col });
            continue;
        }
        return Err(syntax(col, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::End, col: chars.len() + 1 });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    symbols: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            Err(syntax(t.col, format!("expected {what}")))
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut items = vec![self.term()?];
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    items.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    items.push(Expr::Neg(Box::new(self.term()?)));
                }
                _ => break,
            }
        }
        Ok(Expr::sum(items))
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        let mut run: Vec<Expr> = Vec::new();
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    if run.is_empty() {
                        run.push(acc.clone());
                    }
                    run.push(self.factor()?);
                    acc = Expr::Mul(run.clone());
                }
                Tok::Slash => {
                    self.bump();
                    let den = self.factor()?;
                    acc = Expr::Div(Box::new(acc), Box::new(den));
                    run.clear();
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    // factor := ['-'] atom ['^' integer]
    fn factor(&mut self) -> Result<Expr> {
        let negate = if self.peek().tok == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let neg_exp = if self.peek().tok == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            let t = self.bump();
            let k = match t.tok {
                Tok::Num(n) => n
                    .as_integer()
                    .and_then(|v| i32::try_from(v).ok())
                    .ok_or_else(|| syntax(t.col, "exponent must be an integer"))?,
                _ => return Err(syntax(t.col, "expected integer exponent")),
            };
            base = Expr::Pow(Box::new(base), if neg_exp { -k } else { k });
        }
        Ok(if negate { Expr::Neg(Box::new(base)) } else { base })
    }

    // atom := number | ident | ident '(' expr ')' | '(' expr ')'
    fn atom(&mut self) -> Result<Expr> {
        let t = self.bump();
        match t.tok {
            Tok::Num(n) => Ok(Expr::Const(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let func =
                        Func::from_name(&name).ok_or_else(|| syntax(t.col, format!("unknown function `{name}`")))?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Func(func, Box::new(arg)))
                } else if self.symbols.is_declared(&name) {
                    Ok(Expr::Var(name))
                } else {
                    Err(Error::Undeclared { name, line: 1, column: t.col })
                }
            }
            Tok::End => Err(syntax(t.col, "unexpected end of input")),
            _ => Err(syntax(t.col, "expected a number, identifier or `(`")),
        }
    }
}

/// Parses `text` against the declared `symbols`.
///
/// Positions in errors are 1-based columns on line 1; callers embedding
/// expressions in larger files remap them.
pub fn parse_expr(text: &str, symbols: &SymbolTable) -> Result<Expr> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, symbols };
    let e = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(syntax(t.col, "unexpected trailing input"));
    }
    Ok(e)
}
