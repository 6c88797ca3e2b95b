//! A small expression language for bivariate functions in configuration
//! files: `+ - * / ^`, `sin`, `cos`, `exp`, `pi`, `x`, `y`, numeric
//! literals, parentheses, and unary minus.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::BivFn;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number literal `{text}`")))?;
                tokens.push(Token::Num(value));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                tokens.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

#[derive(Debug, Clone)]
enum Ast {
    Num(f64),
    X,
    Y,
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Box<Ast>),
    Sin(Box<Ast>),
    Cos(Box<Ast>),
    Exp(Box<Ast>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Parse(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.next();
                    lhs = Ast::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.next();
                    lhs = Ast::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.next();
                    lhs = Ast::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.next();
                    lhs = Ast::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.next();
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.next();
            // right-associative; unary minus binds looser than `^`
            let exp = if matches!(self.peek(), Some(Token::Minus)) {
                self.next();
                Ast::Neg(Box::new(self.power()?))
            } else {
                self.power()?
            };
            return Ok(Ast::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Ast::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Ast::X),
                "y" => Ok(Ast::Y),
                "pi" => Ok(Ast::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" => {
                    self.expect(Token::LParen)?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Token::RParen)?;
                    Ok(match name.as_str() {
                        "sin" => Ast::Sin(arg),
                        "cos" => Ast::Cos(arg),
                        _ => Ast::Exp(arg),
                    })
                }
                other => Err(Error::Parse(format!("unknown identifier `{other}`"))),
            },
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

impl Ast {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Ast::Num(v) => *v,
            Ast::X => x,
            Ast::Y => y,
            Ast::Neg(a) => -a.eval(x, y),
            Ast::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Ast::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Ast::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Ast::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Ast::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
            Ast::Sin(a) => a.eval(x, y).sin(),
            Ast::Cos(a) => a.eval(x, y).cos(),
            Ast::Exp(a) => a.eval(x, y).exp(),
        }
    }
}

/// Parses an expression into a callable bivariate function.
pub fn parse_expression(src: &str) -> Result<BivFn> {
    let tokens = tokenize(src)?;
    let mut parser = Parser { tokens, pos: 0 };
    let ast = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(Error::Parse(format!(
            "trailing input at token {} of {}",
            parser.pos,
            parser.tokens.len()
        )));
    }
    Ok(Arc::new(move |x, y| ast.eval(x, y)))
}
