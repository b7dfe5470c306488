//! Tokenizer and precedence-climbing parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Param(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn references_variable(&self) -> bool {
        match self {
            Node::Var(_) => true,
            Node::Num(_) | Node::Param(_) => false,
            Node::Neg(inner) | Node::Call(_, inner) => inner.references_variable(),
            Node::Binary(_, l, r) => l.references_variable() || r.references_variable(),
        }
    }

    /// Fully parenthesized source text, parseable back to an equivalent tree.
    pub fn render(&self, variables: &[String], parameters: &[String]) -> String {
        match self {
            Node::Num(v) => {
                if *v < 0.0 {
                    format!("(-{:?})", -v)
                } else {
                    format!("{v:?}")
                }
            }
            Node::Var(i) => variables[*i].clone(),
            Node::Param(i) => parameters[*i].clone(),
            Node::Neg(inner) => format!("(-{})", inner.render(variables, parameters)),
            Node::Binary(op, l, r) => format!(
                "({} {} {})",
                l.render(variables, parameters),
                op.symbol(),
                r.render(variables, parameters)
            ),
            Node::Call(f, arg) => format!("{}({})", f.name(), arg.render(variables, parameters)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(name) => format!("identifier `{name}`"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal = &text[start..i];
            let value = literal.parse::<f64>().map_err(|_| Error::Syntax {
                position: start,
                message: format!("malformed number `{literal}`"),
            })?;
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        out.push((tok, start));
        i += c.len_utf8();
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

pub(crate) struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    variables: &'a [String],
    parameters: &'a [String],
}

impl<'a> Parser<'a> {
    pub(crate) fn parse(text: &str, variables: &'a [String], parameters: &'a [String]) -> Result<Node> {
        if text.trim().is_empty() {
            return Err(Error::Syntax {
                position: 0,
                message: "empty expression".into(),
            });
        }
        let mut parser = Parser {
            tokens: tokenize(text)?,
            pos: 0,
            variables,
            parameters,
        };
        let node = parser.expr()?;
        match parser.peek() {
            Tok::End => Ok(node),
            tok => Err(parser.unexpected(&tok.clone())),
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, tok: &Tok) -> Error {
        Error::Syntax {
            position: self.position(),
            message: format!("unexpected {}", describe(tok)),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if let Tok::Op('-') = self.peek() {
            self.advance();
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.advance();
            let exponent_pos = self.position();
            let exponent = self.unary()?;
            if exponent.references_variable() {
                return Err(Error::Syntax {
                    position: exponent_pos,
                    message: "exponent must be constant (no variables)".into(),
                });
            }
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let (tok, position) = self.advance();
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, position),
            other => Err(Error::Syntax {
                position,
                message: format!("unexpected {}", describe(&other)),
            }),
        }
    }

    fn identifier(&mut self, name: String, position: usize) -> Result<Node> {
        if let Some(i) = self.variables.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        if let Some(i) = self.parameters.iter().position(|p| *p == name) {
            return Ok(Node::Param(i));
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(Error::UnknownIdentifier { name, position });
        };
        if *self.peek() != Tok::LParen {
            return Err(Error::Syntax {
                position: self.position(),
                message: format!("expected '(' after function `{name}`"),
            });
        }
        self.advance();
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.expr()?);
            while *self.peek() == Tok::Comma {
                self.advance();
                args.push(self.expr()?);
            }
        }
        self.expect_rparen()?;
        if args.len() != 1 {
            return Err(Error::Arity {
                name,
                position,
                expected: 1,
                found: args.len(),
            });
        }
        Ok(Node::Call(func, Box::new(args.pop().unwrap())))
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Tok::RParen => {
                self.advance();
                Ok(())
            }
            tok => Err(self.unexpected(&tok.clone())),
        }
    }
}
