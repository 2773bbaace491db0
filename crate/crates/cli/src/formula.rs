//! Parser for linear state properties such as `x1 - 2*x3 <= 0.5 && (x2 > -1 || x4 < 1)`.
//!
//! Variables are `x1 … xn` (1-based). Each side of a comparison is a sum of
//! terms `c*xi`, `c xi`, `xi` or constants; `&&` binds tighter than `||`.

use reachdec::reach::{Atom, Comparison, Formula};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Cmp(Comparison),
    And,
    Or,
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, String> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let two = src.get(i..i + 2).unwrap_or("");
        let tok = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Token::Plus,
            '-' => Token::Minus,
            '*' => Token::Star,
            '(' => Token::Open,
            ')' => Token::Close,
            '&' if two == "&&" => {
                i += 1;
                Token::And
            }
            '|' if two == "||" => {
                i += 1;
                Token::Or
            }
            '<' | '>' => {
                let strict = two.as_bytes().get(1) != Some(&b'=');
                if !strict {
                    i += 1;
                }
                Token::Cmp(match (c, strict) {
                    ('<', true) => Comparison::Lt,
                    ('<', false) => Comparison::Le,
                    ('>', true) => Comparison::Gt,
                    _ => Comparison::Ge,
                })
            }
            'x' | 'X' => {
                let digits: String = src[i + 1..].chars().take_while(|d| d.is_ascii_digit()).collect();
                let index: usize = digits
                    .parse()
                    .map_err(|_| format!("column {}: expected a variable index after 'x'", start + 1))?;
                if index == 0 {
                    return Err(format!("column {}: variables are numbered from x1", start + 1));
                }
                i += digits.len();
                Token::Var(index - 1)
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() {
                    let b = bytes[j] as char;
                    let exp_sign = (b == '+' || b == '-') && j > i && matches!(bytes[j - 1], b'e' | b'E');
                    if b.is_ascii_digit() || b == '.' || b == 'e' || b == 'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let v: f64 = src[i..j]
                    .parse()
                    .map_err(|_| format!("column {}: malformed number {:?}", start + 1, &src[i..j]))?;
                i = j - 1;
                Token::Num(v)
            }
            _ => return Err(format!("column {}: unexpected character {c:?}", start + 1)),
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    dim: usize,
    len: usize,
}

/// Linear expression `Σ coeffs·x + constant`.
struct Linear {
    coeffs: Vec<f64>,
    constant: f64,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(c, _)| *c) + 1
    }

    fn error<T>(&self, what: &str) -> Result<T, String> {
        Err(format!("column {}: {what}", self.column()))
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn disjunction(&mut self) -> Result<Formula, String> {
        let mut parts = vec![self.conjunction()?];
        while self.eat(&Token::Or) {
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn conjunction(&mut self) -> Result<Formula, String> {
        let mut parts = vec![self.primary()?];
        while self.eat(&Token::And) {
            parts.push(self.primary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn primary(&mut self) -> Result<Formula, String> {
        if self.eat(&Token::Open) {
            let f = self.disjunction()?;
            if !self.eat(&Token::Close) {
                return self.error("expected ')'");
            }
            return Ok(f);
        }
        let lhs = self.linear()?;
        let cmp = match self.peek() {
            Some(Token::Cmp(c)) => *c,
            _ => return self.error("expected a comparison"),
        };
        self.pos += 1;
        let rhs = self.linear()?;
        let coeffs: Vec<f64> = lhs.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
        if coeffs.iter().all(|c| *c == 0.0) {
            return self.error("comparison does not involve any variable");
        }
        Ok(Formula::Atom(Atom::new(coeffs, cmp, rhs.constant - lhs.constant)))
    }

    fn linear(&mut self) -> Result<Linear, String> {
        let mut out = Linear {
            coeffs: vec![0.0; self.dim],
            constant: 0.0,
        };
        let mut sign = if self.eat(&Token::Minus) {
            -1.0
        } else {
            self.eat(&Token::Plus);
            1.0
        };
        loop {
            self.term(sign, &mut out)?;
            sign = if self.eat(&Token::Plus) {
                1.0
            } else if self.eat(&Token::Minus) {
                -1.0
            } else {
                return Ok(out);
            };
        }
    }

    fn term(&mut self, sign: f64, out: &mut Linear) -> Result<(), String> {
        let mut coeff = sign;
        let mut number = false;
        if let Some(Token::Num(v)) = self.peek() {
            coeff *= v;
            number = true;
            self.pos += 1;
            self.eat(&Token::Star);
        }
        match self.peek() {
            Some(Token::Var(i)) => {
                let i = *i;
                if i >= self.dim {
                    return self.error(&format!("x{} exceeds the state dimension {}", i + 1, self.dim));
                }
                self.pos += 1;
                out.coeffs[i] += coeff;
            }
            _ if number => out.constant += coeff,
            _ => return self.error("expected a number or a variable"),
        }
        Ok(())
    }
}

/// Parses a property over the state variables `x1 … x{dim}`.
pub fn parse_formula(src: &str, dim: usize) -> Result<Formula, String> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err("empty property".into());
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        dim,
        len: src.len(),
    };
    let f = p.disjunction()?;
    if p.pos != p.tokens.len() {
        return p.error("unexpected trailing input");
    }
    Ok(f)
}

/// Indices of the variables with a nonzero coefficient in some atom.
pub fn variables(f: &Formula) -> Vec<usize> {
    let mut vars: Vec<usize> = f
        .atoms()
        .iter()
        .flat_map(|a| a.coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, _)| i))
        .collect();
    vars.sort_unstable();
    vars.dedup();
    vars
}
