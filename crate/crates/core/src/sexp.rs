//! A small s-expression reader with source positions.

use std::fmt;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct ReadError {
    pub pos: Pos,
    pub message: String,
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { chars: src.chars().peekable(), pos: Pos { line: 1, col: 1 } }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn is_delim(c: char) -> bool {
        c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | ';')
    }

    fn atom(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if Self::is_delim(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn datum(&mut self) -> Result<Sexp, ReadError> {
        self.skip_trivia();
        let start = self.pos;
        match self.chars.peek().copied() {
            None => Err(ReadError { pos: start, message: "unexpected end of input".into() }),
            Some(open @ ('(' | '[')) => {
                self.bump();
                let close = if open == '(' { ')' } else { ']' };
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek().copied() {
                        None => return Err(ReadError { pos: start, message: "unclosed list".into() }),
                        Some(c) if c == close => {
                            self.bump();
                            break;
                        }
                        Some(')' | ']') => {
                            return Err(ReadError { pos: self.pos, message: "mismatched closing bracket".into() })
                        }
                        Some(_) => items.push(self.datum()?),
                    }
                }
                // `#N` immediately after a closing paren is a label annotation
                // emitted by the verbose printer; it carries no meaning on input.
                if self.chars.peek() == Some(&'#') {
                    let mut probe = self.chars.clone();
                    probe.next();
                    if probe.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                        while self.chars.peek().is_some_and(|c| c.is_ascii_digit()) {
                            self.bump();
                        }
                    }
                }
                Ok(Sexp::List(items, start))
            }
            Some(')' | ']') => Err(ReadError { pos: start, message: "unexpected closing bracket".into() }),
            Some(_) => Ok(Sexp::Atom(self.atom(), start)),
        }
    }
}

/// Reads every datum in `src`.
pub fn read_all(src: &str) -> Result<Vec<Sexp>, ReadError> {
    let mut r = Reader::new(src);
    let mut out = Vec::new();
    loop {
        r.skip_trivia();
        if r.chars.peek().is_none() {
            return Ok(out);
        }
        out.push(r.datum()?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let xs = read_all("(a (b c))\n ; comment\n [d]").unwrap();
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[1].pos(), Pos { line: 3, col: 2 });
        let inner = xs[0].as_list().unwrap();
        assert_eq!(inner[0].as_atom(), Some("a"));
        assert_eq!(inner[1].as_list().unwrap().len(), 2);
    }

    #[test]
    fn label_annotations_are_skipped() {
        let xs = read_all("((f x)#1 y)#0").unwrap();
        assert_eq!(xs.len(), 1);
        assert_eq!(xs[0].as_list().unwrap().len(), 2);
    }

    #[test]
    fn unbalanced_input_reports_position() {
        let err = read_all("(a\n (b)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
        let err = read_all("a)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 2 });
    }
}
