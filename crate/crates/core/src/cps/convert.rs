//! Direct-style Scheme subset to CPS.
//!
//! Supported forms: top-level `define` (procedure and value forms, bound
//! sequentially), `lambda`, application, variables, integer and boolean
//! literals, `if` and `begin`. Lambda bodies may hold several expressions.
//! User λ-terms become procedures with an extra continuation parameter;
//! every λ-term the transform introduces is a continuation.

use super::parse::{parse_cps, parse_literal, CpsParseError};
use super::syntax::{CpsProgram, Literal};
use crate::sexp::{read_all, Pos, ReadError, Sexp};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConvertError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ReadError),
    #[error("{pos}: unsupported form `{form}`")]
    Unsupported { form: String, pos: Pos },
    #[error("{pos}: {message}")]
    Malformed { message: String, pos: Pos },
    #[error("converted program is ill-formed: {0}")]
    Cps(#[from] CpsParseError),
}

#[derive(Clone, Debug)]
enum Expr {
    Var(String),
    Lit(Literal),
    Lambda(Vec<String>, Vec<Expr>),
    App(Box<Expr>, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Begin(Vec<Expr>),
}

enum Form {
    Define(String, Expr),
    Expr(Expr),
}

const KEYWORDS: &[&str] = &["define", "lambda", "λ", "if", "begin", "kappa", "halt"];

fn malformed(pos: Pos, message: impl Into<String>) -> ConvertError {
    ConvertError::Malformed { message: message.into(), pos }
}

fn check_name(s: &Sexp) -> Result<String, ConvertError> {
    let name = s.as_atom().ok_or_else(|| malformed(s.pos(), "expected a name"))?;
    if KEYWORDS.contains(&name) || name.starts_with('%') || name.starts_with('#') || parse_literal(name).is_some() {
        return Err(malformed(s.pos(), format!("`{name}` cannot be used as a name")));
    }
    Ok(name.to_string())
}

fn expr(s: &Sexp) -> Result<Expr, ConvertError> {
    match s {
        Sexp::Atom(a, pos) => {
            if let Some(lit) = parse_literal(a) {
                return Ok(Expr::Lit(lit));
            }
            if KEYWORDS.contains(&a.as_str()) || a.starts_with('#') || a.starts_with('%') {
                return Err(ConvertError::Unsupported { form: a.clone(), pos: *pos });
            }
            Ok(Expr::Var(a.clone()))
        }
        Sexp::List(items, pos) => {
            let Some(head) = items.first() else {
                return Err(malformed(*pos, "empty application"));
            };
            match head.as_atom() {
                Some("lambda" | "λ") => {
                    if items.len() < 3 {
                        return Err(malformed(*pos, "lambda needs parameters and a body"));
                    }
                    let params = items[1]
                        .as_list()
                        .ok_or_else(|| malformed(items[1].pos(), "expected parameter list"))?
                        .iter()
                        .map(check_name)
                        .collect::<Result<Vec<_>, _>>()?;
                    let body = items[2..].iter().map(expr).collect::<Result<Vec<_>, _>>()?;
                    Ok(Expr::Lambda(params, body))
                }
                Some("if") => {
                    if items.len() != 4 {
                        return Err(malformed(*pos, "if needs a test and two branches"));
                    }
                    Ok(Expr::If(Box::new(expr(&items[1])?), Box::new(expr(&items[2])?), Box::new(expr(&items[3])?)))
                }
                Some("begin") => {
                    if items.len() < 2 {
                        return Err(malformed(*pos, "empty begin"));
                    }
                    Ok(Expr::Begin(items[1..].iter().map(expr).collect::<Result<_, _>>()?))
                }
                Some(kw @ ("define" | "kappa" | "halt")) => {
                    Err(ConvertError::Unsupported { form: kw.to_string(), pos: *pos })
                }
                Some(other) if other.starts_with('%') => {
                    Err(ConvertError::Unsupported { form: other.to_string(), pos: *pos })
                }
                _ => {
                    let f = expr(head)?;
                    let args = items[1..].iter().map(expr).collect::<Result<_, _>>()?;
                    Ok(Expr::App(Box::new(f), args))
                }
            }
        }
    }
}

fn form(s: &Sexp) -> Result<Form, ConvertError> {
    if let Sexp::List(items, pos) = s {
        if items.first().and_then(Sexp::as_atom) == Some("define") {
            if items.len() < 3 {
                return Err(malformed(*pos, "define needs a name and a value"));
            }
            return match &items[1] {
                Sexp::List(sig, spos) => {
                    let (name, params) = sig.split_first().ok_or_else(|| malformed(*spos, "empty signature"))?;
                    let name = check_name(name)?;
                    let params = params.iter().map(check_name).collect::<Result<_, _>>()?;
                    let body = items[2..].iter().map(expr).collect::<Result<_, _>>()?;
                    Ok(Form::Define(name, Expr::Lambda(params, body)))
                }
                atom => {
                    if items.len() != 3 {
                        return Err(malformed(*pos, "value define takes exactly one expression"));
                    }
                    Ok(Form::Define(check_name(atom)?, expr(&items[2])?))
                }
            };
        }
    }
    Ok(Form::Expr(expr(s)?))
}

/// A continuation in the output: either an atom (variable or `halt`) that may
/// be duplicated, or a `kappa` term that must be used once.
enum Cont {
    Atom(String),
    Kappa(String),
}

impl Cont {
    fn text(&self) -> &str {
        match self {
            Cont::Atom(s) | Cont::Kappa(s) => s,
        }
    }
}

#[derive(Default)]
struct Gensym(u32);

impl Gensym {
    fn fresh(&mut self, base: &str) -> String {
        self.0 += 1;
        format!("%{base}{}", self.0)
    }
}

impl Gensym {
    fn atom(&mut self, e: &Expr) -> Option<String> {
        match e {
            Expr::Var(v) => Some(v.clone()),
            Expr::Lit(l) => Some(l.to_string()),
            Expr::Lambda(params, body) => {
                let k = self.fresh("k");
                let mut out = String::from("(lambda (");
                for p in params {
                    out.push_str(p);
                    out.push(' ');
                }
                out.push_str(&k);
                out.push_str(") ");
                out.push_str(&self.body(body, Cont::Atom(k)));
                out.push(')');
                Some(out)
            }
            _ => None,
        }
    }

    fn body(&mut self, body: &[Expr], k: Cont) -> String {
        match body {
            [] => unreachable!("lambda bodies are non-empty"),
            [only] => self.cps(only, k),
            [first, rest @ ..] => {
                let u = self.fresh("_");
                let rest = self.body(rest, k);
                self.cps(first, Cont::Kappa(format!("(kappa ({u}) {rest})")))
            }
        }
    }

    fn cps(&mut self, e: &Expr, k: Cont) -> String {
        if let Some(a) = self.atom(e) {
            return format!("({} {a})", k.text());
        }
        match e {
            Expr::App(f, args) => {
                let parts: Vec<&Expr> = std::iter::once(&**f).chain(args.iter()).collect();
                self.app(&parts, Vec::new(), k)
            }
            Expr::Begin(body) => self.body(body, k),
            Expr::If(c, t, f) => {
                if let Some(test) = self.atom(c) {
                    self.branch(test, t, f, k)
                } else {
                    let v = self.fresh("v");
                    let inner = self.branch(v.clone(), t, f, k);
                    self.cps(c, Cont::Kappa(format!("(kappa ({v}) {inner})")))
                }
            }
            Expr::Var(_) | Expr::Lit(_) | Expr::Lambda(..) => unreachable!("handled as atoms"),
        }
    }

    fn branch(&mut self, test: String, t: &Expr, f: &Expr, k: Cont) -> String {
        match k {
            Cont::Atom(_) => {
                let then = self.cps(t, Cont::Atom(k.text().to_string()));
                let otherwise = self.cps(f, k);
                format!("(if {test} {then} {otherwise})")
            }
            Cont::Kappa(kappa) => {
                let j = self.fresh("j");
                let then = self.cps(t, Cont::Atom(j.clone()));
                let otherwise = self.cps(f, Cont::Atom(j.clone()));
                format!("((kappa ({j}) (if {test} {then} {otherwise})) {kappa})")
            }
        }
    }

    fn app(&mut self, parts: &[&Expr], mut done: Vec<String>, k: Cont) -> String {
        let Some((next, rest)) = parts.split_first() else {
            let mut out = String::from("(");
            out.push_str(&done.join(" "));
            out.push(' ');
            out.push_str(k.text());
            out.push(')');
            return out;
        };
        if let Some(a) = self.atom(next) {
            done.push(a);
            return self.app(rest, done, k);
        }
        let v = self.fresh("v");
        done.push(v.clone());
        let inner = self.app(rest, done, k);
        self.cps(next, Cont::Kappa(format!("(kappa ({v}) {inner})")))
    }

    fn program(&mut self, forms: &[Form]) -> String {
        match forms {
            [] => unreachable!("checked by caller"),
            [Form::Expr(e)] => self.cps(e, Cont::Atom("halt".into())),
            [Form::Define(name, e)] => self.cps(e, Cont::Kappa(format!("(kappa ({name}) (halt {name}))"))),
            [Form::Expr(e), rest @ ..] => {
                let u = self.fresh("_");
                let rest = self.program(rest);
                self.cps(e, Cont::Kappa(format!("(kappa ({u}) {rest})")))
            }
            [Form::Define(name, e), rest @ ..] => {
                let rest = self.program(rest);
                self.cps(e, Cont::Kappa(format!("(kappa ({name}) {rest})")))
            }
        }
    }
}

/// Converts a direct-style program to CPS concrete syntax.
pub fn cps_convert_to_text(direct_source: &str) -> Result<String, ConvertError> {
    let data = read_all(direct_source)?;
    if data.is_empty() {
        return Err(malformed(Pos { line: 1, col: 1 }, "empty program"));
    }
    let forms = data.iter().map(form).collect::<Result<Vec<_>, _>>()?;
    Ok(Gensym::default().program(&forms))
}

/// Converts a direct-style program to a labelled CPS program.
pub fn cps_convert(direct_source: &str) -> Result<CpsProgram, ConvertError> {
    let text = cps_convert_to_text(direct_source)?;
    Ok(parse_cps(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cps::syntax::{CallKind, Exp, LamKind};

    #[test]
    fn application_passes_halt() {
        let text = cps_convert_to_text("(define (f x) x) (f 3)").unwrap();
        assert_eq!(text, "((kappa (f) (f 3 halt)) (lambda (x %k1) (%k1 x)))");
        let p = parse_cps(&text).unwrap();
        let f = p.lambda_binding("x").unwrap();
        assert_eq!(p.lam(f).kind, LamKind::Procedure);
        assert_eq!(p.lam(p.lambda_binding("f").unwrap()).kind, LamKind::Continuation);
    }

    #[test]
    fn begin_threads_an_intervening_continuation() {
        let p = cps_convert(
            "(define (do-something) 1)
             (define (identity x) (begin (do-something) x))
             (identity 3)",
        )
        .unwrap();
        let id = p.lambda_binding("x").unwrap();
        let body = p.call(p.lam(id).body);
        let CallKind::App { operands, .. } = &body.kind else { panic!() };
        let Exp::Lam(kont) = operands.last().unwrap() else { panic!("expected a kappa") };
        let kont = p.lam(*kont);
        assert_eq!(kont.kind, LamKind::Continuation);
        let free: Vec<&str> = kont.free.iter().map(|v| p.var(*v).name.as_str()).collect();
        assert!(free.contains(&"x"), "{free:?}");
    }

    #[test]
    fn two_calls_share_one_lambda() {
        let p = cps_convert("(define (id x) x) (id 3) (id 4)").unwrap();
        let procs: Vec<_> = p.lambdas().filter(|l| l.kind == LamKind::Procedure).collect();
        assert_eq!(procs.len(), 1);
        let id_var = p.lambda_binding("id").map(|l| p.lam(l).params[0]).unwrap();
        let uses = p
            .calls()
            .filter(|c| matches!(&c.kind, CallKind::App { operator: Exp::Var(v), .. } if *v == id_var))
            .count();
        assert_eq!(uses, 2);
    }

    #[test]
    fn nested_arguments_and_if() {
        let text = cps_convert_to_text("(define (g a) a) (if (g #t) (g 1) 2)").unwrap();
        assert_eq!(text, "((kappa (g) (g #t (kappa (%v1) (if %v1 (g 1 halt) (halt 2))))) (lambda (a %k2) (%k2 a)))");
        let text = cps_convert_to_text("(define (g a) a) (g (if #t 1 2))").unwrap();
        assert!(text.contains("(kappa (%j"), "{text}");
        cps_convert("(define (g a) a) (g (if #t 1 2))").unwrap();
    }

    #[test]
    fn unsupported_forms_are_rejected() {
        assert!(matches!(cps_convert("(define (f) (define y 1) y) (f)"), Err(ConvertError::Unsupported { .. })));
        assert!(matches!(cps_convert("(kappa (x) x)"), Err(ConvertError::Unsupported { .. })));
        assert!(cps_convert("").is_err());
    }
}
