use std::collections::{BTreeSet, HashMap};

use super::syntax::*;
use crate::sexp::{read_all, Pos, ReadError, Sexp};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CpsParseError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ReadError),
    #[error("{pos}: λ-term body is not a call site")]
    NonCpsBody { pos: Pos },
    #[error("{pos}: duplicate parameter `{name}`")]
    DuplicateParam { name: String, pos: Pos },
    #[error("{pos}: `{name}` is reserved and cannot be bound")]
    ReservedName { name: String, pos: Pos },
    #[error("{pos}: {message}")]
    Malformed { message: String, pos: Pos },
}

const RESERVED: &[&str] = &["lambda", "λ", "kappa", "if", "halt"];

fn malformed(pos: Pos, message: impl Into<String>) -> CpsParseError {
    CpsParseError::Malformed { message: message.into(), pos }
}

/// Parses a literal atom: integers, `#t` and `#f`.
pub(crate) fn parse_literal(atom: &str) -> Option<Literal> {
    match atom {
        "#t" => Some(Literal::Bool(true)),
        "#f" => Some(Literal::Bool(false)),
        _ => atom.parse::<i64>().ok().map(Literal::Int),
    }
}

struct Builder {
    nodes: Vec<Option<Node>>,
    vars: Vec<VarInfo>,
    scope: HashMap<String, Vec<VarId>>,
    free: HashMap<String, VarId>,
}

impl Builder {
    fn reserve(&mut self) -> Label {
        self.nodes.push(None);
        Label(self.nodes.len() as u32 - 1)
    }

    fn lookup(&mut self, name: &str) -> VarId {
        if let Some(v) = self.scope.get(name).and_then(|s| s.last()) {
            return *v;
        }
        if let Some(v) = self.free.get(name) {
            return *v;
        }
        let v = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo { name: name.to_string(), binder: None });
        self.free.insert(name.to_string(), v);
        v
    }

    fn lambda_kind(head: &str) -> Option<LamKind> {
        match head {
            "lambda" | "λ" => Some(LamKind::Procedure),
            "kappa" => Some(LamKind::Continuation),
            _ => None,
        }
    }

    /// Returns the expression and its free variables.
    fn exp(&mut self, s: &Sexp) -> Result<(Exp, BTreeSet<VarId>), CpsParseError> {
        match s {
            Sexp::Atom(a, pos) => {
                if let Some(lit) = parse_literal(a) {
                    return Ok((Exp::Lit(lit), BTreeSet::new()));
                }
                if a == "halt" {
                    return Ok((Exp::Halt, BTreeSet::new()));
                }
                if RESERVED.contains(&a.as_str()) {
                    return Err(malformed(*pos, format!("keyword `{a}` used as a variable")));
                }
                if a.starts_with('#') {
                    return Err(malformed(*pos, format!("unknown literal `{a}`")));
                }
                let v = self.lookup(a);
                Ok((Exp::Var(v), BTreeSet::from([v])))
            }
            Sexp::List(items, pos) => {
                let kind = items.first().and_then(Sexp::as_atom).and_then(Self::lambda_kind);
                match kind {
                    Some(kind) => self.lambda(items, *pos, kind),
                    None => Err(malformed(*pos, "expected a variable, literal or λ-term")),
                }
            }
        }
    }

    fn lambda(&mut self, items: &[Sexp], pos: Pos, kind: LamKind) -> Result<(Exp, BTreeSet<VarId>), CpsParseError> {
        if items.len() != 3 {
            return Err(malformed(pos, "λ-term must have a parameter list and one body"));
        }
        let label = self.reserve();
        let params_sexp = items[1].as_list().ok_or_else(|| malformed(items[1].pos(), "expected parameter list"))?;
        let mut params = Vec::with_capacity(params_sexp.len());
        let mut names: Vec<&str> = Vec::new();
        for p in params_sexp {
            let name = p.as_atom().ok_or_else(|| malformed(p.pos(), "parameter must be a name"))?;
            if RESERVED.contains(&name) || parse_literal(name).is_some() || name.starts_with('#') {
                return Err(CpsParseError::ReservedName { name: name.into(), pos: p.pos() });
            }
            if names.contains(&name) {
                return Err(CpsParseError::DuplicateParam { name: name.into(), pos: p.pos() });
            }
            names.push(name);
            let v = VarId(self.vars.len() as u32);
            self.vars.push(VarInfo { name: name.into(), binder: Some(label) });
            params.push(v);
        }
        let body_sexp = &items[2];
        let is_call = match body_sexp {
            Sexp::List(xs, _) => !xs.is_empty() && xs[0].as_atom().and_then(Self::lambda_kind).is_none(),
            Sexp::Atom(..) => false,
        };
        if !is_call {
            return Err(CpsParseError::NonCpsBody { pos: body_sexp.pos() });
        }
        for (name, v) in names.iter().zip(&params) {
            self.scope.entry(name.to_string()).or_default().push(*v);
        }
        let body = self.call(body_sexp);
        for name in &names {
            self.scope.get_mut(*name).map(Vec::pop);
        }
        let (body, body_free) = body?;
        let free: BTreeSet<VarId> = body_free.into_iter().filter(|v| !params.contains(v)).collect();
        self.nodes[label.index()] =
            Some(Node::Lam(Lam { label, kind, params, body, free: free.iter().copied().collect() }));
        Ok((Exp::Lam(label), free))
    }

    fn call(&mut self, s: &Sexp) -> Result<(Label, BTreeSet<VarId>), CpsParseError> {
        let (items, pos) = match s {
            Sexp::List(items, pos) if !items.is_empty() => (items, *pos),
            _ => return Err(malformed(s.pos(), "expected a call site")),
        };
        let label = self.reserve();
        let mut free = BTreeSet::new();
        let kind = if items[0].as_atom() == Some("if") {
            if items.len() != 4 {
                return Err(malformed(pos, "`if` takes a test and two call sites"));
            }
            let (test, f) = self.exp(&items[1])?;
            free.extend(f);
            let (then, f) = self.call(&items[2])?;
            free.extend(f);
            let (otherwise, f) = self.call(&items[3])?;
            free.extend(f);
            CallKind::If { test, then, otherwise }
        } else {
            let mut exps = Vec::with_capacity(items.len());
            for it in items {
                let (e, f) = self.exp(it)?;
                free.extend(f);
                exps.push(e);
            }
            let operator = exps.remove(0);
            if let Exp::Lam(l) = &operator {
                if let Some(Node::Lam(lam)) = &self.nodes[l.index()] {
                    if lam.params.len() != exps.len() {
                        return Err(malformed(
                            pos,
                            format!("λ-term expects {} arguments but is applied to {}", lam.params.len(), exps.len()),
                        ));
                    }
                }
            }
            CallKind::App { operator, operands: exps }
        };
        self.nodes[label.index()] = Some(Node::Call(CallSite { label, kind }));
        Ok((label, free))
    }
}

/// Parses CPS concrete syntax into an α-renamed, labelled program.
///
/// Labels are assigned in preorder starting at 0. A program may be open;
/// its free variables get ids with no binder.
pub fn parse_cps(source: &str) -> Result<CpsProgram, CpsParseError> {
    let data = read_all(source)?;
    let root_sexp = match data.as_slice() {
        [one] => one,
        [] => return Err(malformed(Pos { line: 1, col: 1 }, "empty program")),
        [_, second, ..] => return Err(malformed(second.pos(), "expected a single call site")),
    };
    let mut b = Builder { nodes: Vec::new(), vars: Vec::new(), scope: HashMap::new(), free: HashMap::new() };
    let (root, _) = match root_sexp {
        Sexp::List(xs, _) if !xs.is_empty() && xs[0].as_atom().and_then(Builder::lambda_kind).is_some() => {
            return Err(malformed(root_sexp.pos(), "program must be a call site, not a λ-term"))
        }
        _ => b.call(root_sexp)?,
    };
    let nodes = b.nodes.into_iter().map(|n| n.expect("every reserved label is filled")).collect();
    Ok(CpsProgram { nodes, vars: b.vars, root })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: &CpsProgram, vs: impl IntoIterator<Item = VarId>) -> Vec<String> {
        let mut out: Vec<String> = vs.into_iter().map(|v| p.var(v).name.clone()).collect();
        out.sort();
        out
    }

    #[test]
    fn parses_procedure_and_continuation() {
        let p = parse_cps("((lambda (k) (k k)) (kappa (x) (x x)))").unwrap();
        assert_eq!(p.lambdas().count(), 2);
        assert_eq!(p.calls().count(), 3);
        let kinds: BTreeSet<LamKind> = p.lambdas().map(|l| l.kind).collect();
        assert_eq!(kinds, BTreeSet::from([LamKind::Procedure, LamKind::Continuation]));
        // preorder: root call 0, lambda 1, (k k) 2, kappa 3, (x x) 4
        assert_eq!(p.root(), Label(0));
        assert_eq!(p.lam(Label(1)).kind, LamKind::Procedure);
        assert_eq!(p.lam(Label(1)).body, Label(2));
        assert_eq!(p.lam(Label(3)).kind, LamKind::Continuation);
        assert!(p.is_closed());
    }

    #[test]
    fn rejects_non_call_body() {
        let err = parse_cps("((lambda (x) x) 1)").unwrap_err();
        assert!(matches!(err, CpsParseError::NonCpsBody { .. }), "{err}");
        assert!(parse_cps("(lambda (x) x)").is_err());
        let err = parse_cps("((lambda (x) (lambda (y) (y))) 1)").unwrap_err();
        assert!(matches!(err, CpsParseError::NonCpsBody { .. }));
    }

    #[test]
    fn rejects_duplicate_params() {
        let err = parse_cps("((lambda (x x) (x x)) 1 2)").unwrap_err();
        assert!(matches!(err, CpsParseError::DuplicateParam { ref name, .. } if name == "x"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_cps("((lambda (x)\n  (x x)").unwrap_err();
        assert!(matches!(err, CpsParseError::Syntax(ReadError { pos: Pos { line: 1, col: 2 }, .. })));
        assert!(err.to_string().contains("1:2"));
    }

    #[test]
    fn worst_case_skeleton_has_free_variable_in_inner_lambda() {
        let src = "((lambda (f1 k0) (f1 0 (kappa (u) (f1 1 k0)))) \
                    (lambda (x1 k1) (k1 (lambda (z k2) (z x1 k2)))) halt)";
        let p = parse_cps(src).unwrap();
        let inner = p.lambda_binding("z").unwrap();
        assert_eq!(names(&p, p.free_vars(inner)), vec!["x1"]);
    }

    #[test]
    fn free_vars_examples() {
        let p = parse_cps("((lambda (z) (z x1 x2)) halt)").unwrap();
        let l = p.lambda_binding("z").unwrap();
        assert_eq!(names(&p, p.free_vars(l)), vec!["x1", "x2"]);
        assert!(!p.is_closed());

        let p = parse_cps("((lambda (x) (x x)) halt)").unwrap();
        assert!(p.free_vars(p.lambda_binding("x").unwrap()).is_empty());

        let p = parse_cps("((lambda (a) ((lambda (b) (b a c)) d)) halt)").unwrap();
        let l = p.lambda_binding("a").unwrap();
        assert_eq!(names(&p, p.free_vars(l)), vec!["c", "d"]);
        let inner = p.lambda_binding("b").unwrap();
        assert_eq!(names(&p, p.free_vars(inner)), vec!["a", "c"]);
    }

    #[test]
    fn shadowing_is_alpha_renamed() {
        let p = parse_cps("((lambda (x) ((lambda (x) (x x)) x)) halt)").unwrap();
        let outer = p.lam(Label(1));
        let inner = p.lambda_binding("x").map(|_| p.lam(Label(3))).unwrap();
        assert_ne!(outer.params[0], inner.params[0]);
        assert!(inner.free.is_empty());
    }

    #[test]
    fn literal_and_if_forms() {
        let p = parse_cps("((lambda (b) (if b (halt 1) (halt #f))) #t)").unwrap();
        assert_eq!(p.calls().count(), 4);
        let body = p.call(p.lam(Label(1)).body);
        assert!(matches!(body.kind, CallKind::If { .. }));
    }

    #[test]
    fn arity_mismatch_of_literal_operator_is_rejected() {
        assert!(parse_cps("((lambda (x y) (x y)) 1)").is_err());
    }

    #[test]
    fn verbose_unparse_annotates_labels_and_reparses() {
        let src = "((lambda (k) (k k)) (kappa (x) (x x)))";
        let p = parse_cps(src).unwrap();
        assert_eq!(p.unparse(false), src);
        let v = p.unparse(true);
        assert_eq!(v, "((lambda (k) (k k)#2)#1 (kappa (x) (x x)#4)#3)#0");
        assert_eq!(parse_cps(&v).unwrap(), p);
    }
}
