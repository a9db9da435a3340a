use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::Serialize;

pub use crate::context::Label;

/// A binding occurrence after α-renaming.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    /// The λ-term that binds this variable; `None` for free variables of
    /// an open program.
    pub binder: Option<Label>,
}

/// Procedures are written `lambda`, continuations `kappa`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LamKind {
    Procedure,
    Continuation,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Int(i64),
    Bool(bool),
}

impl Literal {
    pub fn is_false(self) -> bool {
        self == Literal::Bool(false)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Bool(true) => f.write_str("#t"),
            Literal::Bool(false) => f.write_str("#f"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exp {
    Var(VarId),
    Lam(Label),
    Lit(Literal),
    /// The distinguished halt continuation.
    Halt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lam {
    pub label: Label,
    pub kind: LamKind,
    pub params: Vec<VarId>,
    pub body: Label,
    /// Free variables, sorted by id.
    pub free: Vec<VarId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CallKind {
    App {
        operator: Exp,
        operands: Vec<Exp>,
    },
    /// `(if e call call)`: branches without binding anything.
    If {
        test: Exp,
        then: Label,
        otherwise: Label,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallSite {
    pub label: Label,
    pub kind: CallKind,
}

impl CallSite {
    /// Every atomic expression the call evaluates, operator first.
    pub fn exps(&self) -> Vec<&Exp> {
        match &self.kind {
            CallKind::App { operator, operands } => std::iter::once(operator).chain(operands.iter()).collect(),
            CallKind::If { test, .. } => vec![test],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Lam(Lam),
    Call(CallSite),
}

/// A parsed, α-renamed and labelled CPS program.
///
/// Labels are dense and assigned in preorder, so `nodes[l]` is the λ-term
/// or call site carrying label `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpsProgram {
    pub(crate) nodes: Vec<Node>,
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) root: Label,
}

impl CpsProgram {
    pub fn root(&self) -> Label {
        self.root
    }

    pub fn node(&self, l: Label) -> &Node {
        &self.nodes[l.index()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// # Panics
    /// If `l` labels a call site.
    pub fn lam(&self, l: Label) -> &Lam {
        match &self.nodes[l.index()] {
            Node::Lam(lam) => lam,
            Node::Call(_) => panic!("label {l} is a call site, not a λ-term"),
        }
    }

    /// # Panics
    /// If `l` labels a λ-term.
    pub fn call(&self, l: Label) -> &CallSite {
        match &self.nodes[l.index()] {
            Node::Call(c) => c,
            Node::Lam(_) => panic!("label {l} is a λ-term, not a call site"),
        }
    }

    pub fn try_lam(&self, l: Label) -> Option<&Lam> {
        match self.nodes.get(l.index())? {
            Node::Lam(lam) => Some(lam),
            Node::Call(_) => None,
        }
    }

    pub fn lambdas(&self) -> impl Iterator<Item = &Lam> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Lam(l) => Some(l),
            Node::Call(_) => None,
        })
    }

    pub fn calls(&self) -> impl Iterator<Item = &CallSite> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Call(c) => Some(c),
            Node::Lam(_) => None,
        })
    }

    pub fn var(&self, v: VarId) -> &VarInfo {
        &self.vars[v.index()]
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    /// `name#uid`, unambiguous after α-renaming.
    pub fn var_display(&self, v: VarId) -> String {
        match self.vars.get(v.index()) {
            Some(info) => format!("{}#{}", info.name, v.0),
            None => format!("?#{}", v.0),
        }
    }

    pub fn free_vars(&self, lam: Label) -> BTreeSet<VarId> {
        self.lam(lam).free.iter().copied().collect()
    }

    /// Free variables of the whole program; empty for closed programs.
    pub fn root_free_vars(&self) -> Vec<VarId> {
        (0..self.vars.len() as u32).map(VarId).filter(|v| self.vars[v.index()].binder.is_none()).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.vars.iter().all(|v| v.binder.is_some())
    }

    /// Finds the first λ-term binding a parameter named `name`.
    pub fn lambda_binding(&self, name: &str) -> Option<Label> {
        self.lambdas().find(|l| l.params.iter().any(|p| self.vars[p.index()].name == name)).map(|l| l.label)
    }

    /// Number of syntax-tree nodes: λ-terms, call sites and atomic references.
    pub fn term_count(&self) -> usize {
        self.nodes.len()
            + self.calls().map(|c| c.exps().iter().filter(|e| !matches!(e, Exp::Lam(_))).count()).sum::<usize>()
    }

    /// Prints the program in concrete syntax. With `verbose`, every λ-term and
    /// call site is followed by `#label`.
    pub fn unparse(&self, verbose: bool) -> String {
        let mut out = String::new();
        self.write_call(&mut out, self.root, verbose);
        out
    }

    fn write_exp(&self, out: &mut String, e: &Exp, verbose: bool) {
        match e {
            Exp::Var(v) => out.push_str(&self.vars[v.index()].name),
            Exp::Lit(lit) => {
                let _ = write!(out, "{lit}");
            }
            Exp::Halt => out.push_str("halt"),
            Exp::Lam(l) => {
                let lam = self.lam(*l);
                out.push('(');
                out.push_str(match lam.kind {
                    LamKind::Procedure => "lambda",
                    LamKind::Continuation => "kappa",
                });
                out.push_str(" (");
                for (i, p) in lam.params.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    out.push_str(&self.vars[p.index()].name);
                }
                out.push_str(") ");
                self.write_call(out, lam.body, verbose);
                out.push(')');
                if verbose {
                    let _ = write!(out, "#{l}");
                }
            }
        }
    }

    fn write_call(&self, out: &mut String, l: Label, verbose: bool) {
        let call = self.call(l);
        out.push('(');
        match &call.kind {
            CallKind::App { operator, operands } => {
                self.write_exp(out, operator, verbose);
                for e in operands {
                    out.push(' ');
                    self.write_exp(out, e, verbose);
                }
            }
            CallKind::If { test, then, otherwise } => {
                out.push_str("if ");
                self.write_exp(out, test, verbose);
                out.push(' ');
                self.write_call(out, *then, verbose);
                out.push(' ');
                self.write_call(out, *otherwise, verbose);
            }
        }
        out.push(')');
        if verbose {
            let _ = write!(out, "#{l}");
        }
    }
}

impl fmt::Display for CpsProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.unparse(false))
    }
}
