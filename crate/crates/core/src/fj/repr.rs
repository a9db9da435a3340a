//! Abstract environment and record representations.
//!
//! `MapRepr` keeps binding environments as explicit maps. `CollapsedRepr`
//! replaces each one by the single time its addresses share, keeping `this`
//! beside it since that binding is inherited from the caller.

use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use super::syntax::*;
use crate::context::{Contour, Label};

/// An abstract address: an offset paired with an abstract time.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AAddr {
    Var(FjVar, Contour),
    Field(FieldId, Contour),
    Kont(MethodId, Contour),
    /// The initial continuation.
    HaltKont,
    /// Values returned to the initial continuation.
    Result,
}

impl AAddr {
    pub fn time(&self) -> Option<&Contour> {
        match self {
            AAddr::Var(_, t) | AAddr::Field(_, t) | AAddr::Kont(_, t) => Some(t),
            AAddr::HaltKont | AAddr::Result => None,
        }
    }
}

pub trait Repr: Copy + Debug + Default + Eq + Ord + Hash + Send + Sync + 'static {
    type Env: Clone + Debug + Eq + Ord + Hash + Send + Sync;
    type Rec: Clone + Debug + Eq + Ord + Hash + Send + Sync;

    /// The environment on entry to `m`: `this` (absent in main) and every
    /// parameter and local allocated at `t`.
    fn entry_env(prog: &FjProgram, m: MethodId, this: Option<AAddr>, t: &Contour) -> Self::Env;

    fn lookup(env: &Self::Env, slot: Slot) -> Option<AAddr>;

    /// The record of a fresh `class` object whose fields live at `t`.
    fn record(prog: &FjProgram, class: ClassId, t: &Contour) -> Self::Rec;

    fn field(rec: &Self::Rec, f: FieldId) -> Option<AAddr>;

    fn expand_env(prog: &FjProgram, m: MethodId, env: &Self::Env) -> Vec<(Slot, AAddr)>;

    fn expand_rec(prog: &FjProgram, class: ClassId, rec: &Self::Rec) -> Vec<(FieldId, AAddr)>;

    /// Inverse of `expand_env`; `None` if the map is not representable.
    fn env_from_map(prog: &FjProgram, m: MethodId, map: Vec<(Slot, AAddr)>) -> Option<Self::Env>;

    fn rec_from_map(prog: &FjProgram, class: ClassId, map: Vec<(FieldId, AAddr)>) -> Option<Self::Rec>;
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MapRepr;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CollapsedRepr;

impl Repr for MapRepr {
    type Env = Arc<[(Slot, AAddr)]>;
    type Rec = Arc<[(FieldId, AAddr)]>;

    fn entry_env(prog: &FjProgram, m: MethodId, this: Option<AAddr>, t: &Contour) -> Self::Env {
        let mut env: Vec<(Slot, AAddr)> = this.map(|a| (Slot::This, a)).into_iter().collect();
        env.extend(prog.method(m).vars().map(|v| (Slot::Var(v), AAddr::Var(v, t.clone()))));
        env.sort();
        env.into()
    }

    fn lookup(env: &Self::Env, slot: Slot) -> Option<AAddr> {
        env.binary_search_by(|(s, _)| s.cmp(&slot)).ok().map(|i| env[i].1.clone())
    }

    fn record(prog: &FjProgram, class: ClassId, t: &Contour) -> Self::Rec {
        let mut rec: Vec<(FieldId, AAddr)> =
            prog.class(class).all_fields.iter().map(|f| (*f, AAddr::Field(*f, t.clone()))).collect();
        rec.sort();
        rec.into()
    }

    fn field(rec: &Self::Rec, f: FieldId) -> Option<AAddr> {
        rec.binary_search_by(|(g, _)| g.cmp(&f)).ok().map(|i| rec[i].1.clone())
    }

    fn expand_env(_: &FjProgram, _: MethodId, env: &Self::Env) -> Vec<(Slot, AAddr)> {
        env.to_vec()
    }

    fn expand_rec(_: &FjProgram, _: ClassId, rec: &Self::Rec) -> Vec<(FieldId, AAddr)> {
        rec.to_vec()
    }

    fn env_from_map(_: &FjProgram, _: MethodId, mut map: Vec<(Slot, AAddr)>) -> Option<Self::Env> {
        map.sort();
        Some(map.into())
    }

    fn rec_from_map(_: &FjProgram, _: ClassId, mut map: Vec<(FieldId, AAddr)>) -> Option<Self::Rec> {
        map.sort();
        Some(map.into())
    }
}

/// An environment reduced to the receiver address and the shared time.
/// `time` is `None` for methods without parameters or locals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CollapsedEnv {
    pub this: Option<AAddr>,
    pub time: Option<Contour>,
}

impl Repr for CollapsedRepr {
    type Env = CollapsedEnv;
    /// `None` for classes without fields.
    type Rec = Option<Contour>;

    fn entry_env(prog: &FjProgram, m: MethodId, this: Option<AAddr>, t: &Contour) -> Self::Env {
        let has_vars = prog.method(m).vars().next().is_some();
        CollapsedEnv { this, time: has_vars.then(|| t.clone()) }
    }

    fn lookup(env: &Self::Env, slot: Slot) -> Option<AAddr> {
        match slot {
            Slot::This => env.this.clone(),
            Slot::Var(v) => env.time.as_ref().map(|t| AAddr::Var(v, t.clone())),
        }
    }

    fn record(prog: &FjProgram, class: ClassId, t: &Contour) -> Self::Rec {
        (!prog.class(class).all_fields.is_empty()).then(|| t.clone())
    }

    fn field(rec: &Self::Rec, f: FieldId) -> Option<AAddr> {
        rec.as_ref().map(|t| AAddr::Field(f, t.clone()))
    }

    fn expand_env(prog: &FjProgram, m: MethodId, env: &Self::Env) -> Vec<(Slot, AAddr)> {
        let mut out: Vec<(Slot, AAddr)> = env.this.clone().map(|a| (Slot::This, a)).into_iter().collect();
        if let Some(t) = &env.time {
            out.extend(prog.method(m).vars().map(|v| (Slot::Var(v), AAddr::Var(v, t.clone()))));
        }
        out.sort();
        out
    }

    fn expand_rec(prog: &FjProgram, class: ClassId, rec: &Self::Rec) -> Vec<(FieldId, AAddr)> {
        let mut out: Vec<(FieldId, AAddr)> = match rec {
            Some(t) => prog.class(class).all_fields.iter().map(|f| (*f, AAddr::Field(*f, t.clone()))).collect(),
            None => Vec::new(),
        };
        out.sort();
        out
    }

    fn env_from_map(prog: &FjProgram, m: MethodId, map: Vec<(Slot, AAddr)>) -> Option<Self::Env> {
        let mut this = None;
        let mut time: Option<Contour> = None;
        let mut seen = 0;
        for (s, a) in map {
            match (s, a) {
                (Slot::This, a) => this = Some(a),
                (Slot::Var(v), AAddr::Var(w, t)) if v == w && prog.var(v).method == m => {
                    if time.as_ref().is_some_and(|u| *u != t) {
                        return None;
                    }
                    time = Some(t);
                    seen += 1;
                }
                _ => return None,
            }
        }
        (seen == prog.method(m).vars().count()).then_some(CollapsedEnv { this, time })
    }

    fn rec_from_map(prog: &FjProgram, class: ClassId, map: Vec<(FieldId, AAddr)>) -> Option<Self::Rec> {
        let mut time: Option<Contour> = None;
        for (f, a) in &map {
            match a {
                AAddr::Field(g, t) if f == g => {
                    if time.as_ref().is_some_and(|u| u != t) {
                        return None;
                    }
                    time = Some(t.clone());
                }
                _ => return None,
            }
        }
        (map.len() == prog.class(class).all_fields.len()).then_some(time)
    }
}

/// Renders an environment as `{x#1@⟨3⟩ ...}`.
pub fn render_env(prog: &FjProgram, env: &[(Slot, AAddr)]) -> String {
    let items: Vec<String> = env
        .iter()
        .map(|(s, a)| match (s, a.time()) {
            (Slot::This, Some(t)) => format!("this@{t}"),
            (Slot::Var(v), Some(t)) => format!("{}@{t}", prog.var_display(*v)),
            (s, None) => format!("{s}"),
        })
        .collect();
    format!("{{{}}}", items.join(" "))
}

/// The label a continuation resumes at determines whose environment it holds.
pub(crate) fn method_of(prog: &FjProgram, l: Label) -> MethodId {
    prog.stmt(l).method
}
