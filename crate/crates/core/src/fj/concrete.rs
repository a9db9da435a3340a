//! The concrete small-step machine with explicit continuations.

use std::fmt::{self, Write as _};

use super::syntax::*;
use crate::context::{CallString, Label};

/// Where time advances.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum TickMode {
    /// Every statement pushes its label.
    #[default]
    PerStatement,
    /// Only invocations push; returns restore the caller's context.
    CallSiteOnly,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FjOptions {
    pub tick: TickMode,
    /// Casts fail (concretely) or filter (abstractly) on non-subclasses.
    pub strict_casts: bool,
}

/// A concrete time. `ctx` is the label history that abstraction keeps;
/// `serial` counts steps so that allocations stay fresh when `ctx` does not
/// grow.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FjTime {
    pub serial: u64,
    pub ctx: CallString,
}

impl FjTime {
    pub fn initial() -> FjTime {
        FjTime { serial: 0, ctx: CallString::empty() }
    }

    pub fn tick(&self, l: Label, mode: TickMode, invocation: bool) -> FjTime {
        let ctx = if mode == TickMode::PerStatement || invocation { self.ctx.push(l) } else { self.ctx.clone() };
        FjTime { serial: self.serial + 1, ctx }
    }
}

impl fmt::Display for FjTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.serial, self.ctx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CAddr {
    Var(FjVar, FjTime),
    Field(FieldId, FjTime),
    Kont(MethodId, FjTime),
    Halt,
}

pub type CEnv = im::OrdMap<Slot, CAddr>;
pub type CRecord = im::OrdMap<FieldId, CAddr>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CValue {
    Obj { class: ClassId, record: CRecord },
    Kont { ret: FjVar, next: Label, env: CEnv, parent: CAddr, saved: CallString },
    HaltK,
}

pub type CStore = im::HashMap<CAddr, CValue>;

#[derive(Clone, Debug)]
pub struct FjState {
    pub stmt: Label,
    pub env: CEnv,
    pub store: CStore,
    pub kont: CAddr,
    pub time: FjTime,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FjRuntimeError {
    #[error("statement {0}: `{1}` is unbound")]
    Unbound(Label, String),
    #[error("statement {0}: not an object")]
    NotAnObject(Label),
    #[error("statement {0}: {1} has no field `{2}`")]
    NoField(Label, String, String),
    #[error("statement {0}: {1}")]
    Dispatch(Label, LookupError),
    #[error("statement {0}: {1} expects {2} arguments, got {3}")]
    Arity(Label, String, usize, usize),
    #[error("statement {0}: cannot cast {1} to {2}")]
    Cast(Label, String, String),
    #[error("statement {0}: no continuation")]
    NoKont(Label),
}

pub enum FjStep {
    Next(FjState, Vec<(CAddr, CValue)>),
    Halt(CValue),
}

pub fn inject(prog: &FjProgram) -> FjState {
    let main = prog.method(prog.main());
    let t0 = FjTime::initial();
    let env = main.vars().map(|v| (Slot::Var(v), CAddr::Var(v, t0.clone()))).collect();
    FjState { stmt: main.body[0], env, store: CStore::unit(CAddr::Halt, CValue::HaltK), kont: CAddr::Halt, time: t0 }
}

fn slot_name(prog: &FjProgram, s: Slot) -> String {
    match s {
        Slot::This => "this".into(),
        Slot::Var(v) => prog.var(v).name.clone(),
    }
}

fn read(prog: &FjProgram, s: &FjState, slot: Slot) -> Result<CValue, FjRuntimeError> {
    s.env
        .get(&slot)
        .and_then(|a| s.store.get(a))
        .cloned()
        .ok_or_else(|| FjRuntimeError::Unbound(s.stmt, slot_name(prog, slot)))
}

fn class_of(v: &CValue) -> Option<ClassId> {
    match v {
        CValue::Obj { class, .. } => Some(*class),
        _ => None,
    }
}

pub fn step_fj(prog: &FjProgram, s: &FjState, opts: FjOptions) -> Result<FjStep, FjRuntimeError> {
    let l = s.stmt;
    let stmt = prog.stmt(l);
    let (target, expr) = match &stmt.kind {
        StmtKind::Return(v) => {
            let d = read(prog, s, *v)?;
            return match s.store.get(&s.kont) {
                Some(CValue::HaltK) => Ok(FjStep::Halt(d)),
                Some(CValue::Kont { ret, next, env, parent, saved }) => {
                    let mut time = s.time.tick(l, opts.tick, false);
                    if opts.tick == TickMode::CallSiteOnly {
                        time.ctx = saved.clone();
                    }
                    let a = env[&Slot::Var(*ret)].clone();
                    let writes = vec![(a, d)];
                    Ok(FjStep::Next(
                        FjState {
                            stmt: *next,
                            env: env.clone(),
                            store: apply(&s.store, &writes),
                            kont: parent.clone(),
                            time,
                        },
                        writes,
                    ))
                }
                _ => Err(FjRuntimeError::NoKont(l)),
            };
        }
        StmtKind::Assign { target, expr } => (*target, expr),
    };
    let invocation = matches!(expr, Expr::Invoke { .. });
    let t1 = s.time.tick(l, opts.tick, invocation);
    let dst = s.env[&Slot::Var(target)].clone();
    let succ = || prog.succ(l).expect("assignments are never last");
    let next = |writes: Vec<(CAddr, CValue)>| {
        let st = FjState {
            stmt: succ(),
            env: s.env.clone(),
            store: apply(&s.store, &writes),
            kont: s.kont.clone(),
            time: t1.clone(),
        };
        Ok(FjStep::Next(st, writes))
    };
    match expr {
        Expr::Var(v) => next(vec![(dst, read(prog, s, *v)?)]),
        Expr::Cast { class, value } => {
            let d = read(prog, s, *value)?;
            if opts.strict_casts {
                let c = class_of(&d).ok_or(FjRuntimeError::NotAnObject(l))?;
                if !prog.is_subclass(c, *class) {
                    return Err(FjRuntimeError::Cast(l, prog.class(c).name.clone(), prog.class(*class).name.clone()));
                }
            }
            next(vec![(dst, d)])
        }
        Expr::Field(v, f) => {
            let CValue::Obj { class, record } = read(prog, s, *v)? else {
                return Err(FjRuntimeError::NotAnObject(l));
            };
            let no_field = || FjRuntimeError::NoField(l, prog.class(class).name.clone(), f.clone());
            let fid = prog.field_of(class, f).ok_or_else(no_field)?;
            let d = record.get(&fid).and_then(|a| s.store.get(a)).cloned().ok_or_else(no_field)?;
            next(vec![(dst, d)])
        }
        Expr::New { class, args } => {
            let ds = args.iter().map(|a| read(prog, s, *a)).collect::<Result<Vec<_>, _>>()?;
            let (fields, plan) = prog.constructor_lookup(*class);
            let mut writes = Vec::new();
            let mut record = CRecord::new();
            for (f, j) in fields.iter().zip(plan) {
                let a = CAddr::Field(*f, t1.clone());
                record.insert(*f, a.clone());
                writes.push((a, ds[*j].clone()));
            }
            writes.push((dst, CValue::Obj { class: *class, record }));
            next(writes)
        }
        Expr::Invoke { receiver, method, args } => {
            let d0 = read(prog, s, *receiver)?;
            let c = class_of(&d0).ok_or(FjRuntimeError::NotAnObject(l))?;
            let m = prog.method_lookup(c, method).map_err(|e| FjRuntimeError::Dispatch(l, e))?;
            let decl = prog.method(m);
            if decl.params.len() != args.len() {
                return Err(FjRuntimeError::Arity(l, prog.method_display(m), decl.params.len(), args.len()));
            }
            let ds = args.iter().map(|a| read(prog, s, *a)).collect::<Result<Vec<_>, _>>()?;
            let kaddr = CAddr::Kont(m, t1.clone());
            let kont = CValue::Kont {
                ret: target,
                next: succ(),
                env: s.env.clone(),
                parent: s.kont.clone(),
                saved: s.time.ctx.clone(),
            };
            let mut env = CEnv::unit(Slot::This, s.env[receiver].clone());
            for v in decl.vars() {
                env.insert(Slot::Var(v), CAddr::Var(v, t1.clone()));
            }
            let mut writes = vec![(kaddr.clone(), kont)];
            for (p, d) in decl.params.iter().zip(ds) {
                writes.push((CAddr::Var(*p, t1.clone()), d));
            }
            let st = FjState { stmt: decl.body[0], env, store: apply(&s.store, &writes), kont: kaddr, time: t1 };
            Ok(FjStep::Next(st, writes))
        }
    }
}

fn apply(store: &CStore, writes: &[(CAddr, CValue)]) -> CStore {
    let mut out = store.clone();
    for (a, v) in writes {
        out.insert(a.clone(), v.clone());
    }
    out
}

#[derive(Clone, Debug)]
pub enum FjOutcome {
    Halted(CValue),
    BudgetExhausted,
}

/// `writes[i]` belongs to the transition out of `states[i]`.
#[derive(Clone, Debug)]
pub struct FjTrace {
    pub states: Vec<FjState>,
    pub writes: Vec<Vec<(CAddr, CValue)>>,
    pub outcome: FjOutcome,
}

impl FjTrace {
    pub fn halt_value(&self) -> Option<&CValue> {
        match &self.outcome {
            FjOutcome::Halted(v) => Some(v),
            FjOutcome::BudgetExhausted => None,
        }
    }

    /// Continuation chain length below a state, not counting halt.
    pub fn kont_depth(state: &FjState) -> usize {
        let mut depth = 0;
        let mut a = &state.kont;
        while let Some(CValue::Kont { parent, .. }) = state.store.get(a) {
            depth += 1;
            a = parent;
        }
        depth
    }

    /// One line per state: label, method, context length, continuation
    /// depth; then the class of the final value.
    pub fn dump(&self, prog: &FjProgram) -> String {
        let mut out = String::new();
        for s in &self.states {
            let m = prog.method_display(prog.stmt(s.stmt).method);
            let _ = writeln!(out, "{}\t{m}\t{}\t{}", s.stmt, s.time.ctx.len(), Self::kont_depth(s));
        }
        match &self.outcome {
            FjOutcome::Halted(CValue::Obj { class, .. }) => {
                let _ = writeln!(out, "halt\t{}", prog.class(*class).name);
            }
            FjOutcome::Halted(_) => out.push_str("halt\t?\n"),
            FjOutcome::BudgetExhausted => out.push_str("budget\n"),
        }
        out
    }
}

pub fn run_fj(prog: &FjProgram, opts: FjOptions, max_steps: usize) -> Result<FjTrace, FjRuntimeError> {
    let mut states = vec![inject(prog)];
    let mut writes = Vec::new();
    for _ in 0..max_steps {
        match step_fj(prog, states.last().unwrap(), opts)? {
            FjStep::Next(s, w) => {
                states.push(s);
                writes.push(w);
            }
            FjStep::Halt(v) => return Ok(FjTrace { states, writes, outcome: FjOutcome::Halted(v) }),
        }
    }
    Ok(FjTrace { states, writes, outcome: FjOutcome::BudgetExhausted })
}
