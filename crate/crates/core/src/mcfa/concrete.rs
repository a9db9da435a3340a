//! Concrete semantics with flat closures: every application allocates one
//! environment and copies the callee's free variables into it.

use std::hash::{Hash, Hasher};

use super::Policy;
use crate::context::CallString;
use crate::cps::{CallKind, CpsProgram, Exp, Label, Lam, LamKind, Literal, VarId};
use crate::cps_concrete::ConcreteError;

/// A concrete flat environment: a serial number for freshness plus the
/// frames the abstraction keeps.
#[derive(Clone, Debug, Default)]
pub struct FlatEnvC {
    pub serial: u64,
    pub frames: CallString,
}

impl PartialEq for FlatEnvC {
    fn eq(&self, other: &Self) -> bool {
        self.serial == other.serial && self.frames == other.frames
    }
}

impl Eq for FlatEnvC {}

impl Hash for FlatEnvC {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.serial.hash(state);
    }
}

/// `new(call, (n, c⃗), lam, (n′, c⃗′))`.
pub fn new_concrete(call: Label, env: &FlatEnvC, lam: &Lam, closure_env: &FlatEnvC, policy: Policy) -> FlatEnvC {
    let frames = match (policy, lam.kind) {
        (Policy::TopMFrames, LamKind::Continuation) => closure_env.frames.clone(),
        _ => env.frames.push(call),
    };
    FlatEnvC { serial: env.serial + 1, frames }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FAddr {
    pub var: VarId,
    pub env: FlatEnvC,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FValue {
    Clo(Label, FlatEnvC),
    Lit(Literal),
    Halt,
}

pub type FStore = im::HashMap<FAddr, FValue>;

#[derive(Clone, Debug)]
pub struct FState {
    pub call: Label,
    pub env: FlatEnvC,
    pub store: FStore,
}

#[derive(Clone, Debug)]
pub enum FStep {
    Next(FState, Vec<(FAddr, FValue)>),
    Halt(FValue),
}

fn eval(prog: &CpsProgram, e: &Exp, s: &FState) -> Result<FValue, ConcreteError> {
    match e {
        Exp::Var(v) => s
            .store
            .get(&FAddr { var: *v, env: s.env.clone() })
            .cloned()
            .ok_or_else(|| ConcreteError::Unbound { var: prog.var_display(*v), call: s.call }),
        Exp::Lam(l) => Ok(FValue::Clo(*l, s.env.clone())),
        Exp::Lit(lit) => Ok(FValue::Lit(*lit)),
        Exp::Halt => Ok(FValue::Halt),
    }
}

pub fn step_flat(prog: &CpsProgram, s: &FState, policy: Policy) -> Result<FStep, ConcreteError> {
    match &prog.call(s.call).kind {
        CallKind::If { test, then, otherwise } => {
            let v = eval(prog, test, s)?;
            let call = if v == FValue::Lit(Literal::Bool(false)) { *otherwise } else { *then };
            Ok(FStep::Next(FState { call, env: s.env.clone(), store: s.store.clone() }, Vec::new()))
        }
        CallKind::App { operator, operands } => {
            let f = eval(prog, operator, s)?;
            let args = operands.iter().map(|e| eval(prog, e, s)).collect::<Result<Vec<_>, _>>()?;
            let (l, closure_env) = match f {
                FValue::Halt if args.len() == 1 => return Ok(FStep::Halt(args.into_iter().next().unwrap())),
                FValue::Halt => return Err(ConcreteError::Arity { call: s.call, expected: 1, got: args.len() }),
                FValue::Lit(lit) => return Err(ConcreteError::NotAProcedure { call: s.call, value: lit.to_string() }),
                FValue::Clo(l, e) => (l, e),
            };
            let lam = prog.lam(l);
            if lam.params.len() != args.len() {
                return Err(ConcreteError::Arity { call: s.call, expected: lam.params.len(), got: args.len() });
            }
            let env = new_concrete(s.call, &s.env, lam, &closure_env, policy);
            let mut writes = Vec::with_capacity(args.len() + lam.free.len());
            for (p, d) in lam.params.iter().zip(args) {
                writes.push((FAddr { var: *p, env: env.clone() }, d));
            }
            for x in &lam.free {
                let d = s
                    .store
                    .get(&FAddr { var: *x, env: closure_env.clone() })
                    .cloned()
                    .ok_or_else(|| ConcreteError::Unbound { var: prog.var_display(*x), call: s.call })?;
                writes.push((FAddr { var: *x, env: env.clone() }, d));
            }
            let mut store = s.store.clone();
            for (a, d) in &writes {
                store.insert(a.clone(), d.clone());
            }
            Ok(FStep::Next(FState { call: lam.body, env, store }, writes))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlatOutcome {
    Halted(FValue),
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct FlatTrace {
    pub states: Vec<FState>,
    /// `writes[i]` are performed by the transition out of `states[i]`.
    pub writes: Vec<Vec<(FAddr, FValue)>>,
    pub outcome: FlatOutcome,
}

impl FlatTrace {
    pub fn halt_value(&self) -> Option<&FValue> {
        match &self.outcome {
            FlatOutcome::Halted(v) => Some(v),
            FlatOutcome::BudgetExhausted => None,
        }
    }
}

pub fn run_flat(prog: &CpsProgram, policy: Policy, max_steps: usize) -> Result<FlatTrace, ConcreteError> {
    let mut states = vec![FState { call: prog.root(), env: FlatEnvC::default(), store: FStore::new() }];
    let mut writes = Vec::new();
    for _ in 0..max_steps {
        match step_flat(prog, states.last().unwrap(), policy)? {
            FStep::Next(s, w) => {
                states.push(s);
                writes.push(w);
            }
            FStep::Halt(v) => return Ok(FlatTrace { states, writes, outcome: FlatOutcome::Halted(v) }),
        }
    }
    Ok(FlatTrace { states, writes, outcome: FlatOutcome::BudgetExhausted })
}
