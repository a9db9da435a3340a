//! The concrete small-step CPS machine.

use std::fmt::{self, Write as _};

use crate::context::CallString;
use crate::cps::{CallKind, CpsProgram, Exp, Label, Literal, VarId};

/// How concrete times are represented.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum TimeMode {
    /// Successive naturals, starting at 0.
    #[default]
    Nat,
    /// The full history of call sites, most recent first.
    Calls,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Time {
    Nat(u64),
    Calls(CallString),
}

impl Time {
    pub fn initial(mode: TimeMode) -> Time {
        match mode {
            TimeMode::Nat => Time::Nat(0),
            TimeMode::Calls => Time::Calls(CallString::empty()),
        }
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Time::Nat(n) => write!(f, "{n}"),
            Time::Calls(c) => write!(f, "{c}"),
        }
    }
}

pub fn tick(call: Label, t: &Time) -> Time {
    match t {
        Time::Nat(n) => Time::Nat(n + 1),
        Time::Calls(c) => Time::Calls(c.push(call)),
    }
}

pub fn alloc(var: VarId, t: &Time) -> Addr {
    Addr { var, time: t.clone() }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Addr {
    pub var: VarId,
    pub time: Time,
}

pub type BEnv = im::OrdMap<VarId, Addr>;
pub type Store = im::HashMap<Addr, Value>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Clo(Label, BEnv),
    Lit(Literal),
    Halt,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Clo(l, _) => write!(f, "λ{l}"),
            Value::Lit(lit) => write!(f, "{lit}"),
            Value::Halt => f.write_str("halt"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub call: Label,
    pub env: BEnv,
    pub store: Store,
    pub time: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConcreteError {
    #[error("call {call}: unbound variable {var}")]
    Unbound { var: String, call: Label },
    #[error("call {call}: operator evaluated to {value}, which is not a procedure")]
    NotAProcedure { call: Label, value: String },
    #[error("call {call}: procedure expects {expected} arguments, got {got}")]
    Arity { call: Label, expected: usize, got: usize },
}

#[derive(Clone, Debug)]
pub enum Step {
    /// The successor state and the store writes that produced it.
    Next(State, Vec<(Addr, Value)>),
    Halt(Value),
}

pub fn eval_atom(prog: &CpsProgram, e: &Exp, env: &BEnv, store: &Store, call: Label) -> Result<Value, ConcreteError> {
    let unbound = |v: &VarId| ConcreteError::Unbound { var: prog.var_display(*v), call };
    match e {
        Exp::Var(v) => {
            let a = env.get(v).ok_or_else(|| unbound(v))?;
            store.get(a).cloned().ok_or_else(|| unbound(v))
        }
        Exp::Lam(l) => Ok(Value::Clo(*l, env.clone())),
        Exp::Lit(lit) => Ok(Value::Lit(*lit)),
        Exp::Halt => Ok(Value::Halt),
    }
}

/// ς₀ = (root, [], [], t₀).
pub fn inject(prog: &CpsProgram, mode: TimeMode) -> State {
    State { call: prog.root(), env: BEnv::new(), store: Store::new(), time: Time::initial(mode) }
}

pub fn step(prog: &CpsProgram, s: &State) -> Result<Step, ConcreteError> {
    let call = prog.call(s.call);
    let t2 = tick(s.call, &s.time);
    match &call.kind {
        CallKind::If { test, then, otherwise } => {
            let v = eval_atom(prog, test, &s.env, &s.store, s.call)?;
            let branch = if v == Value::Lit(Literal::Bool(false)) { *otherwise } else { *then };
            let next = State { call: branch, env: s.env.clone(), store: s.store.clone(), time: t2 };
            Ok(Step::Next(next, Vec::new()))
        }
        CallKind::App { operator, operands } => {
            let f = eval_atom(prog, operator, &s.env, &s.store, s.call)?;
            let args =
                operands.iter().map(|e| eval_atom(prog, e, &s.env, &s.store, s.call)).collect::<Result<Vec<_>, _>>()?;
            match f {
                Value::Halt if args.len() == 1 => Ok(Step::Halt(args.into_iter().next().unwrap())),
                Value::Halt => Err(ConcreteError::Arity { call: s.call, expected: 1, got: args.len() }),
                Value::Lit(_) => Err(ConcreteError::NotAProcedure { call: s.call, value: f.to_string() }),
                Value::Clo(l, env) => {
                    let lam = prog.lam(l);
                    if lam.params.len() != args.len() {
                        return Err(ConcreteError::Arity { call: s.call, expected: lam.params.len(), got: args.len() });
                    }
                    let mut env = env;
                    let mut store = s.store.clone();
                    let mut writes = Vec::with_capacity(args.len());
                    for (p, d) in lam.params.iter().zip(args) {
                        let a = alloc(*p, &t2);
                        env.insert(*p, a.clone());
                        store.insert(a.clone(), d.clone());
                        writes.push((a, d));
                    }
                    Ok(Step::Next(State { call: lam.body, env, store, time: t2 }, writes))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Halted(Value),
    BudgetExhausted,
}

/// A deterministic run from ς₀. `writes[i]` holds the store writes of the
/// transition from `states[i]` to `states[i + 1]`.
#[derive(Clone, Debug)]
pub struct Trace {
    pub states: Vec<State>,
    pub writes: Vec<Vec<(Addr, Value)>>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn halt_value(&self) -> Option<&Value> {
        match &self.outcome {
            Outcome::Halted(v) => Some(v),
            Outcome::BudgetExhausted => None,
        }
    }

    /// One line per state: label, bindings, time.
    pub fn dump(&self, prog: &CpsProgram) -> String {
        let mut out = String::new();
        for s in &self.states {
            let _ = write!(out, "{}\t{{", s.call);
            for (i, (v, a)) in s.env.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}@{}", prog.var_display(*v), a.time);
            }
            let _ = writeln!(out, "}}\t{}", s.time);
        }
        match &self.outcome {
            Outcome::Halted(v) => {
                let _ = writeln!(out, "halt\t{v}");
            }
            Outcome::BudgetExhausted => out.push_str("budget exhausted\n"),
        }
        out
    }
}

/// Runs at most `max_steps` transitions.
pub fn run_concrete(prog: &CpsProgram, mode: TimeMode, max_steps: usize) -> Result<Trace, ConcreteError> {
    let mut states = vec![inject(prog, mode)];
    let mut writes = Vec::new();
    for _ in 0..max_steps {
        match step(prog, states.last().unwrap())? {
            Step::Next(s, w) => {
                states.push(s);
                writes.push(w);
            }
            Step::Halt(v) => return Ok(Trace { states, writes, outcome: Outcome::Halted(v) }),
        }
    }
    Ok(Trace { states, writes, outcome: Outcome::BudgetExhausted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cps::{cps_convert, parse_cps};

    #[test]
    fn tick_and_alloc() {
        assert_eq!(tick(Label(0), &Time::Nat(5)), Time::Nat(6));
        let a = alloc(VarId(0), &Time::Nat(6));
        assert_eq!(a, Addr { var: VarId(0), time: Time::Nat(6) });
        assert_ne!(a, alloc(VarId(1), &Time::Nat(6)));
    }

    #[test]
    fn eval_atom_rules() {
        let p = parse_cps("((lambda (x) (x x)) halt)").unwrap();
        let x = VarId(0);
        let a = alloc(x, &Time::Nat(1));
        let env = BEnv::unit(x, a.clone());
        let store = Store::unit(a, Value::Lit(Literal::Int(7)));
        assert_eq!(eval_atom(&p, &Exp::Var(x), &env, &store, Label(0)), Ok(Value::Lit(Literal::Int(7))));
        assert_eq!(eval_atom(&p, &Exp::Lam(Label(1)), &env, &store, Label(0)), Ok(Value::Clo(Label(1), env.clone())));
        assert!(matches!(
            eval_atom(&p, &Exp::Var(VarId(9)), &env, &store, Label(0)),
            Err(ConcreteError::Unbound { .. })
        ));
    }

    #[test]
    fn one_application_binds_at_the_ticked_time() {
        let p = parse_cps("((lambda (k) (k k)) halt)").unwrap();
        let s0 = inject(&p, TimeMode::Nat);
        let Step::Next(s1, writes) = step(&p, &s0).unwrap() else { panic!() };
        assert_eq!(s1.call, Label(2));
        assert_eq!(s1.time, Time::Nat(1));
        let k = p.lam(Label(1)).params[0];
        assert_eq!(s1.env.get(&k), Some(&Addr { var: k, time: Time::Nat(1) }));
        assert_eq!(writes, vec![(alloc(k, &Time::Nat(1)), Value::Halt)]);
        let Step::Halt(v) = step(&p, &s1).unwrap() else { panic!() };
        assert_eq!(v, Value::Halt);
    }

    #[test]
    fn identity_returns_its_last_argument() {
        let p = cps_convert("(define (id x) x) (id 3)").unwrap();
        let t = run_concrete(&p, TimeMode::Nat, 100).unwrap();
        assert_eq!(t.halt_value(), Some(&Value::Lit(Literal::Int(3))));
        let p =
            cps_convert("(define (do-something) 1) (define (identity x) (do-something) x) (identity 3) (identity 4)")
                .unwrap();
        let t = run_concrete(&p, TimeMode::Calls, 100).unwrap();
        assert_eq!(t.halt_value(), Some(&Value::Lit(Literal::Int(4))));
    }

    #[test]
    fn constant_operator_is_an_error() {
        let p = parse_cps("(3 halt)").unwrap();
        assert!(matches!(run_concrete(&p, TimeMode::Nat, 10), Err(ConcreteError::NotAProcedure { .. })));
    }

    #[test]
    fn zero_budget_and_divergence() {
        let p = parse_cps("((lambda (f) (f f)) (lambda (f) (f f)))").unwrap();
        let t = run_concrete(&p, TimeMode::Nat, 0).unwrap();
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.outcome, Outcome::BudgetExhausted);
        let t = run_concrete(&p, TimeMode::Nat, 50).unwrap();
        assert_eq!(t.states.len(), 51);
        assert_eq!(t.outcome, Outcome::BudgetExhausted);
    }

    #[test]
    fn if_falls_through_only_on_false() {
        let p = parse_cps("((lambda (b) (if b (halt 1) (halt 2))) #f)").unwrap();
        let t = run_concrete(&p, TimeMode::Nat, 10).unwrap();
        assert_eq!(t.halt_value(), Some(&Value::Lit(Literal::Int(2))));
        let p = parse_cps("((lambda (b) (if b (halt 1) (halt 2))) 0)").unwrap();
        let t = run_concrete(&p, TimeMode::Nat, 10).unwrap();
        assert_eq!(t.halt_value(), Some(&Value::Lit(Literal::Int(1))));
    }

    #[test]
    fn dump_has_a_line_per_state() {
        let p = parse_cps("((lambda (k) (k k)) halt)").unwrap();
        let t = run_concrete(&p, TimeMode::Nat, 10).unwrap();
        assert_eq!(t.dump(&p), "0\t{}\t0\n2\t{k#0@1}\t1\nhalt\thalt\n");
    }
}
