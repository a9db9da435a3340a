//! Abstract k-CFA for CPS: the abstract transition relation, naive
//! set-of-states exploration and the single-threaded-store fixpoint.

mod abstraction;
mod naive;

use std::collections::BTreeSet;
use std::fmt::Write as _;

pub use abstraction::{abstract_addr, abstract_state, abstract_time, AState};
pub use naive::{explore_naive, NaiveResult, DEFAULT_NAIVE_BUDGET};

use crate::context::Contour;
use crate::cps::{CallKind, CpsProgram, Exp, Label, Literal, VarId};
use crate::intern::{Id, Interner};
use crate::report::{FlowReport, FlowSet, FlowValue, ReportBuilder};
use crate::solver::{solve, AbstractMachine, Budget, Fixpoint, StoreView, Successor};

pub type EnvId = Id;

/// `t̂ick(call, t̂) = first_k(call : t̂)`.
pub fn atick(call: Label, t: &Contour, k: usize) -> Contour {
    t.push_truncate(call, k)
}

/// `âlloc(v, t̂) = (v, t̂)`.
pub fn aalloc(v: VarId, t: &Contour) -> KAddr {
    KAddr::Var(v, t.clone())
}

/// An abstract binding environment. Since every address a variable is bound
/// to pairs that variable with a time, the map stores only the times.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ABEnv(Vec<(VarId, Contour)>);

impl ABEnv {
    pub fn from_bindings(mut b: Vec<(VarId, Contour)>) -> ABEnv {
        b.sort_by_key(|(v, _)| *v);
        b.dedup_by_key(|(v, _)| *v);
        ABEnv(b)
    }

    pub fn get(&self, v: VarId) -> Option<&Contour> {
        self.0.binary_search_by_key(&v, |(x, _)| *x).ok().map(|i| &self.0[i].1)
    }

    pub fn bindings(&self) -> &[(VarId, Contour)] {
        &self.0
    }

    pub fn extend(&self, vars: &[VarId], t: &Contour) -> ABEnv {
        let mut out = self.0.clone();
        for &v in vars {
            match out.binary_search_by_key(&v, |(x, _)| *x) {
                Ok(i) => out[i].1 = t.clone(),
                Err(i) => out.insert(i, (v, t.clone())),
            }
        }
        ABEnv(out)
    }

    pub fn render(&self, prog: &CpsProgram) -> String {
        let mut s = String::from("{");
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}@{t}", prog.var_display(*v));
        }
        s.push('}');
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AVal {
    Clo(Label, EnvId),
    Lit(Literal),
    Halt,
}

impl AVal {
    pub fn flow_value(&self) -> FlowValue {
        match self {
            AVal::Clo(l, _) => FlowValue::Lam(*l),
            AVal::Lit(lit) => FlowValue::Lit(*lit),
            AVal::Halt => FlowValue::Halt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KAddr {
    Var(VarId, Contour),
    /// Collects every value passed to the halt continuation.
    Halt,
}

/// A configuration of the widened system space: (call, β̂, t̂).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KConfig {
    pub call: Label,
    pub env: EnvId,
    pub time: Contour,
}

pub struct KcfaMachine<'p> {
    prog: &'p CpsProgram,
    k: usize,
    envs: Interner<ABEnv>,
}

impl<'p> KcfaMachine<'p> {
    pub fn new(prog: &'p CpsProgram, k: usize) -> Self {
        KcfaMachine { prog, k, envs: Interner::default() }
    }

    pub fn program(&self) -> &'p CpsProgram {
        self.prog
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn env(&self, id: EnvId) -> &ABEnv {
        self.envs.resolve(id)
    }

    pub fn intern_env(&mut self, env: ABEnv) -> EnvId {
        self.envs.intern(env)
    }

    pub fn find_env(&self, env: &ABEnv) -> Option<EnvId> {
        self.envs.get(env)
    }

    /// Â(e, β̂, σ̂).
    pub fn flow(&self, e: &Exp, env: EnvId, store: &dyn StoreView<KAddr, AVal>) -> BTreeSet<AVal> {
        match e {
            Exp::Var(v) => match self.env(env).get(*v) {
                Some(t) => store.read(&aalloc(*v, t)).cloned().unwrap_or_default(),
                None => BTreeSet::new(),
            },
            Exp::Lam(l) => BTreeSet::from([AVal::Clo(*l, env)]),
            Exp::Lit(lit) => BTreeSet::from([AVal::Lit(*lit)]),
            Exp::Halt => BTreeSet::from([AVal::Halt]),
        }
    }
}

impl AbstractMachine for KcfaMachine<'_> {
    type Config = KConfig;
    type Addr = KAddr;
    type Val = AVal;

    fn initial(&mut self) -> KConfig {
        let env = self.envs.intern(ABEnv::default());
        KConfig { call: self.prog.root(), env, time: Contour::empty() }
    }

    fn step(&mut self, c: &KConfig, store: &dyn StoreView<KAddr, AVal>) -> Vec<Successor<KConfig, KAddr, AVal>> {
        let prog = self.prog;
        let t2 = atick(c.call, &c.time, self.k);
        match &prog.call(c.call).kind {
            CallKind::If { test, then, otherwise } => {
                let flow = self.flow(test, c.env, store);
                let mut out = Vec::new();
                if flow.iter().any(|v| *v != AVal::Lit(Literal::Bool(false))) {
                    let next = KConfig { call: *then, env: c.env, time: t2.clone() };
                    out.push(Successor { next: Some(next), writes: Vec::new() });
                }
                if flow.contains(&AVal::Lit(Literal::Bool(false))) {
                    let next = KConfig { call: *otherwise, env: c.env, time: t2 };
                    out.push(Successor { next: Some(next), writes: Vec::new() });
                }
                out
            }
            CallKind::App { operator, operands } => {
                let f = self.flow(operator, c.env, store);
                let args: Vec<BTreeSet<AVal>> = operands.iter().map(|e| self.flow(e, c.env, store)).collect();
                let mut out = Vec::new();
                for v in f {
                    match v {
                        AVal::Halt if args.len() == 1 => {
                            out.push(Successor { next: None, writes: vec![(KAddr::Halt, args[0].clone())] })
                        }
                        AVal::Clo(l, env) => {
                            let lam = prog.lam(l);
                            if lam.params.len() != args.len() {
                                continue;
                            }
                            let env2 = self.env(env).extend(&lam.params, &t2);
                            let env2 = self.envs.intern(env2);
                            let writes =
                                lam.params.iter().zip(&args).map(|(p, d)| (aalloc(*p, &t2), d.clone())).collect();
                            let next = KConfig { call: lam.body, env: env2, time: t2.clone() };
                            out.push(Successor { next: Some(next), writes });
                        }
                        _ => {}
                    }
                }
                out
            }
        }
    }
}

/// The widened k-CFA result.
pub struct KcfaResult<'p> {
    pub fix: Fixpoint<KcfaMachine<'p>>,
}

/// Least fixpoint of the single-threaded-store transfer function.
pub fn explore_widened<'p>(prog: &'p CpsProgram, k: usize, budget: &Budget) -> KcfaResult<'p> {
    KcfaResult { fix: solve(KcfaMachine::new(prog, k), budget) }
}

impl<'p> KcfaResult<'p> {
    pub fn machine(&self) -> &KcfaMachine<'p> {
        &self.fix.machine
    }

    pub fn halt_flow(&self) -> BTreeSet<AVal> {
        self.fix.store.get(&KAddr::Halt).cloned().unwrap_or_default()
    }

    pub fn flow_at(&self, a: &KAddr) -> BTreeSet<AVal> {
        self.fix.store.get(a).cloned().unwrap_or_default()
    }

    /// Every closure in any flow set: the store, the halt flow and the
    /// operator position of every reached call.
    pub fn closures(&self) -> BTreeSet<(Label, EnvId)> {
        let mut out = BTreeSet::new();
        for (_, vs) in self.fix.store.iter() {
            for v in vs {
                if let AVal::Clo(l, e) = v {
                    out.insert((*l, *e));
                }
            }
        }
        let prog = self.machine().program();
        for c in &self.fix.configs {
            if let CallKind::App { operator: Exp::Lam(l), .. } = &prog.call(c.call).kind {
                out.insert((*l, c.env));
            }
        }
        out
    }

    /// Environments closing `lam`, restricted to its free variables.
    pub fn free_var_contexts(&self, lam: Label) -> BTreeSet<Vec<Contour>> {
        let m = self.machine();
        let free = &m.program().lam(lam).free;
        self.closures()
            .into_iter()
            .filter(|(l, _)| *l == lam)
            .map(|(_, e)| {
                let env = m.env(e);
                free.iter().map(|v| env.get(*v).cloned().unwrap_or_default()).collect()
            })
            .collect()
    }

    pub fn report(&self) -> FlowReport {
        let m = self.machine();
        let prog = m.program();
        let store = &self.fix.store;
        let mut b = ReportBuilder::default();
        for c in &self.fix.configs {
            b.reach(c.call);
            if let CallKind::App { operator, .. } = &prog.call(c.call).kind {
                for v in m.flow(operator, c.env, store) {
                    b.operator(c.call, v.flow_value());
                }
            }
        }
        for (a, vs) in store.iter() {
            match a {
                KAddr::Var(v, t) => b.address(format!("{}@{t}", prog.var_display(*v)), vs.iter().map(AVal::flow_value)),
                KAddr::Halt => b.halt_flow.extend(vs.iter().map(AVal::flow_value)),
            }
        }
        for (l, e) in self.closures() {
            b.closure(l, m.env(e).render(prog));
        }
        let mut r = b.finish("kcfa");
        r.k = Some(m.k);
        r.config_count = self.fix.configs.len();
        r.iterations = self.fix.stats.iterations;
        r.transfers = self.fix.stats.transfers;
        r.store_joins = self.fix.stats.store_joins;
        r.ascent = self.fix.stats.ascent;
        r.partial = self.fix.partial;
        r
    }
}

/// Renders a set of abstract values for reports and messages.
pub fn flow_set(vals: &BTreeSet<AVal>) -> FlowSet {
    vals.iter().map(AVal::flow_value).collect()
}
