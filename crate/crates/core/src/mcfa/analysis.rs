//! m-CFA over flat environments.

use std::collections::BTreeSet;

use super::{FValue, FlatEnvC, Policy};
use crate::context::Contour;
use crate::cps::{CallKind, CpsProgram, Exp, Label, LamKind, Literal, VarId};
use crate::report::{FlowReport, FlowValue, ReportBuilder};
use crate::solver::{solve, AbstractMachine, Budget, Fixpoint, StoreView, Successor};

/// `n̂ew(call, ρ̂, lam, ρ̂′)`.
pub fn new_abstract(
    call: Label,
    env: &Contour,
    kind: LamKind,
    closure_env: &Contour,
    m: usize,
    policy: Policy,
) -> Contour {
    match (policy, kind) {
        (Policy::TopMFrames, LamKind::Continuation) => closure_env.clone(),
        _ => env.push_truncate(call, m),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MAddr {
    Var(VarId, Contour),
    Halt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MVal {
    Clo(Label, Contour),
    Lit(Literal),
    Halt,
}

impl MVal {
    pub fn flow_value(&self) -> FlowValue {
        match self {
            MVal::Clo(l, _) => FlowValue::Lam(*l),
            MVal::Lit(lit) => FlowValue::Lit(*lit),
            MVal::Halt => FlowValue::Halt,
        }
    }

    /// α for concrete flat values: drop the serial, keep the top m frames.
    pub fn abstract_of(v: &FValue, m: usize) -> MVal {
        match v {
            FValue::Clo(l, e) => MVal::Clo(*l, e.frames.first_k(m)),
            FValue::Lit(lit) => MVal::Lit(*lit),
            FValue::Halt => MVal::Halt,
        }
    }
}

pub fn abstract_env(env: &FlatEnvC, m: usize) -> Contour {
    env.frames.first_k(m)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MConfig {
    pub call: Label,
    pub env: Contour,
}

pub struct McfaMachine<'p> {
    prog: &'p CpsProgram,
    m: usize,
    policy: Policy,
}

impl<'p> McfaMachine<'p> {
    pub fn new(prog: &'p CpsProgram, m: usize, policy: Policy) -> Self {
        McfaMachine { prog, m, policy }
    }

    pub fn program(&self) -> &'p CpsProgram {
        self.prog
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn flow(&self, e: &Exp, env: &Contour, store: &dyn StoreView<MAddr, MVal>) -> BTreeSet<MVal> {
        match e {
            Exp::Var(v) => store.read(&MAddr::Var(*v, env.clone())).cloned().unwrap_or_default(),
            Exp::Lam(l) => BTreeSet::from([MVal::Clo(*l, env.clone())]),
            Exp::Lit(lit) => BTreeSet::from([MVal::Lit(*lit)]),
            Exp::Halt => BTreeSet::from([MVal::Halt]),
        }
    }
}

impl AbstractMachine for McfaMachine<'_> {
    type Config = MConfig;
    type Addr = MAddr;
    type Val = MVal;

    fn initial(&mut self) -> MConfig {
        MConfig { call: self.prog.root(), env: Contour::empty() }
    }

    fn step(&mut self, c: &MConfig, store: &dyn StoreView<MAddr, MVal>) -> Vec<Successor<MConfig, MAddr, MVal>> {
        let prog = self.prog;
        match &prog.call(c.call).kind {
            CallKind::If { test, then, otherwise } => {
                let flow = self.flow(test, &c.env, store);
                let falsy = MVal::Lit(Literal::Bool(false));
                let mut out = Vec::new();
                if flow.iter().any(|v| *v != falsy) {
                    out.push(Successor { next: Some(MConfig { call: *then, env: c.env.clone() }), writes: vec![] });
                }
                if flow.contains(&falsy) {
                    out.push(Successor {
                        next: Some(MConfig { call: *otherwise, env: c.env.clone() }),
                        writes: vec![],
                    });
                }
                out
            }
            CallKind::App { operator, operands } => {
                let f = self.flow(operator, &c.env, store);
                let args: Vec<_> = operands.iter().map(|e| self.flow(e, &c.env, store)).collect();
                let mut out = Vec::new();
                for v in f {
                    match v {
                        MVal::Halt if args.len() == 1 => {
                            out.push(Successor { next: None, writes: vec![(MAddr::Halt, args[0].clone())] })
                        }
                        MVal::Clo(l, closure_env) => {
                            let lam = prog.lam(l);
                            if lam.params.len() != args.len() {
                                continue;
                            }
                            let env2 = new_abstract(c.call, &c.env, lam.kind, &closure_env, self.m, self.policy);
                            let mut writes: Vec<_> = lam
                                .params
                                .iter()
                                .zip(&args)
                                .map(|(p, d)| (MAddr::Var(*p, env2.clone()), d.clone()))
                                .collect();
                            for x in &lam.free {
                                let d = store.read(&MAddr::Var(*x, closure_env.clone())).cloned().unwrap_or_default();
                                writes.push((MAddr::Var(*x, env2.clone()), d));
                            }
                            out.push(Successor { next: Some(MConfig { call: lam.body, env: env2 }), writes });
                        }
                        _ => {}
                    }
                }
                out
            }
        }
    }
}

pub struct McfaResult<'p> {
    pub fix: Fixpoint<McfaMachine<'p>>,
}

pub fn explore_widened_mcfa<'p>(prog: &'p CpsProgram, m: usize, policy: Policy, budget: &Budget) -> McfaResult<'p> {
    McfaResult { fix: solve(McfaMachine::new(prog, m, policy), budget) }
}

impl<'p> McfaResult<'p> {
    pub fn machine(&self) -> &McfaMachine<'p> {
        &self.fix.machine
    }

    pub fn halt_flow(&self) -> BTreeSet<MVal> {
        self.fix.store.get(&MAddr::Halt).cloned().unwrap_or_default()
    }

    pub fn flow_at(&self, a: &MAddr) -> BTreeSet<MVal> {
        self.fix.store.get(a).cloned().unwrap_or_default()
    }

    pub fn closures(&self) -> BTreeSet<(Label, Contour)> {
        let mut out = BTreeSet::new();
        for (_, vs) in self.fix.store.iter() {
            for v in vs {
                if let MVal::Clo(l, e) = v {
                    out.insert((*l, e.clone()));
                }
            }
        }
        let prog = self.machine().program();
        for c in &self.fix.configs {
            if let CallKind::App { operator: Exp::Lam(l), .. } = &prog.call(c.call).kind {
                out.insert((*l, c.env.clone()));
            }
        }
        out
    }

    /// Closures whose free variables are missing from the store at the
    /// closure's own environment. Empty at a fixpoint.
    pub fn flat_contract_violations(&self) -> Vec<(Label, Contour, VarId)> {
        let prog = self.machine().program();
        let mut out = Vec::new();
        for (l, e) in self.closures() {
            for x in &prog.lam(l).free {
                if self.fix.store.get(&MAddr::Var(*x, e.clone())).is_none() {
                    out.push((l, e.clone(), *x));
                }
            }
        }
        out
    }

    pub fn report(&self) -> FlowReport {
        let mm = self.machine();
        let prog = mm.program();
        let mut b = ReportBuilder::default();
        for c in &self.fix.configs {
            b.reach(c.call);
            if let CallKind::App { operator, .. } = &prog.call(c.call).kind {
                for v in mm.flow(operator, &c.env, &self.fix.store) {
                    b.operator(c.call, v.flow_value());
                }
            }
        }
        for (a, vs) in self.fix.store.iter() {
            match a {
                MAddr::Var(v, e) => b.address(format!("{}@{e}", prog.var_display(*v)), vs.iter().map(MVal::flow_value)),
                MAddr::Halt => b.halt_flow.extend(vs.iter().map(MVal::flow_value)),
            }
        }
        for (l, e) in self.closures() {
            b.closure(l, e.to_string());
        }
        let name = match mm.policy {
            Policy::TopMFrames => "mcfa",
            Policy::LastKCalls => "polykcfa",
        };
        let mut r = b.finish(name);
        r.m = Some(mm.m);
        r.policy = Some(mm.policy.to_string());
        r.config_count = self.fix.configs.len();
        r.iterations = self.fix.stats.iterations;
        r.transfers = self.fix.stats.transfers;
        r.store_joins = self.fix.stats.store_joins;
        r.ascent = self.fix.stats.ascent;
        r.partial = self.fix.partial;
        r
    }
}
