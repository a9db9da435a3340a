//! k-CFA for the object language, generic over the environment representation.

use std::collections::{BTreeMap, BTreeSet};
use std::marker::PhantomData;

use super::concrete::{CAddr, CValue, FjOptions, FjState, FjTime, TickMode};
use super::repr::{method_of, AAddr, CollapsedRepr, MapRepr, Repr};
use super::syntax::*;
use crate::context::{CallString, Contour, Label};
use crate::report::{FlowReport, FlowSet, FlowValue, InvocationFlow, ReportBuilder};
use crate::solver::{solve, AbstractMachine, Budget, Fixpoint, MachineStore, StoreView, Successor};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AKont<R: Repr> {
    pub ret: FjVar,
    pub next: Label,
    pub env: R::Env,
    pub parent: AAddr,
    /// Caller context to restore; only used when ticking at call sites.
    pub saved: Option<Contour>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AVal<R: Repr> {
    Obj(ClassId, R::Rec),
    Kont(AKont<R>),
    HaltK,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FjConfig<R: Repr> {
    pub stmt: Label,
    pub env: R::Env,
    pub kont: AAddr,
    pub time: Contour,
}

pub fn aalloc(v: FjVar, t: &Contour) -> AAddr {
    AAddr::Var(v, t.clone())
}

pub fn aalloc_kont(m: MethodId, t: &Contour) -> AAddr {
    AAddr::Kont(m, t.clone())
}

pub type Bindings<R> = Vec<(AAddr, AVal<R>)>;

pub struct FjMachine<'p, R: Repr> {
    prog: &'p FjProgram,
    k: usize,
    opts: FjOptions,
    _repr: PhantomData<R>,
}

type Flow<R> = BTreeSet<AVal<R>>;

impl<'p, R: Repr> FjMachine<'p, R> {
    pub fn new(prog: &'p FjProgram, k: usize, opts: FjOptions) -> Self {
        FjMachine { prog, k, opts, _repr: PhantomData }
    }

    pub fn program(&self) -> &'p FjProgram {
        self.prog
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn options(&self) -> FjOptions {
        self.opts
    }

    fn read(&self, env: &R::Env, slot: Slot, store: &dyn StoreView<AAddr, AVal<R>>) -> Flow<R> {
        R::lookup(env, slot).and_then(|a| store.read(&a).cloned()).unwrap_or_default()
    }

    pub fn flow_value(&self, v: &AVal<R>) -> Option<FlowValue> {
        match v {
            AVal::Obj(c, rec) => {
                let ctx = R::expand_rec(self.prog, *c, rec).first().and_then(|(_, a)| a.time().cloned());
                Some(FlowValue::Obj { class: self.prog.class(*c).name.clone(), ctx })
            }
            _ => None,
        }
    }

    fn tick(&self, l: Label, t: &Contour, invocation: bool) -> Contour {
        if self.opts.tick == TickMode::PerStatement || invocation {
            t.push_truncate(l, self.k)
        } else {
            t.clone()
        }
    }

    fn abstract_time(&self, t: &CallString) -> Contour {
        t.first_k(self.k)
    }

    pub fn abstract_addr(&self, a: &CAddr) -> AAddr {
        match a {
            CAddr::Var(v, t) => AAddr::Var(*v, self.abstract_time(&t.ctx)),
            CAddr::Field(f, t) => AAddr::Field(*f, self.abstract_time(&t.ctx)),
            CAddr::Kont(m, t) => AAddr::Kont(*m, self.abstract_time(&t.ctx)),
            CAddr::Halt => AAddr::HaltKont,
        }
    }

    fn abstract_env(&self, m: MethodId, env: &im::OrdMap<Slot, CAddr>) -> Option<R::Env> {
        R::env_from_map(self.prog, m, env.iter().map(|(s, a)| (*s, self.abstract_addr(a))).collect())
    }

    pub fn abstract_value(&self, v: &CValue) -> Option<AVal<R>> {
        Some(match v {
            CValue::Obj { class, record } => AVal::Obj(
                *class,
                R::rec_from_map(self.prog, *class, record.iter().map(|(f, a)| (*f, self.abstract_addr(a))).collect())?,
            ),
            CValue::Kont { ret, next, env, parent, saved } => AVal::Kont(AKont {
                ret: *ret,
                next: *next,
                env: self.abstract_env(method_of(self.prog, *next), env)?,
                parent: self.abstract_addr(parent),
                saved: (self.opts.tick == TickMode::CallSiteOnly).then(|| self.abstract_time(saved)),
            }),
            CValue::HaltK => AVal::HaltK,
        })
    }

    /// α of a concrete state: its configuration and its store as bindings.
    pub fn abstract_state(&self, s: &FjState) -> Option<(FjConfig<R>, Bindings<R>)> {
        let config = self.abstract_config(s)?;
        let store = s
            .store
            .iter()
            .map(|(a, v)| Some((self.abstract_addr(a), self.abstract_value(v)?)))
            .collect::<Option<Vec<_>>>()?;
        Some((config, store))
    }

    pub fn abstract_config(&self, s: &FjState) -> Option<FjConfig<R>> {
        Some(FjConfig {
            stmt: s.stmt,
            env: self.abstract_env(method_of(self.prog, s.stmt), &s.env)?,
            kont: self.abstract_addr(&s.kont),
            time: self.abstract_fj_time(&s.time),
        })
    }

    pub fn abstract_fj_time(&self, t: &FjTime) -> Contour {
        self.abstract_time(&t.ctx)
    }
}

impl<R: Repr> AbstractMachine for FjMachine<'_, R> {
    type Config = FjConfig<R>;
    type Addr = AAddr;
    type Val = AVal<R>;

    fn initial(&mut self) -> FjConfig<R> {
        let main = self.prog.main();
        let t0 = Contour::empty();
        FjConfig {
            stmt: self.prog.method(main).body[0],
            env: R::entry_env(self.prog, main, None, &t0),
            kont: AAddr::HaltKont,
            time: t0,
        }
    }

    fn initial_store(&mut self) -> Vec<(AAddr, Flow<R>)> {
        vec![(AAddr::HaltKont, BTreeSet::from([AVal::HaltK]))]
    }

    fn step(
        &mut self,
        c: &FjConfig<R>,
        store: &dyn StoreView<AAddr, AVal<R>>,
    ) -> Vec<Successor<FjConfig<R>, AAddr, AVal<R>>> {
        let prog = self.prog;
        let l = c.stmt;
        let (target, expr) = match &prog.stmt(l).kind {
            StmtKind::Return(v) => {
                let d = self.read(&c.env, *v, store);
                let konts = store.read(&c.kont).cloned().unwrap_or_default();
                let t1 = self.tick(l, &c.time, false);
                return konts
                    .into_iter()
                    .filter_map(|k| match k {
                        AVal::HaltK => Some(Successor { next: None, writes: vec![(AAddr::Result, d.clone())] }),
                        AVal::Kont(k) => {
                            let dst = R::lookup(&k.env, Slot::Var(k.ret))?;
                            let time = k.saved.unwrap_or_else(|| t1.clone());
                            let next = FjConfig { stmt: k.next, env: k.env, kont: k.parent, time };
                            Some(Successor { next: Some(next), writes: vec![(dst, d.clone())] })
                        }
                        AVal::Obj(..) => None,
                    })
                    .collect();
            }
            StmtKind::Assign { target, expr } => (*target, expr),
        };
        let Some(dst) = R::lookup(&c.env, Slot::Var(target)) else {
            return Vec::new();
        };
        let t1 = self.tick(l, &c.time, matches!(expr, Expr::Invoke { .. }));
        let succ = prog.succ(l).expect("assignments are never last");
        let fallthrough = FjConfig { stmt: succ, env: c.env.clone(), kont: c.kont.clone(), time: t1.clone() };
        let one = |writes| vec![Successor { next: Some(fallthrough.clone()), writes }];
        match expr {
            Expr::Var(v) => one(vec![(dst, self.read(&c.env, *v, store))]),
            Expr::Cast { class, value } => {
                let mut d = self.read(&c.env, *value, store);
                if self.opts.strict_casts {
                    d.retain(|v| matches!(v, AVal::Obj(c, _) if prog.is_subclass(*c, *class)));
                }
                one(vec![(dst, d)])
            }
            Expr::Field(v, f) => self
                .read(&c.env, *v, store)
                .iter()
                .filter_map(|o| match o {
                    AVal::Obj(class, rec) => {
                        let a = R::field(rec, prog.field_of(*class, f)?)?;
                        let d = store.read(&a).cloned().unwrap_or_default();
                        Some(Successor { next: Some(fallthrough.clone()), writes: vec![(dst.clone(), d)] })
                    }
                    _ => None,
                })
                .collect(),
            Expr::New { class, args } => {
                let ds: Vec<Flow<R>> = args.iter().map(|a| self.read(&c.env, *a, store)).collect();
                let (fields, plan) = prog.constructor_lookup(*class);
                let mut writes: Vec<(AAddr, Flow<R>)> =
                    fields.iter().zip(plan).map(|(f, j)| (AAddr::Field(*f, t1.clone()), ds[*j].clone())).collect();
                writes.push((dst, BTreeSet::from([AVal::Obj(*class, R::record(prog, *class, &t1))])));
                one(writes)
            }
            Expr::Invoke { receiver, method, args } => {
                let d0 = self.read(&c.env, *receiver, store);
                let ds: Vec<Flow<R>> = args.iter().map(|a| self.read(&c.env, *a, store)).collect();
                let classes = d0.iter().filter_map(|v| match v {
                    AVal::Obj(c, _) => Some(*c),
                    _ => None,
                });
                let this = R::lookup(&c.env, *receiver);
                let saved = (self.opts.tick == TickMode::CallSiteOnly).then(|| c.time.clone());
                let kont = AKont { ret: target, next: succ, env: c.env.clone(), parent: c.kont.clone(), saved };
                prog.amethod_lookup(classes, method)
                    .into_iter()
                    .filter(|m| prog.method(*m).params.len() == ds.len())
                    .map(|m| {
                        let decl = prog.method(m);
                        let kaddr = aalloc_kont(m, &t1);
                        let mut writes = vec![(kaddr.clone(), BTreeSet::from([AVal::Kont(kont.clone())]))];
                        writes.extend(decl.params.iter().zip(&ds).map(|(p, d)| (aalloc(*p, &t1), d.clone())));
                        let next = FjConfig {
                            stmt: decl.body[0],
                            env: R::entry_env(prog, m, this.clone(), &t1),
                            kont: kaddr,
                            time: t1.clone(),
                        };
                        Successor { next: Some(next), writes }
                    })
                    .collect()
            }
        }
    }
}

pub struct FjResult<'p, R: Repr> {
    pub fix: Fixpoint<FjMachine<'p, R>>,
}

pub fn explore_widened_fj<'p, R: Repr>(
    prog: &'p FjProgram,
    k: usize,
    opts: FjOptions,
    budget: &Budget,
) -> FjResult<'p, R> {
    FjResult { fix: solve(FjMachine::new(prog, k, opts), budget) }
}

/// Runs the analysis in either representation and returns its report.
pub fn analyze_fj(prog: &FjProgram, k: usize, opts: FjOptions, collapsed: bool, budget: &Budget) -> FlowReport {
    if collapsed {
        explore_widened_fj::<CollapsedRepr>(prog, k, opts, budget).report()
    } else {
        explore_widened_fj::<MapRepr>(prog, k, opts, budget).report()
    }
}

impl<'p, R: Repr> FjResult<'p, R> {
    pub fn machine(&self) -> &FjMachine<'p, R> {
        &self.fix.machine
    }

    pub fn store(&self) -> &MachineStore<FjMachine<'p, R>> {
        &self.fix.store
    }

    pub fn flow_at(&self, a: &AAddr) -> Flow<R> {
        self.fix.store.get(a).cloned().unwrap_or_default()
    }

    pub fn halt_flow(&self) -> FlowSet {
        self.flow_set(&self.flow_at(&AAddr::Result))
    }

    fn flow_set(&self, vals: &Flow<R>) -> FlowSet {
        vals.iter().filter_map(|v| self.machine().flow_value(v)).collect()
    }

    /// Distinct environments under which each method's body is analyzed.
    pub fn method_contexts(&self) -> BTreeMap<MethodId, BTreeSet<Vec<(Slot, AAddr)>>> {
        let prog = self.machine().program();
        let mut out: BTreeMap<MethodId, BTreeSet<_>> = BTreeMap::new();
        for c in &self.fix.configs {
            let m = method_of(prog, c.stmt);
            out.entry(m).or_default().insert(R::expand_env(prog, m, &c.env));
        }
        out
    }

    /// Objects whose field addresses disagree on their time, and
    /// configurations whose variables do; both should be empty.
    pub fn flat_violations(&self) -> usize {
        let prog = self.machine().program();
        let mixed = |times: &mut dyn Iterator<Item = Option<&Contour>>| {
            let ts: BTreeSet<_> = times.collect();
            ts.len() > 1
        };
        let mut n = 0;
        for (_, vs) in self.fix.store.iter() {
            for v in vs {
                if let AVal::Obj(c, rec) = v {
                    let rec = R::expand_rec(prog, *c, rec);
                    n += usize::from(mixed(&mut rec.iter().map(|(_, a)| a.time())));
                }
            }
        }
        for c in &self.fix.configs {
            let env = R::expand_env(prog, method_of(prog, c.stmt), &c.env);
            n += usize::from(mixed(&mut env.iter().filter(|(s, _)| *s != Slot::This).map(|(_, a)| a.time())));
        }
        n
    }

    pub fn report(&self) -> FlowReport {
        let m = self.machine();
        let prog = m.program();
        let mut b = ReportBuilder::default();
        let mut points_to: BTreeMap<String, BTreeMap<String, FlowSet>> = BTreeMap::new();
        for (a, vs) in self.fix.store.iter() {
            match a {
                AAddr::Var(v, t) => {
                    let flows = self.flow_set(vs);
                    let ctx = format!("{}@{t}", prog.method_display(prog.var(*v).method));
                    points_to.entry(ctx).or_default().insert(prog.var_display(*v), flows.clone());
                    b.address(format!("{}@{t}", prog.var_display(*v)), flows);
                }
                AAddr::Field(f, t) => b.address(format!("{}@{t}", prog.field_display(*f)), self.flow_set(vs)),
                AAddr::Result => b.halt_flow.extend(self.flow_set(vs)),
                AAddr::Kont(..) | AAddr::HaltKont => {}
            }
        }
        let mut invocations: BTreeMap<Label, InvocationFlow> = BTreeMap::new();
        for c in &self.fix.configs {
            if let StmtKind::Assign { expr: Expr::Invoke { receiver, method, args }, .. } = &prog.stmt(c.stmt).kind {
                let d0 = m.read(&c.env, *receiver, &self.fix.store);
                let entry = invocations.entry(c.stmt).or_default();
                let classes: Vec<ClassId> = d0
                    .iter()
                    .filter_map(|v| match v {
                        AVal::Obj(c, _) => Some(*c),
                        _ => None,
                    })
                    .collect();
                entry.receivers.extend(self.flow_set(&d0));
                entry.targets.extend(
                    prog.amethod_lookup(classes, method)
                        .into_iter()
                        .filter(|t| prog.method(*t).params.len() == args.len())
                        .map(|t| prog.method_display(t)),
                );
            }
        }
        let mut r = b.finish("fj-kcfa");
        r.invocations = invocations;
        r.inlinable = crate::report::inlinable_calls(&r);
        r.points_to = points_to;
        r.contexts =
            self.method_contexts().into_iter().map(|(meth, envs)| (prog.method_display(meth), envs.len())).collect();
        r.k = Some(m.k());
        if m.options().tick == TickMode::CallSiteOnly {
            r.policy = Some("call-site-only".into());
        }
        r.config_count = self.fix.configs.len();
        r.iterations = self.fix.stats.iterations;
        r.transfers = self.fix.stats.transfers;
        r.store_joins = self.fix.stats.store_joins;
        r.ascent = self.fix.stats.ascent;
        r.partial = self.fix.partial;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fj::{parse_fj, run_fj};
    use crate::solver::{kleene, transfer};

    const TWO_OBJECTS: &str = "
        class A extends Object { A() { super(); } }
        class B extends Object { B() { super(); } }
        class Box extends Object { Object v; Box(Object v) { super(); this.v = v; }
            Object get() { Object r = this.v; return r; } }
        class Id extends Object { Id() { super(); }
            Object id(Object x) { return x; } }
        main {
            A a = new A(); B b = new B();
            Box p = new Box(a); Box q = new Box(b);
            Id i = new Id();
            Object r1 = i.id(a); Object r2 = i.id(b);
            Box s = p; s = q;
            Object t = s.get();
            return r2;
        }
    ";

    fn names(s: &FlowSet) -> Vec<String> {
        s.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn field_read_branches_per_object() {
        let p = parse_fj(TWO_OBJECTS).unwrap();
        let r = explore_widened_fj::<MapRepr>(&p, 1, FjOptions::default(), &Budget::unlimited());
        let get = p.stmts().iter().find(|s| matches!(&s.kind, StmtKind::Assign { expr: Expr::Field(..), .. })).unwrap();
        let c = r.fix.configs.iter().find(|c| c.stmt == get.label).unwrap().clone();
        let mut m = FjMachine::<MapRepr>::new(&p, 1, FjOptions::default());
        let this_flow = m.read(&c.env, Slot::This, &r.fix.store);
        assert_eq!(this_flow.len(), 2);
        assert_eq!(m.step(&c, &r.fix.store).len(), 2);
    }

    #[test]
    fn one_cfa_separates_identity_calls() {
        let p = parse_fj(TWO_OBJECTS).unwrap();
        let one = analyze_fj(&p, 1, FjOptions::default(), true, &Budget::unlimited());
        assert_eq!(names(&one.halt_flow), ["B"]);
        let zero = analyze_fj(&p, 0, FjOptions::default(), true, &Budget::unlimited());
        assert_eq!(names(&zero.halt_flow), ["A", "B"]);
    }

    #[test]
    fn zero_cfa_gives_one_address_per_variable() {
        let p = parse_fj(TWO_OBJECTS).unwrap();
        let r = explore_widened_fj::<MapRepr>(&p, 0, FjOptions::default(), &Budget::unlimited());
        let mut seen = BTreeSet::new();
        for (a, _) in r.store().iter() {
            if let AAddr::Var(v, t) = a {
                assert!(t.is_empty());
                assert!(seen.insert(*v));
            }
        }
    }

    #[test]
    fn continuation_addresses_pair_method_and_time() {
        let t = Contour::from_labels([Label(3)]);
        assert_eq!(aalloc(FjVar(2), &t), AAddr::Var(FjVar(2), t.clone()));
        assert_ne!(aalloc_kont(MethodId(0), &t), aalloc_kont(MethodId(1), &t));
        assert_eq!(aalloc_kont(MethodId(0), &Contour::empty()), AAddr::Kont(MethodId(0), Contour::empty()));
    }

    #[test]
    fn representations_agree_and_records_stay_flat() {
        let p = parse_fj(TWO_OBJECTS).unwrap();
        for k in 0..3 {
            for tick in [TickMode::PerStatement, TickMode::CallSiteOnly] {
                let opts = FjOptions { tick, strict_casts: false };
                let a = explore_widened_fj::<MapRepr>(&p, k, opts, &Budget::unlimited());
                let b = explore_widened_fj::<CollapsedRepr>(&p, k, opts, &Budget::unlimited());
                assert_eq!(a.report().to_json(), b.report().to_json());
                assert_eq!(a.flat_violations(), 0);
            }
        }
    }

    #[test]
    fn worklist_matches_kleene_and_is_a_fixpoint() {
        let p = parse_fj(TWO_OBJECTS).unwrap();
        let w = explore_widened_fj::<CollapsedRepr>(&p, 1, FjOptions::default(), &Budget::unlimited());
        let kl = FjResult {
            fix: kleene(FjMachine::<CollapsedRepr>::new(&p, 1, FjOptions::default()), &Budget::unlimited()),
        };
        assert_eq!(w.report().addresses, kl.report().addresses);
        let mut fix = w.fix;
        let c0 = fix.machine.initial();
        let (c2, s2, joins) = transfer(&mut fix.machine, &c0, &fix.configs, &fix.store);
        assert_eq!((joins, &s2, &c2), (0, &fix.store, &fix.configs));
    }

    #[test]
    fn concrete_trace_abstracts_into_the_result() {
        let p = parse_fj(TWO_OBJECTS).unwrap();
        let trace = run_fj(&p, FjOptions::default(), 1000).unwrap();
        let r = explore_widened_fj::<CollapsedRepr>(&p, 1, FjOptions::default(), &Budget::unlimited());
        for s in &trace.states {
            let (c, binds) = r.machine().abstract_state(s).unwrap();
            assert!(r.fix.configs.contains(&c), "{c:?}");
            for (a, v) in binds {
                assert!(r.flow_at(&a).contains(&v), "{a:?}");
            }
        }
    }

    #[test]
    fn strict_casts_filter_flow() {
        let src = "class A extends Object { A(){super();} } class B extends Object { B(){super();} }
                   main { A a = new A(); B b = new B(); Object o = a; o = b; A c = (A) o; return c; }";
        let p = parse_fj(src).unwrap();
        let loose = analyze_fj(&p, 0, FjOptions::default(), true, &Budget::unlimited());
        assert_eq!(names(&loose.halt_flow), ["A", "B"]);
        let strict =
            analyze_fj(&p, 0, FjOptions { strict_casts: true, ..FjOptions::default() }, true, &Budget::unlimited());
        assert_eq!(names(&strict.halt_flow), ["A"]);
    }
}
