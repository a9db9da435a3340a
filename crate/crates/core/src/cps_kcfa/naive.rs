//! Naive exploration: the reachable set of abstract states, each carrying
//! its own store.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use indexmap::IndexSet;

use super::{AVal, KAddr, KConfig, KcfaMachine};
use crate::cps::CpsProgram;
use crate::intern::{Id, Interner};
use crate::solver::{AbstractMachine, StoreView};

pub const DEFAULT_NAIVE_BUDGET: usize = 1_000_000;

/// A per-state abstract store.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NaiveStore(pub BTreeMap<KAddr, BTreeSet<AVal>>);

impl StoreView<KAddr, AVal> for NaiveStore {
    fn read(&self, a: &KAddr) -> Option<&BTreeSet<AVal>> {
        self.0.get(a)
    }
}

pub struct NaiveResult<'p> {
    pub machine: KcfaMachine<'p>,
    pub stores: Interner<Arc<NaiveStore>>,
    /// Reachable states as (configuration, store id).
    pub states: IndexSet<(KConfig, Id)>,
    pub halt_flow: BTreeSet<AVal>,
    /// Applications of f̂ until f̂(S) = S.
    pub iterations: u64,
    /// Set when the state budget ran out first.
    pub partial: bool,
}

impl NaiveResult<'_> {
    pub fn store(&self, id: Id) -> &NaiveStore {
        self.stores.resolve(id)
    }

    /// Join of every state's store.
    pub fn joined_store(&self) -> BTreeMap<KAddr, BTreeSet<AVal>> {
        let mut out: BTreeMap<KAddr, BTreeSet<AVal>> = BTreeMap::new();
        for (_, s) in &self.states {
            for (a, vs) in &self.store(*s).0 {
                out.entry(a.clone()).or_default().extend(vs.iter().cloned());
            }
        }
        if !self.halt_flow.is_empty() {
            out.entry(KAddr::Halt).or_default().extend(self.halt_flow.iter().cloned());
        }
        out
    }
}

/// Breadth-first computation of the least fixpoint of
/// f̂(S) = {ς̂₀} ∪ {ς̂′ : ς̂ ∈ S, ς̂ ⤳ ς̂′}, stopping once `budget` states exist.
pub fn explore_naive(prog: &CpsProgram, k: usize, budget: usize) -> NaiveResult<'_> {
    let mut machine = KcfaMachine::new(prog, k);
    let mut stores: Interner<Arc<NaiveStore>> = Interner::default();
    let c0 = machine.initial();
    let s0 = stores.intern(Arc::new(NaiveStore::default()));
    let mut states = IndexSet::new();
    states.insert((c0, s0));
    let mut halt_flow = BTreeSet::new();
    let mut frontier = vec![0usize];
    let mut iterations = 1;
    let mut partial = false;
    'outer: while !frontier.is_empty() {
        iterations += 1;
        let mut next = Vec::new();
        for i in frontier {
            let (config, sid) = states[i].clone();
            let store = stores.resolve(sid).clone();
            for succ in machine.step(&config, &*store) {
                let Some(c2) = succ.next else {
                    for (_, vs) in succ.writes {
                        halt_flow.extend(vs);
                    }
                    continue;
                };
                let mut s2 = (*store).clone();
                for (a, vs) in succ.writes {
                    s2.0.entry(a).or_default().extend(vs);
                }
                let id = stores.intern(Arc::new(s2));
                let (j, fresh) = states.insert_full((c2, id));
                if fresh {
                    next.push(j);
                    if states.len() >= budget {
                        partial = true;
                        break 'outer;
                    }
                }
            }
        }
        frontier = next;
    }
    NaiveResult { machine, stores, states, halt_flow, iterations, partial }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Contour;
    use crate::cps::{parse_cps, Literal};
    use crate::cps_kcfa::{explore_widened, AVal};
    use crate::solver::Budget;

    #[test]
    fn trivial_program_converges_quickly() {
        let p = parse_cps("((lambda (k) (k k)) halt)").unwrap();
        let r = explore_naive(&p, 0, DEFAULT_NAIVE_BUDGET);
        assert!(!r.partial);
        assert!(r.iterations <= 4, "{}", r.iterations);
        assert_eq!(r.states.len(), 2);
        assert_eq!(r.halt_flow, BTreeSet::from([AVal::Halt]));
    }

    #[test]
    fn widened_store_covers_naive_stores() {
        let p = crate::cps::cps_convert("(define (id x) x) (define (f g) (g 1)) (f id) (id 2)").unwrap();
        for k in 0..3 {
            let n = explore_naive(&p, k, DEFAULT_NAIVE_BUDGET);
            let w = explore_widened(&p, k, &Budget::unlimited());
            for (a, vs) in n.joined_store() {
                let got = w.flow_at(&a);
                // Closure environments are interned per run; compare rendered flows.
                let want: BTreeSet<_> = vs.iter().map(AVal::flow_value).collect();
                let have: BTreeSet<_> = got.iter().map(AVal::flow_value).collect();
                assert!(want.is_subset(&have), "k={k} {a:?}");
            }
        }
    }

    #[test]
    fn budget_stops_divergent_exploration() {
        let p = parse_cps("((lambda (f) (f f 0)) (lambda (g n) (g g n)))").unwrap();
        let r = explore_naive(&p, 1, 3);
        assert!(r.states.len() <= 3);
        let _ = (Contour::empty(), Literal::Int(0));
    }
}
