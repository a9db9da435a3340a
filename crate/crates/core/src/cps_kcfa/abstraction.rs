//! The abstraction map from concrete (call-string timed) states.

use std::collections::{BTreeMap, BTreeSet};

use super::{aalloc, ABEnv, AVal, EnvId, KAddr, KConfig, KcfaMachine};
use crate::context::Contour;
use crate::cps_concrete::{Addr, BEnv, State, Time, Value};

/// `α(t) = first_k(t)`; only call-string times have an abstraction.
pub fn abstract_time(t: &Time, k: usize) -> Option<Contour> {
    match t {
        Time::Calls(c) => Some(c.first_k(k)),
        Time::Nat(_) => None,
    }
}

pub fn abstract_addr(a: &Addr, k: usize) -> Option<KAddr> {
    Some(aalloc(a.var, &abstract_time(&a.time, k)?))
}

/// α of a concrete state: the configuration plus α(σ), in which concrete
/// addresses with the same abstraction have their values joined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AState {
    pub config: KConfig,
    pub store: BTreeMap<KAddr, BTreeSet<AVal>>,
}

impl KcfaMachine<'_> {
    pub fn abstract_benv(&self, env: &BEnv) -> Option<ABEnv> {
        let b = env.iter().map(|(v, a)| Some((*v, abstract_time(&a.time, self.k)?))).collect::<Option<Vec<_>>>()?;
        Some(ABEnv::from_bindings(b))
    }

    /// Abstracts a concrete environment, interning it.
    pub fn abstract_env(&mut self, env: &BEnv) -> Option<EnvId> {
        let a = self.abstract_benv(env)?;
        Some(self.intern_env(a))
    }

    /// Abstracts a concrete value without growing the environment table;
    /// `None` if its environment was never seen by the analysis.
    pub fn lookup_value(&self, v: &Value) -> Option<AVal> {
        Some(match v {
            Value::Clo(l, env) => AVal::Clo(*l, self.find_env(&self.abstract_benv(env)?)?),
            Value::Lit(lit) => AVal::Lit(*lit),
            Value::Halt => AVal::Halt,
        })
    }

    pub fn abstract_value(&mut self, v: &Value) -> Option<AVal> {
        Some(match v {
            Value::Clo(l, env) => AVal::Clo(*l, self.abstract_env(env)?),
            Value::Lit(lit) => AVal::Lit(*lit),
            Value::Halt => AVal::Halt,
        })
    }
}

pub fn abstract_state(m: &mut KcfaMachine<'_>, s: &State) -> Option<AState> {
    let k = m.k();
    let config = KConfig { call: s.call, env: m.abstract_env(&s.env)?, time: abstract_time(&s.time, k)? };
    let mut store: BTreeMap<KAddr, BTreeSet<AVal>> = BTreeMap::new();
    for (a, v) in s.store.iter() {
        store.entry(abstract_addr(a, k)?).or_default().insert(m.abstract_value(v)?);
    }
    Some(AState { config, store })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{CallString, Label};
    use crate::cps::{parse_cps, Literal, VarId};
    use crate::cps_concrete::{inject, Store, TimeMode};

    fn calls(xs: &[u32]) -> Time {
        let mut c = CallString::empty();
        for &x in xs.iter().rev() {
            c = c.push(Label(x));
        }
        Time::Calls(c)
    }

    #[test]
    fn injected_state_abstracts_to_bottom() {
        let p = parse_cps("((lambda (k) (k k)) halt)").unwrap();
        let mut m = KcfaMachine::new(&p, 1);
        let a = abstract_state(&mut m, &inject(&p, TimeMode::Calls)).unwrap();
        assert_eq!(a.config.call, p.root());
        assert_eq!(m.env(a.config.env), &ABEnv::default());
        assert_eq!(a.config.time, Contour::empty());
        assert!(a.store.is_empty());
    }

    #[test]
    fn time_abstraction_keeps_the_most_recent_calls() {
        assert_eq!(abstract_time(&calls(&[3, 2, 1]), 1), Some(Contour::from_labels([Label(3)])));
        assert_eq!(abstract_time(&Time::Nat(4), 1), None);
    }

    #[test]
    fn store_abstraction_joins_addresses_with_a_shared_suffix() {
        let p = parse_cps("((lambda (x) (halt x)) 1)").unwrap();
        let mut m = KcfaMachine::new(&p, 1);
        let x = VarId(0);
        let a1 = Addr { var: x, time: calls(&[5, 1]) };
        let a2 = Addr { var: x, time: calls(&[5, 2]) };
        let store: Store = [(a1, Value::Lit(Literal::Int(0))), (a2, Value::Lit(Literal::Int(1)))].into_iter().collect();
        let s = State { call: p.root(), env: BEnv::new(), store, time: calls(&[]) };
        let a = abstract_state(&mut m, &s).unwrap();
        let key = KAddr::Var(x, Contour::from_labels([Label(5)]));
        assert_eq!(a.store[&key], BTreeSet::from([AVal::Lit(Literal::Int(0)), AVal::Lit(Literal::Int(1))]));
        assert_eq!(a.store.len(), 1);
    }
}
