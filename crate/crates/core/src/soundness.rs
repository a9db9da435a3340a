//! Checks that bounded concrete runs abstract into widened results, and
//! randomized checks of the time and allocator simulation lemmas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::{CallString, Contour, Label};
use crate::cps::{CpsProgram, VarId};
use crate::cps_concrete::{alloc, run_concrete, tick, ConcreteError, Time, TimeMode, Trace};
use crate::cps_kcfa::{aalloc, abstract_addr, abstract_time, atick, explore_widened, KAddr, KConfig, KcfaResult};
use crate::fj::{explore_widened_fj, AAddr, FjOptions, FjProgram, FjRuntimeError, Repr};
use crate::mcfa::{abstract_env, explore_widened_mcfa, FAddr, MAddr, MConfig, MVal, Policy};
use crate::solver::Budget;

pub const TRACE_STEPS: usize = 10_000;

/// How a concrete run related to the analysis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Soundness {
    /// Concrete states checked.
    pub states: usize,
    /// One line per missing configuration or store binding.
    pub violations: Vec<String>,
}

impl Soundness {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs `steps` concrete steps with call-string times and checks every
/// state against k-CFA.
pub fn check_cps_kcfa(prog: &CpsProgram, k: usize, steps: usize) -> Result<Soundness, ConcreteError> {
    let trace = run_concrete(prog, TimeMode::Calls, steps)?;
    Ok(check_kcfa_trace(prog, &trace, &explore_widened(prog, k, &Budget::unlimited()), k))
}

pub fn check_kcfa_trace(prog: &CpsProgram, trace: &Trace, r: &KcfaResult<'_>, k: usize) -> Soundness {
    let m = r.machine();
    let mut out = Soundness { states: trace.states.len(), violations: Vec::new() };
    let mut check = |i: usize, a: &crate::cps_concrete::Addr, v: &crate::cps_concrete::Value| {
        let (Some(aa), Some(av)) = (abstract_addr(a, k), m.lookup_value(v)) else {
            out.violations.push(format!("state {i}: value of {} has an unseen environment", prog.var_display(a.var)));
            return;
        };
        if !r.flow_at(&aa).contains(&av) {
            out.violations.push(format!("state {i}: {aa:?} misses {av:?}"));
        }
    };
    for (a, v) in trace.states[0].store.iter() {
        check(0, a, v);
    }
    for (i, w) in trace.writes.iter().enumerate() {
        for (a, v) in w {
            check(i, a, v);
        }
    }
    for (i, s) in trace.states.iter().enumerate() {
        let env = m.abstract_benv(&s.env).and_then(|e| m.find_env(&e));
        let time = abstract_time(&s.time, k);
        match (env, time) {
            (Some(env), Some(time)) if r.fix.configs.contains(&KConfig { call: s.call, env, time: time.clone() }) => {}
            _ => out.violations.push(format!("state {i}: configuration at call {} not reached", s.call)),
        }
    }
    if let Some(v) = trace.halt_value() {
        if !m.lookup_value(v).is_some_and(|av| r.flow_at(&KAddr::Halt).contains(&av)) {
            out.violations.push(format!("halt value {v} missing"));
        }
    }
    out
}

/// The same check for flat closures and m-CFA under `policy`.
pub fn check_mcfa(prog: &CpsProgram, m: usize, policy: Policy, steps: usize) -> Result<Soundness, ConcreteError> {
    let trace = crate::mcfa::run_flat(prog, policy, steps)?;
    let r = explore_widened_mcfa(prog, m, policy, &Budget::unlimited());
    let mut out = Soundness { states: trace.states.len(), violations: Vec::new() };
    let addr = |a: &FAddr| MAddr::Var(a.var, abstract_env(&a.env, m));
    for (i, w) in trace.writes.iter().enumerate() {
        for (a, v) in w {
            let (aa, av) = (addr(a), MVal::abstract_of(v, m));
            if !r.flow_at(&aa).contains(&av) {
                out.violations.push(format!("state {i}: {aa:?} misses {av:?}"));
            }
        }
    }
    for (i, s) in trace.states.iter().enumerate() {
        if !r.fix.configs.contains(&MConfig { call: s.call, env: abstract_env(&s.env, m) }) {
            out.violations.push(format!("state {i}: configuration at call {} not reached", s.call));
        }
    }
    if let Some(v) = trace.halt_value() {
        if !r.flow_at(&MAddr::Halt).contains(&MVal::abstract_of(v, m)) {
            out.violations.push("halt value missing".into());
        }
    }
    Ok(out)
}

/// The same check for the object machine in representation `R`.
pub fn check_fj<R: Repr>(
    prog: &FjProgram,
    k: usize,
    opts: FjOptions,
    steps: usize,
) -> Result<Soundness, FjRuntimeError> {
    let trace = crate::fj::run_fj(prog, opts, steps)?;
    let r = explore_widened_fj::<R>(prog, k, opts, &Budget::unlimited());
    let m = r.machine();
    let mut out = Soundness { states: trace.states.len(), violations: Vec::new() };
    let mut check = |i: usize, a: &crate::fj::CAddr, v: &crate::fj::CValue| {
        let aa = m.abstract_addr(a);
        match m.abstract_value(v) {
            Some(av) if r.flow_at(&aa).contains(&av) => {}
            av => out.violations.push(format!("state {i}: {aa:?} misses {av:?}")),
        }
    };
    for (a, v) in trace.states[0].store.iter() {
        check(0, a, v);
    }
    for (i, w) in trace.writes.iter().enumerate() {
        for (a, v) in w {
            check(i, a, v);
        }
    }
    for (i, s) in trace.states.iter().enumerate() {
        if !m.abstract_config(s).is_some_and(|c| r.fix.configs.contains(&c)) {
            out.violations.push(format!("state {i}: configuration at statement {} not reached", s.stmt));
        }
    }
    if let Some(v) = trace.halt_value() {
        if !m.abstract_value(v).is_some_and(|av| r.flow_at(&AAddr::Result).contains(&av)) {
            out.violations.push("halt value missing".into());
        }
    }
    Ok(out)
}

/// Draws `instances` random (call, time, variable) triples with
/// `α(t) ⊑ t̂` and counts failures of the tick and alloc simulation lemmas.
pub fn check_lemmas(k: usize, instances: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..instances {
        let len = rng.random_range(0..=2 * k + 4);
        let mut c = CallString::empty();
        for _ in 0..len {
            c = c.push(Label(rng.random_range(0..16)));
        }
        let t = Time::Calls(c);
        // Abstract times are flat: α(t) ⊑ t̂ holds only for t̂ = α(t).
        let that: Contour = abstract_time(&t, k).expect("call-string time");
        let call = Label(rng.random_range(0..16));
        let v = VarId(rng.random_range(0..8));
        if abstract_time(&tick(call, &t), k).as_ref() != Some(&atick(call, &that, k)) {
            failures += 1;
        }
        let a: Option<KAddr> = abstract_addr(&alloc(v, &t), k);
        if a != Some(aalloc(v, &that)) {
            failures += 1;
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{cps_corpus, fj_corpus};
    use crate::fj::{CollapsedRepr, MapRepr, TickMode};

    #[test]
    fn lemmas_hold() {
        for k in 0..4 {
            assert_eq!(check_lemmas(k, 500, k as u64), 0);
        }
    }

    #[test]
    fn corpus_is_sound_for_short_traces() {
        for (name, p) in cps_corpus() {
            for k in 0..2 {
                let s = check_cps_kcfa(&p, k, 300).unwrap();
                assert!(s.ok(), "{name} k={k}: {:?}", &s.violations[..s.violations.len().min(3)]);
                for policy in [Policy::TopMFrames, Policy::LastKCalls] {
                    let s = check_mcfa(&p, k, policy, 300).unwrap();
                    assert!(s.ok(), "{name} m={k} {policy}: {:?}", &s.violations[..s.violations.len().min(3)]);
                }
            }
        }
        for (name, p) in fj_corpus() {
            for k in 0..2 {
                for tick in [TickMode::PerStatement, TickMode::CallSiteOnly] {
                    let opts = FjOptions { tick, strict_casts: false };
                    let s = check_fj::<CollapsedRepr>(&p, k, opts, 300).unwrap();
                    assert!(s.ok(), "{name} k={k}: {:?}", &s.violations[..s.violations.len().min(3)]);
                    assert!(check_fj::<MapRepr>(&p, k, opts, 300).unwrap().ok());
                }
            }
        }
    }

    #[test]
    fn a_weakened_result_is_caught() {
        let p = crate::cps::cps_convert("(define (id x) x) (id (lambda (y) y))").unwrap();
        let trace = run_concrete(&p, TimeMode::Calls, 100).unwrap();
        let mut r = explore_widened(&p, 1, &Budget::unlimited());
        assert!(check_kcfa_trace(&p, &trace, &r, 1).ok());
        r.fix.configs.pop();
        assert!(!check_kcfa_trace(&p, &trace, &r, 1).ok());
    }
}
