use std::collections::{BTreeMap, BTreeSet};

use cfa_core::bench::{gen_identity, run_matrix, worst_case_family, AnalysisSpec, CellBudget};
use cfa_core::context::{CallString, Label};
use cfa_core::cps::{cps_convert, parse_cps, CallKind, CpsProgram, VarId};
use cfa_core::cps_concrete::{alloc, run_concrete, tick, Time, TimeMode};
use cfa_core::cps_kcfa::{aalloc, abstract_addr, abstract_time, atick, explore_widened};
use cfa_core::exec::Execution;
use cfa_core::mcfa::{explore_widened_mcfa, Policy};
use cfa_core::report::{FlowReport, FlowValue};
use cfa_core::solver::Budget;
use cfa_core::soundness::{check_cps_kcfa, check_mcfa};
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Shape {
    Var(usize),
    Lit(u8),
    Lam(Box<Shape>),
    App(Box<Shape>, Box<Shape>),
    If(Box<Shape>, Box<Shape>, Box<Shape>),
}

fn shape() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![(0usize..4).prop_map(Shape::Var), (0u8..4).prop_map(Shape::Lit)];
    leaf.prop_recursive(5, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| Shape::Lam(Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(f, a)| Shape::App(Box::new(f), Box::new(a))),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, t, e)| Shape::If(
                Box::new(c),
                Box::new(t),
                Box::new(e)
            )),
        ]
    })
}

/// Closed direct-style source; variables refer to enclosing binders.
fn render(s: &Shape, scope: &mut Vec<String>) -> String {
    match s {
        Shape::Var(i) if !scope.is_empty() => scope[scope.len() - 1 - i % scope.len()].clone(),
        Shape::Var(i) => i.to_string(),
        Shape::Lit(3) => "#f".into(),
        Shape::Lit(n) => n.to_string(),
        Shape::Lam(b) => {
            let x = format!("v{}", scope.len());
            scope.push(x.clone());
            let body = render(b, scope);
            scope.pop();
            format!("(lambda ({x}) {body})")
        }
        Shape::App(f, a) => format!("({} {})", render(f, scope), render(a, scope)),
        Shape::If(c, t, e) => format!("(if {} {} {})", render(c, scope), render(t, scope), render(e, scope)),
    }
}

fn program() -> impl Strategy<Value = (String, CpsProgram)> {
    // Wrapping in an application to a known procedure keeps most programs
    // higher-order.
    shape().prop_map(|s| {
        let src = format!("((lambda (g) (g g)) {})", render(&s, &mut Vec::new()));
        let p = cps_convert(&src).expect("generated programs convert");
        (src, p)
    })
}

fn lambdas_only(r: &FlowReport) -> BTreeMap<Label, BTreeSet<FlowValue>> {
    r.labels.iter().map(|(l, f)| (*l, f.operator_flow.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn random_programs_are_sound((src, p) in program()) {
        for d in 0..=1 {
            if let Ok(s) = check_cps_kcfa(&p, d, 400) {
                prop_assert!(s.ok(), "{src} k={d}: {:?}", s.violations);
            }
            for policy in [Policy::TopMFrames, Policy::LastKCalls] {
                if let Ok(s) = check_mcfa(&p, d, policy, 400) {
                    prop_assert!(s.ok(), "{src} m={d} {policy}: {:?}", s.violations);
                }
            }
        }
    }

    #[test]
    fn m0_equals_k0((src, p) in program()) {
        let b = Budget::unlimited();
        let k0 = explore_widened(&p, 0, &b).report();
        for policy in [Policy::TopMFrames, Policy::LastKCalls] {
            let m0 = explore_widened_mcfa(&p, 0, policy, &b).report();
            prop_assert_eq!(&m0.labels, &k0.labels, "{}", src);
            prop_assert_eq!(&m0.halt_flow, &k0.halt_flow, "{}", src);
        }
    }

    #[test]
    fn deeper_contexts_refine_flows((src, p) in program()) {
        let b = Budget::unlimited();
        let k0 = lambdas_only(&explore_widened(&p, 0, &b).report());
        let k1 = lambdas_only(&explore_widened(&p, 1, &b).report());
        for (l, f) in &k1 {
            prop_assert!(k0.get(l).is_some_and(|g| f.is_subset(g)), "{src} at {l}");
        }
        let m1 = lambdas_only(&explore_widened_mcfa(&p, 1, Policy::TopMFrames, &b).report());
        for (l, f) in &m1 {
            prop_assert!(k0.get(l).is_some_and(|g| f.is_subset(g)), "{src} at {l}");
        }
    }

    #[test]
    fn unparse_round_trips((_src, p) in program()) {
        let text = p.unparse(false);
        let q = parse_cps(&text).unwrap();
        prop_assert_eq!(q.unparse(true), p.unparse(true));
    }

    #[test]
    fn reports_are_deterministic((_src, p) in program()) {
        let b = Budget::unlimited();
        prop_assert_eq!(explore_widened(&p, 1, &b).report().to_json(), explore_widened(&p, 1, &b).report().to_json());
    }

    #[test]
    fn simulation_lemmas(labels in prop::collection::vec(0u32..32, 0..12), call in 0u32..32, v in 0u32..8, k in 0usize..4) {
        let t = Time::Calls(labels.iter().fold(CallString::empty(), |c, l| c.push(Label(*l))));
        let that = abstract_time(&t, k).unwrap();
        prop_assert_eq!(abstract_time(&tick(Label(call), &t), k), Some(atick(Label(call), &that, k)));
        prop_assert_eq!(abstract_addr(&alloc(VarId(v), &t), k), Some(aalloc(VarId(v), &that)));
    }
}

#[test]
fn cost_is_monotone_in_n() {
    let analyses: Vec<AnalysisSpec> =
        ["kcfa:0", "kcfa:1", "mcfa:1", "polykcfa:1", "mcfa:2"].iter().map(|s| s.parse().unwrap()).collect();
    let rows = run_matrix(&worst_case_family(1..=5), &analyses, &CellBudget::default(), Execution::Parallel);
    for a in &analyses {
        let ts: Vec<u64> =
            rows.iter().filter(|r| r.analysis == a.name() && r.k_or_m == a.depth()).map(|r| r.transfers).collect();
        assert_eq!(ts.len(), 5);
        assert!(ts.windows(2).all(|w| w[0] <= w[1]), "{a}: {ts:?}");
    }
}

#[test]
fn sequential_and_parallel_matrices_agree() {
    let analyses: Vec<AnalysisSpec> = ["kcfa:1", "mcfa:1", "fj-kcfa:1"].iter().map(|s| s.parse().unwrap()).collect();
    let strip = |mut rows: Vec<cfa_core::bench::MetricsRow>| {
        rows.iter_mut().for_each(|r| r.time_ms = 0.0);
        rows
    };
    let ps = worst_case_family(1..=4);
    let seq = run_matrix(&ps, &analyses, &CellBudget::default(), Execution::Sequential);
    let par = run_matrix(&ps, &analyses, &CellBudget::default(), Execution::Parallel);
    assert_eq!(strip(seq), strip(par));
    assert!(run_matrix(&[], &analyses, &CellBudget::default(), Execution::Parallel).is_empty());
}

#[test]
fn top_frames_refine_last_calls_on_identity() {
    let b = Budget::unlimited();
    for with in [false, true] {
        let p = cps_convert(&gen_identity(with)).unwrap();
        let top = explore_widened_mcfa(&p, 1, Policy::TopMFrames, &b).report();
        let last = explore_widened_mcfa(&p, 1, Policy::LastKCalls, &b).report();
        for (l, f) in &top.labels {
            assert!(f.operator_flow.is_subset(&last.labels[l].operator_flow));
        }
        assert!(top.halt_flow.is_subset(&last.halt_flow));
        if with {
            assert!(top.halt_flow.len() < last.halt_flow.len());
        }
    }
}

/// Call sites whose operator is one λ-term in every transition of a complete
/// concrete run.
fn concrete_inlinable(p: &CpsProgram) -> usize {
    let trace = run_concrete(p, TimeMode::Calls, 1_000_000).unwrap();
    assert!(trace.halt_value().is_some());
    let body_of: BTreeMap<Label, Label> = p.lambdas().map(|l| (l.body, l.label)).collect();
    let mut called: BTreeMap<Label, BTreeSet<Option<Label>>> = BTreeMap::new();
    for (i, s) in trace.states.iter().enumerate() {
        if matches!(p.call(s.call).kind, CallKind::If { .. }) {
            continue;
        }
        let target = trace.states.get(i + 1).map(|n| body_of[&n.call]);
        called.entry(s.call).or_default().insert(target);
    }
    called.values().filter(|t| t.len() == 1 && t.iter().all(Option::is_some)).count()
}

#[test]
fn identity_inlining() {
    // Frozen from `concrete_inlinable`.
    const GOLDEN: [usize; 2] = [3, 6];
    let b = Budget::unlimited();
    for (i, with) in [false, true].into_iter().enumerate() {
        let p = cps_convert(&gen_identity(with)).unwrap();
        assert_eq!(concrete_inlinable(&p), GOLDEN[i]);
        let m1 = explore_widened_mcfa(&p, 1, Policy::TopMFrames, &b).report();
        assert_eq!(m1.inlinable, GOLDEN[i]);
        let k0 = explore_widened(&p, 0, &b).report();
        assert!(k0.inlinable <= GOLDEN[i]);
    }
}
