//! Benchmark families, the analysis matrix and its metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::context::Label;
use crate::cps::{cps_convert, CpsProgram, LamKind};
use crate::cps_kcfa::explore_widened;
use crate::exec::{map_items, Execution};
use crate::fj::{analyze_fj, FjOptions, FjProgram, TickMode};
use crate::mcfa::{explore_widened_mcfa, Policy};
use crate::report::{FlowReport, FlowSet};
use crate::solver::Budget;

/// The nested program whose innermost λ-term `(lambda (z) (z x1 ... xn))`
/// is closed over 2ⁿ environments by 1-CFA, in direct style.
pub fn gen_worst_case_source(n: usize) -> String {
    assert!(n >= 1, "worst case needs n ≥ 1");
    fn level(i: usize, n: usize) -> String {
        if i > n {
            let xs: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
            return format!("(lambda (z) (z {}))", xs.join(" "));
        }
        format!("((lambda (f{i}) (f{i} 0) (f{i} 1)) (lambda (x{i}) {}))", level(i + 1, n))
    }
    level(1, n)
}

pub fn gen_worst_case(n: usize) -> CpsProgram {
    cps_convert(&gen_worst_case_source(n)).expect("generated programs convert")
}

/// The innermost λ-term of a worst-case program.
pub fn worst_case_inner(prog: &CpsProgram) -> Label {
    prog.lambda_binding("z").expect("worst-case programs bind z")
}

/// An object program with explicit closures and its functional twin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairedClosure {
    pub fj: String,
    pub scheme: String,
}

pub fn gen_paired_closure(n: usize, m: usize) -> PairedClosure {
    assert!(n >= 1 && m >= 1, "paired closure needs N, M ≥ 1");
    let mut fj = String::new();
    for i in 1..=n {
        fj += &format!("class OX{i} extends Object {{ OX{i}() {{ super(); }} }}\n");
    }
    for j in 1..=m {
        fj += &format!("class OY{j} extends Object {{ OY{j}() {{ super(); }} }}\n");
    }
    fj += "class ClosureXY extends Object {
    Object x; Object y;
    ClosureXY(Object x, Object y) { super(); this.x = x; this.y = y; }
    Object baz() { Object r = this.x; Object s = this.y; return r; }
}
class ClosureX extends Object {
    Object x;
    ClosureX(Object x) { super(); this.x = x; }
    Object apply(Object y) { Object x = this.x; ClosureXY c = new ClosureXY(x, y); Object r = c.baz(); return r; }
}
class Driver extends Object {
    Driver() { super(); }
    Object applyAll(ClosureX f) {\n";
    for j in 1..=m {
        fj += &format!("        OY{j} y{j} = new OY{j}(); Object r{j} = f.apply(y{j});\n");
    }
    fj += &format!("        return r{m};\n    }}\n}}\nmain {{\n    Driver d = new Driver();\n");
    for i in 1..=n {
        fj += &format!(
            "    OX{i} x{i} = new OX{i}(); ClosureX f{i} = new ClosureX(x{i}); Object r{i} = d.applyAll(f{i});\n"
        );
    }
    fj += &format!("    return r{n};\n}}\n");

    let mut scheme = String::from(
        "(define (use a b) a)\n(define (make-closure-x x)\n  (lambda (y) ((lambda (c) (c)) (lambda () (use x y)))))\n(define (apply-all f)",
    );
    for j in 1..=m {
        scheme += &format!(" (f {})", 100 + j);
    }
    scheme += ")\n";
    for i in 1..=n {
        scheme += &format!("(apply-all (make-closure-x {i}))\n");
    }
    PairedClosure { fj, scheme }
}

/// The thunk closing over both `x` and `y` in the functional twin.
pub fn paired_thunk(prog: &CpsProgram) -> Label {
    prog.lambdas()
        .find(|l| {
            l.kind == LamKind::Procedure && l.params.len() == 1 && {
                let names: Vec<&str> = l.free.iter().map(|v| prog.var(*v).name.as_str()).collect();
                names.contains(&"x") && names.contains(&"y")
            }
        })
        .map(|l| l.label)
        .expect("functional twin has a thunk over x and y")
}

/// Two identity calls, optionally with a call inside the identity body.
pub fn gen_identity(with_intervening: bool) -> String {
    if with_intervening {
        "(define (do-something) 1)\n(define (identity x) (do-something) x)\n(identity 3)\n(identity 4)\n".into()
    } else {
        "(define (identity x) x)\n(identity 3)\n(identity 4)\n".into()
    }
}

/// Distinct environments closing `lam` across the report's flow sets.
pub fn count_envs_for_lambda(report: &FlowReport, lam: Label) -> usize {
    report.env_count(lam)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AnalysisSpec {
    Kcfa { k: usize },
    Mcfa { m: usize, policy: Policy },
    FjKcfa { k: usize, collapsed: bool, tick: TickMode },
}

impl AnalysisSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisSpec::Kcfa { .. } => "kcfa",
            AnalysisSpec::Mcfa { policy: Policy::TopMFrames, .. } => "mcfa",
            AnalysisSpec::Mcfa { policy: Policy::LastKCalls, .. } => "polykcfa",
            AnalysisSpec::FjKcfa { .. } => "fj-kcfa",
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            AnalysisSpec::Kcfa { k } | AnalysisSpec::FjKcfa { k, .. } => *k,
            AnalysisSpec::Mcfa { m, .. } => *m,
        }
    }

    pub fn policy(&self) -> String {
        match self {
            AnalysisSpec::Kcfa { .. } => String::new(),
            AnalysisSpec::Mcfa { policy, .. } => policy.to_string(),
            AnalysisSpec::FjKcfa { collapsed, tick, .. } => {
                let tick = match tick {
                    TickMode::PerStatement => "per-statement",
                    TickMode::CallSiteOnly => "call-site-only",
                };
                let repr = if *collapsed { "collapsed" } else { "map" };
                format!("{tick}/{repr}")
            }
        }
    }

    pub fn is_fj(&self) -> bool {
        matches!(self, AnalysisSpec::FjKcfa { .. })
    }
}

impl fmt::Display for AnalysisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.depth())
    }
}

/// Parses `kcfa:1`, `mcfa:1`, `polykcfa:1` or `fj-kcfa:1`.
impl FromStr for AnalysisSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, n) = s.split_once(':').ok_or_else(|| format!("expected NAME:DEPTH, got `{s}`"))?;
        let n: usize = n.parse().map_err(|_| format!("bad depth in `{s}`"))?;
        match name {
            "kcfa" => Ok(AnalysisSpec::Kcfa { k: n }),
            "mcfa" => Ok(AnalysisSpec::Mcfa { m: n, policy: Policy::TopMFrames }),
            "polykcfa" => Ok(AnalysisSpec::Mcfa { m: n, policy: Policy::LastKCalls }),
            "fj-kcfa" => Ok(AnalysisSpec::FjKcfa { k: n, collapsed: true, tick: TickMode::PerStatement }),
            other => Err(format!("unknown analysis `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Source {
    Cps(CpsProgram),
    Fj(FjProgram),
}

#[derive(Clone, Debug)]
pub struct BenchProgram {
    pub name: String,
    pub source: Source,
}

impl BenchProgram {
    pub fn cps(name: impl Into<String>, prog: CpsProgram) -> Self {
        BenchProgram { name: name.into(), source: Source::Cps(prog) }
    }

    pub fn fj(name: impl Into<String>, prog: FjProgram) -> Self {
        BenchProgram { name: name.into(), source: Source::Fj(prog) }
    }

    /// Syntax-tree size for CPS, statement count for object programs.
    pub fn terms(&self) -> usize {
        match &self.source {
            Source::Cps(p) => p.term_count(),
            Source::Fj(p) => p.stmts().len(),
        }
    }

    pub fn accepts(&self, a: &AnalysisSpec) -> bool {
        matches!(self.source, Source::Fj(_)) == a.is_fj()
    }
}

pub fn worst_case_family(ns: impl IntoIterator<Item = usize>) -> Vec<BenchProgram> {
    ns.into_iter().map(|n| BenchProgram::cps(format!("worst-case-{n}"), gen_worst_case(n))).collect()
}

/// Per-cell limits; exhausting either marks the row as timed out.
#[derive(Clone, Debug, Default)]
pub struct CellBudget {
    pub time: Option<Duration>,
    pub max_transfers: Option<u64>,
}

impl CellBudget {
    pub fn start(&self) -> Budget {
        let mut b = Budget { max_transfers: self.max_transfers, deadline: None };
        if let Some(t) = self.time {
            b = b.with_deadline(Instant::now() + t);
        }
        b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub program: String,
    pub terms: usize,
    pub analysis: String,
    pub k_or_m: usize,
    pub policy: String,
    pub transfers: u64,
    pub configs: usize,
    pub inlinable: usize,
    pub time_ms: f64,
    pub timeout: bool,
    pub env_count_per_lambda: BTreeMap<Label, usize>,
    pub flows: BTreeMap<Label, FlowSet>,
    pub halt_flow: FlowSet,
}

/// Runs one analysis on one program; `None` if they are incompatible.
pub fn analyze(source: &Source, a: &AnalysisSpec, budget: &Budget) -> Option<FlowReport> {
    Some(match (source, a) {
        (Source::Cps(prog), AnalysisSpec::Kcfa { k }) => explore_widened(prog, *k, budget).report(),
        (Source::Cps(prog), AnalysisSpec::Mcfa { m, policy }) => {
            explore_widened_mcfa(prog, *m, *policy, budget).report()
        }
        (Source::Fj(prog), AnalysisSpec::FjKcfa { k, collapsed, tick }) => {
            analyze_fj(prog, *k, FjOptions { tick: *tick, strict_casts: false }, *collapsed, budget)
        }
        _ => return None,
    })
}

pub fn run_cell(p: &BenchProgram, a: &AnalysisSpec, budget: &CellBudget) -> Option<MetricsRow> {
    let b = budget.start();
    let start = Instant::now();
    let report = analyze(&p.source, a, &b)?;
    Some(MetricsRow::new(p, a, report, start.elapsed().as_secs_f64() * 1000.0))
}

impl MetricsRow {
    pub fn new(p: &BenchProgram, a: &AnalysisSpec, report: FlowReport, time_ms: f64) -> Self {
        MetricsRow {
            program: p.name.clone(),
            terms: p.terms(),
            analysis: a.name().into(),
            k_or_m: a.depth(),
            policy: a.policy(),
            transfers: report.transfers,
            configs: report.config_count,
            inlinable: report.inlinable,
            time_ms,
            timeout: report.partial,
            env_count_per_lambda: report.env_count_per_lambda,
            flows: report.labels.into_iter().map(|(l, f)| (l, f.operator_flow)).collect(),
            halt_flow: report.halt_flow,
        }
    }
}

/// One row per compatible (program, analysis) pair, program-major.
pub fn run_matrix(
    programs: &[BenchProgram],
    analyses: &[AnalysisSpec],
    budget: &CellBudget,
    exec: Execution,
) -> Vec<MetricsRow> {
    let cells: Vec<(&BenchProgram, &AnalysisSpec)> =
        programs.iter().flat_map(|p| analyses.iter().map(move |a| (p, a))).filter(|(p, a)| p.accepts(a)).collect();
    map_items(&cells, exec, |(p, a)| run_cell(p, a, budget)).into_iter().flatten().collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    program: &'a str,
    terms: usize,
    analysis: &'a str,
    k_or_m: usize,
    policy: &'a str,
    transfers: u64,
    configs: usize,
    inlinable: usize,
    time_ms: String,
    timeout: bool,
}

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "program",
            "terms",
            "analysis",
            "k_or_m",
            "policy",
            "transfers",
            "configs",
            "inlinable",
            "time_ms",
            "timeout",
        ])
        .expect("in-memory write");
    }
    for r in rows {
        w.serialize(CsvRow {
            program: &r.program,
            terms: r.terms,
            analysis: &r.analysis,
            k_or_m: r.k_or_m,
            policy: &r.policy,
            transfers: r.transfers,
            configs: r.configs,
            inlinable: r.inlinable,
            time_ms: format!("{:.3}", r.time_ms),
            timeout: r.timeout,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn to_json(rows: &[MetricsRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

/// Least-squares polynomial fit.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    /// Coefficients, constant term first.
    pub coeffs: Vec<f64>,
    /// ‖y − ŷ‖₂ / ‖y‖₂.
    pub residual_ratio: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

pub fn fit_polynomial(xs: &[f64], ys: &[f64], degree: usize) -> PolyFit {
    use nalgebra::{DMatrix, DVector};
    assert_eq!(xs.len(), ys.len());
    let cols = degree + 1;
    let a = DMatrix::from_fn(xs.len(), cols, |i, j| xs[i].powi(j as i32));
    let y = DVector::from_column_slice(ys);
    let coeffs = a.clone().svd(true, true).solve(&y, 1e-12).expect("svd computed with both factors");
    let resid = (&a * &coeffs - &y).norm();
    let scale = y.norm();
    PolyFit { coeffs: coeffs.iter().copied().collect(), residual_ratio: if scale == 0.0 { 0.0 } else { resid / scale } }
}

/// `ys[i+1] / ys[i]` for consecutive entries.
pub fn growth_ratios(ys: &[f64]) -> Vec<f64> {
    ys.windows(2).map(|w| w[1] / w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cps::parse_cps;
    use crate::fj::parse_fj;

    #[test]
    fn worst_case_shape() {
        assert_eq!(
            gen_worst_case_source(2),
            "((lambda (f1) (f1 0) (f1 1)) (lambda (x1) ((lambda (f2) (f2 0) (f2 1)) (lambda (x2) (lambda (z) (z x1 x2))))))"
        );
        let p = gen_worst_case(3);
        let z = worst_case_inner(&p);
        let free: Vec<String> = p.lam(z).free.iter().map(|v| p.var(*v).name.clone()).collect();
        assert_eq!(free, ["x1", "x2", "x3"]);
    }

    #[test]
    fn generated_programs_parse() {
        for (n, m) in [(1, 1), (2, 3), (3, 3)] {
            let pc = gen_paired_closure(n, m);
            let fj = parse_fj(&pc.fj).unwrap();
            assert!(fj.class_named("ClosureXY").is_some());
            let f = cps_convert(&pc.scheme).unwrap();
            paired_thunk(&f);
        }
        for b in [false, true] {
            cps_convert(&gen_identity(b)).unwrap();
        }
    }

    #[test]
    fn unreached_lambda_has_no_environments() {
        let p = parse_cps("((lambda (f) (halt 1)) (lambda (x k) (k x)))").unwrap();
        let r = explore_widened(&p, 1, &Budget::unlimited()).report();
        let inner = p.lambda_binding("x").unwrap();
        assert_eq!(count_envs_for_lambda(&r, inner), 1);
        let q = parse_cps("((lambda (f) (halt 1)) (lambda (x k) ((lambda (y) (k y)) x)))").unwrap();
        let r = explore_widened(&q, 1, &Budget::unlimited()).report();
        assert_eq!(count_envs_for_lambda(&r, q.lambda_binding("y").unwrap()), 0);
    }

    #[test]
    fn analysis_specs_round_trip() {
        for s in ["kcfa:1", "mcfa:0", "polykcfa:2", "fj-kcfa:1"] {
            assert_eq!(s.parse::<AnalysisSpec>().unwrap().to_string(), s);
        }
        assert!("kcfa".parse::<AnalysisSpec>().is_err());
        assert!("zcfa:1".parse::<AnalysisSpec>().is_err());
    }

    #[test]
    fn empty_matrix() {
        let rows = run_matrix(&[], &[AnalysisSpec::Kcfa { k: 1 }], &CellBudget::default(), Execution::Sequential);
        assert!(rows.is_empty());
        assert_eq!(to_csv(&rows).lines().next().unwrap().split(',').count(), 10);
    }

    #[test]
    fn matrix_rows_match_across_execution_modes() {
        let progs = worst_case_family(1..=3);
        let an: Vec<AnalysisSpec> =
            ["kcfa:1", "mcfa:1", "kcfa:0", "fj-kcfa:1"].iter().map(|s| s.parse().unwrap()).collect();
        let strip = |rows: Vec<MetricsRow>| -> Vec<(String, String, u64)> {
            rows.into_iter().map(|r| (r.program, r.analysis, r.transfers)).collect()
        };
        let seq = run_matrix(&progs, &an, &CellBudget::default(), Execution::Sequential);
        assert_eq!(seq.len(), 9);
        let csv = to_csv(&seq);
        assert!(csv.starts_with("program,terms,analysis,k_or_m,policy,transfers,configs,inlinable,time_ms,timeout\n"));
        let par = run_matrix(&progs, &an, &CellBudget::default(), Execution::Parallel);
        assert_eq!(strip(seq), strip(par));
    }

    #[test]
    fn transfer_caps_mark_timeouts() {
        let progs = worst_case_family([3]);
        let budget = CellBudget { time: None, max_transfers: Some(5) };
        let rows = run_matrix(&progs, &[AnalysisSpec::Kcfa { k: 1 }], &budget, Execution::Sequential);
        assert!(rows[0].timeout);
    }

    #[test]
    fn cubic_fits_exactly() {
        let xs: Vec<f64> = (1..=8).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x * x - x + 7.0).collect();
        let fit = fit_polynomial(&xs, &ys, 3);
        assert!(fit.residual_ratio < 1e-9, "{fit:?}");
        assert!((fit.eval(10.0) - 1997.0).abs() < 1e-6);
        let exp: Vec<f64> = (1..=8).map(|n| 2f64.powi(n)).collect();
        assert!(fit_polynomial(&xs, &exp, 1).residual_ratio > 0.1);
        assert_eq!(growth_ratios(&[1.0, 2.0, 6.0]), [2.0, 3.0]);
    }
}
