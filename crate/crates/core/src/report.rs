//! Analysis-independent flow reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::context::{Contour, Label};
use crate::cps::Literal;

/// A value as it appears in a report, stripped of analysis-specific
/// environments so that different analyses can be compared.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowValue {
    Lam(Label),
    Lit(Literal),
    Halt,
    /// An object; `ctx` is the allocation time of its fields, absent for
    /// classes without fields.
    Obj {
        class: String,
        ctx: Option<Contour>,
    },
}

impl fmt::Display for FlowValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowValue::Lam(l) => write!(f, "λ{l}"),
            FlowValue::Lit(lit) => write!(f, "{lit}"),
            FlowValue::Halt => f.write_str("halt"),
            FlowValue::Obj { class, ctx: Some(c) } => write!(f, "{class}@{c}"),
            FlowValue::Obj { class, ctx: None } => f.write_str(class),
        }
    }
}

impl Serialize for FlowValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub type FlowSet = BTreeSet<FlowValue>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelFlow {
    pub operator_flow: FlowSet,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InvocationFlow {
    pub receivers: FlowSet,
    pub targets: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FlowReport {
    pub analysis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    /// Operator flow per reached call site.
    pub labels: BTreeMap<Label, LabelFlow>,
    /// Flow set per abstract address, keyed `name#uid@⟨ctx⟩`.
    pub addresses: BTreeMap<String, FlowSet>,
    pub config_count: usize,
    /// Distinct environments closing each λ-term across all flow sets.
    pub env_count_per_lambda: BTreeMap<Label, usize>,
    pub iterations: u64,
    pub transfers: u64,
    pub store_joins: u64,
    pub ascent: u64,
    pub halt_flow: FlowSet,
    pub inlinable: usize,
    pub partial: bool,
    /// Object-oriented analyses only: context → variable → objects.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub points_to: BTreeMap<String, BTreeMap<String, FlowSet>>,
    /// Object-oriented analyses only: method → number of contexts.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub contexts: BTreeMap<String, usize>,
    /// Object-oriented analyses only: invocation statement → receivers and
    /// dispatched methods.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub invocations: BTreeMap<Label, InvocationFlow>,
}

impl FlowReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = write!(out, "analysis {}", self.analysis);
        if let Some(k) = self.k {
            let _ = write!(out, " k={k}");
        }
        if let Some(m) = self.m {
            let _ = write!(out, " m={m}");
        }
        if let Some(p) = &self.policy {
            let _ = write!(out, " policy={p}");
        }
        if self.partial {
            out.push_str(" (partial)");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "configs {}  transfers {}  iterations {}  inlinable {}",
            self.config_count, self.transfers, self.iterations, self.inlinable
        );
        let _ = writeln!(out, "halt: {}", join(&self.halt_flow));
        for (l, f) in &self.labels {
            let _ = writeln!(out, "call {l}: {}", join(&f.operator_flow));
        }
        for (l, f) in &self.invocations {
            let targets: Vec<&str> = f.targets.iter().map(String::as_str).collect();
            let _ = writeln!(out, "invoke {l}: {}", targets.join(" "));
        }
        for (a, f) in &self.addresses {
            let _ = writeln!(out, "{a} = {}", join(f));
        }
        out
    }

    pub fn operator_flow(&self, call: Label) -> Option<&FlowSet> {
        self.labels.get(&call).map(|f| &f.operator_flow)
    }

    pub fn env_count(&self, lam: Label) -> usize {
        self.env_count_per_lambda.get(&lam).copied().unwrap_or(0)
    }
}

fn join(s: &FlowSet) -> String {
    let items: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("{{{}}}", items.join(", "))
}

/// Number of reached call sites whose operator flow is a single λ-term.
pub fn inlinable_calls(report: &FlowReport) -> usize {
    let calls = report
        .labels
        .values()
        .filter(|f| f.operator_flow.len() == 1 && matches!(f.operator_flow.first(), Some(FlowValue::Lam(_))))
        .count();
    calls + report.invocations.values().filter(|f| f.targets.len() == 1).count()
}

/// Accumulates flows for a report.
#[derive(Default)]
pub(crate) struct ReportBuilder {
    pub labels: BTreeMap<Label, LabelFlow>,
    pub addresses: BTreeMap<String, FlowSet>,
    pub envs: BTreeMap<Label, BTreeSet<String>>,
    pub halt_flow: FlowSet,
}

impl ReportBuilder {
    pub fn operator(&mut self, call: Label, v: FlowValue) {
        self.labels.entry(call).or_default().operator_flow.insert(v);
    }

    pub fn reach(&mut self, call: Label) {
        self.labels.entry(call).or_default();
    }

    pub fn address(&mut self, key: String, vals: impl IntoIterator<Item = FlowValue>) {
        self.addresses.entry(key).or_default().extend(vals);
    }

    /// Records that λ-term `lam` was closed over environment `env_key`.
    pub fn closure(&mut self, lam: Label, env_key: String) {
        self.envs.entry(lam).or_default().insert(env_key);
    }

    pub fn finish(self, analysis: &str) -> FlowReport {
        let mut r = FlowReport {
            analysis: analysis.to_string(),
            labels: self.labels,
            addresses: self.addresses,
            env_count_per_lambda: self.envs.into_iter().map(|(l, e)| (l, e.len())).collect(),
            halt_flow: self.halt_flow,
            ..FlowReport::default()
        };
        r.inlinable = inlinable_calls(&r);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_values_sort_by_label_number() {
        let s: FlowSet = [FlowValue::Lam(Label(10)), FlowValue::Lam(Label(9)), FlowValue::Halt].into_iter().collect();
        let rendered: Vec<String> = s.iter().map(ToString::to_string).collect();
        assert_eq!(rendered, vec!["λ9", "λ10", "halt"]);
    }

    #[test]
    fn inlinable_counts_singleton_lambdas_only() {
        let mut b = ReportBuilder::default();
        b.operator(Label(0), FlowValue::Lam(Label(1)));
        b.operator(Label(2), FlowValue::Lam(Label(1)));
        b.operator(Label(2), FlowValue::Lam(Label(3)));
        b.operator(Label(4), FlowValue::Halt);
        let r = b.finish("test");
        assert_eq!(r.inlinable, 1);
    }

    #[test]
    fn json_keys_are_stable() {
        let mut b = ReportBuilder::default();
        b.operator(Label(0), FlowValue::Lit(Literal::Int(3)));
        b.address("x#0@⟨⟩".into(), [FlowValue::Lit(Literal::Int(3))]);
        let json = b.finish("kcfa").to_json();
        assert!(json.contains("\"operator_flow\": [\n        \"3\"\n      ]"), "{json}");
        assert!(!json.contains("points_to"));
    }
}
