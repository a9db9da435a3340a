//! Programs shared by tests, the acceptance suite and benchmarks.

use crate::bench::{gen_paired_closure, gen_worst_case_source};
use crate::cps::{cps_convert, parse_cps, CpsProgram};
use crate::fj::{parse_fj, FjProgram};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Lang {
    /// Direct-style Scheme, converted on load.
    Scheme,
    Cps,
    Fj,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub lang: Lang,
    pub source: String,
}

const FILES: &[(&str, Lang, &str)] = &[
    ("omega", Lang::Cps, include_str!("../corpus/omega.cps")),
    ("kcfa3", Lang::Cps, include_str!("../corpus/kcfa3.cps")),
    ("church", Lang::Scheme, include_str!("../corpus/church.scm")),
    ("identity", Lang::Scheme, include_str!("../corpus/identity.scm")),
    ("do-something", Lang::Scheme, include_str!("../corpus/do-something.scm")),
    ("compose", Lang::Scheme, include_str!("../corpus/compose.scm")),
    ("choose", Lang::Scheme, include_str!("../corpus/choose.scm")),
    ("fixpoint", Lang::Scheme, include_str!("../corpus/fixpoint.scm")),
    ("mj09", Lang::Scheme, include_str!("../corpus/mj09.scm")),
    ("pairs", Lang::Scheme, include_str!("../corpus/pairs.scm")),
    ("eta", Lang::Scheme, include_str!("../corpus/eta.scm")),
    ("dispatch", Lang::Fj, include_str!("../corpus/dispatch.fj")),
    ("loop", Lang::Fj, include_str!("../corpus/loop.fj")),
    ("list", Lang::Fj, include_str!("../corpus/list.fj")),
    ("pair", Lang::Fj, include_str!("../corpus/pair.fj")),
];

/// The checked-in programs followed by small instances of the generated
/// families.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut out: Vec<CorpusEntry> = FILES
        .iter()
        .map(|(name, lang, src)| CorpusEntry { name: (*name).into(), lang: *lang, source: (*src).into() })
        .collect();
    for n in 1..=3 {
        out.push(CorpusEntry { name: format!("worst-case-{n}"), lang: Lang::Scheme, source: gen_worst_case_source(n) });
    }
    for (n, m) in [(2, 2), (3, 2)] {
        let pc = gen_paired_closure(n, m);
        out.push(CorpusEntry { name: format!("paired-closure-{n}x{m}"), lang: Lang::Scheme, source: pc.scheme });
        out.push(CorpusEntry { name: format!("paired-closure-{n}x{m}"), lang: Lang::Fj, source: pc.fj });
    }
    out
}

pub fn cps_corpus() -> Vec<(String, CpsProgram)> {
    corpus()
        .into_iter()
        .filter_map(|e| {
            let p = match e.lang {
                Lang::Scheme => cps_convert(&e.source).unwrap_or_else(|err| panic!("{}: {err}", e.name)),
                Lang::Cps => parse_cps(&e.source).unwrap_or_else(|err| panic!("{}: {err}", e.name)),
                Lang::Fj => return None,
            };
            Some((e.name, p))
        })
        .collect()
}

pub fn fj_corpus() -> Vec<(String, FjProgram)> {
    corpus()
        .into_iter()
        .filter(|e| e.lang == Lang::Fj)
        .map(|e| {
            let p = parse_fj(&e.source).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            (e.name, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_loads() {
        assert!(cps_corpus().len() >= 10);
        assert!(fj_corpus().len() >= 4);
        assert!(cps_corpus().iter().all(|(_, p)| p.is_closed()));
    }
}
