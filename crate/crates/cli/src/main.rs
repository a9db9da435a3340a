use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cfa_core::bench::{
    analyze, gen_identity, gen_paired_closure, run_matrix, to_csv, to_json, worst_case_family, AnalysisSpec,
    BenchProgram, CellBudget, MetricsRow, Source,
};
use cfa_core::cps::{cps_convert, cps_convert_to_text, parse_cps};
use cfa_core::cps_concrete::{run_concrete, TimeMode};
use cfa_core::exec::Execution;
use cfa_core::fj::{analyze_fj, parse_fj, run_fj, FjOptions, TickMode};
use cfa_core::mcfa::Policy;
use clap::{Args, Parser, Subcommand, ValueEnum};

const DEFAULT_BUDGET_MS: u64 = 60_000;

#[derive(Parser)]
#[command(name = "cfa", version, about = "k-CFA and m-CFA for CPS and Featherweight Java programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze one program and print its flow report.
    Analyze(AnalyzeArgs),
    /// Run an analysis matrix over generated families or given files.
    Bench(BenchArgs),
    /// Print a bounded concrete trace.
    Trace(TraceArgs),
    /// CPS-convert a direct-style Scheme program.
    Convert { file: PathBuf },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Lang {
    Cps,
    Scheme,
    Fj,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Analysis {
    Kcfa,
    Mcfa,
    Polykcfa,
    FjKcfa,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EnvRepr {
    Collapsed,
    Map,
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    /// Input language; guessed from the extension when absent.
    #[arg(long, value_enum)]
    lang: Option<Lang>,
    /// Defaults to fj-kcfa for object programs and kcfa otherwise.
    #[arg(long, value_enum)]
    analysis: Option<Analysis>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Object programs: binding environment representation.
    #[arg(long, value_enum, default_value = "collapsed")]
    env_repr: EnvRepr,
    /// Object programs: advance time only at invocations.
    #[arg(long)]
    call_site_only_tick: bool,
    /// Object programs: casts filter flow by subclass.
    #[arg(long)]
    strict_cast: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    max_transfers: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Family {
    WorstCase,
    PairedClosure,
    Identity,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    family: Vec<Family>,
    /// Size range `LO..HI` (inclusive) or a single size.
    #[arg(long, default_value = "1..4", value_parser = parse_range)]
    n: (usize, usize),
    /// Comma-separated `NAME:DEPTH` list, e.g. `kcfa:1,mcfa:1`.
    #[arg(long, value_delimiter = ',', default_value = "kcfa:1,mcfa:1,polykcfa:1,kcfa:0")]
    analyses: Vec<AnalysisSpec>,
    #[arg(long, default_value = "parallel")]
    exec: Execution,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    max_transfers: Option<u64>,
    /// Extra programs, language taken from the extension.
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    lang: Option<Lang>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long)]
    call_site_only_tick: bool,
    #[arg(long)]
    strict_cast: bool,
}

/// Input and usage errors end with status 2 and no report.
struct Fail(String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected N or LO..HI, got `{s}`");
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (lo.parse().map_err(|_| bad())?, hi.trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("empty or zero-based range `{s}`"));
    }
    Ok((lo, hi))
}

fn guess_lang(path: &Path, lang: Option<Lang>) -> Result<Lang, Fail> {
    if let Some(l) = lang {
        return Ok(l);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("scm" | "ss" | "rkt") => Ok(Lang::Scheme),
        Some("cps") => Ok(Lang::Cps),
        Some("fj" | "java") => Ok(Lang::Fj),
        _ => Err(Fail(format!("{}: cannot tell the language, pass --lang", path.display()))),
    }
}

fn load(path: &Path, lang: Lang) -> Result<Source, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(format!("{}: {e}", path.display())))?;
    let at = |e: &dyn std::fmt::Display| Fail(format!("{}: {e}", path.display()));
    Ok(match lang {
        Lang::Scheme => Source::Cps(cps_convert(&text).map_err(|e| at(&e))?),
        Lang::Cps => Source::Cps(parse_cps(&text).map_err(|e| at(&e))?),
        Lang::Fj => Source::Fj(parse_fj(&text).map_err(|e| at(&e))?),
    })
}

fn cell_budget(max_transfers: Option<u64>) -> Result<CellBudget, Fail> {
    let ms = match std::env::var("CFA_BUDGET_MS") {
        Ok(v) => v.parse::<u64>().map_err(|_| Fail(format!("CFA_BUDGET_MS: not a number: `{v}`")))?,
        Err(_) => DEFAULT_BUDGET_MS,
    };
    Ok(CellBudget { time: Some(Duration::from_millis(ms)), max_transfers })
}

fn spec_of(a: &AnalyzeArgs, fj: bool) -> Result<AnalysisSpec, Fail> {
    let analysis = a.analysis.unwrap_or(if fj { Analysis::FjKcfa } else { Analysis::Kcfa });
    if fj != (analysis == Analysis::FjKcfa) {
        return Err(Fail("fj-kcfa is the only analysis for fj input, and it needs fj input".into()));
    }
    let depth = match (analysis, a.k, a.m) {
        (_, Some(_), Some(_)) => return Err(Fail("give either --k or --m".into())),
        (Analysis::Mcfa, Some(_), None) => return Err(Fail("mcfa takes --m".into())),
        (Analysis::Kcfa | Analysis::FjKcfa, None, Some(_)) => return Err(Fail("k-CFA takes --k".into())),
        (_, k, m) => k.or(m).unwrap_or(1),
    };
    Ok(match analysis {
        Analysis::Kcfa => AnalysisSpec::Kcfa { k: depth },
        Analysis::Mcfa => AnalysisSpec::Mcfa { m: depth, policy: Policy::TopMFrames },
        Analysis::Polykcfa => AnalysisSpec::Mcfa { m: depth, policy: Policy::LastKCalls },
        Analysis::FjKcfa => AnalysisSpec::FjKcfa {
            k: depth,
            collapsed: a.env_repr == EnvRepr::Collapsed,
            tick: if a.call_site_only_tick { TickMode::CallSiteOnly } else { TickMode::PerStatement },
        },
    })
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<ExitCode, Fail> {
    let lang = guess_lang(&a.file, a.lang)?;
    let spec = spec_of(&a, lang == Lang::Fj)?;
    let source = load(&a.file, lang)?;
    let budget = cell_budget(a.max_transfers)?;
    let start = Instant::now();
    let report = match (&source, &spec) {
        (Source::Fj(p), AnalysisSpec::FjKcfa { k, collapsed, tick }) => {
            analyze_fj(p, *k, FjOptions { tick: *tick, strict_casts: a.strict_cast }, *collapsed, &budget.start())
        }
        _ => analyze(&source, &spec, &budget.start()).expect("compatibility checked"),
    };
    let elapsed = start.elapsed().as_secs_f64() * 1000.0;
    let partial = report.partial;
    match a.format {
        Format::Json => emit(&(report.to_json() + "\n")),
        Format::Text => emit(&report.to_text()),
        Format::Csv => {
            let name = a.file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let p = BenchProgram { name, source };
            emit(&to_csv(&[MetricsRow::new(&p, &spec, report, elapsed)]));
        }
    }
    if partial {
        eprintln!("cfa: budget exhausted, report is partial");
    }
    Ok(if partial { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn cmd_bench(b: BenchArgs) -> Result<ExitCode, Fail> {
    let mut programs = Vec::new();
    let (lo, hi) = b.n;
    for f in &b.family {
        match f {
            Family::WorstCase => programs.extend(worst_case_family(lo..=hi)),
            Family::PairedClosure => {
                for n in lo..=hi {
                    let pc = gen_paired_closure(n, n);
                    programs.push(BenchProgram::cps(format!("paired-closure-{n}-scheme"), cps_convert(&pc.scheme)?));
                    programs.push(BenchProgram::fj(format!("paired-closure-{n}-fj"), parse_fj(&pc.fj)?));
                }
            }
            Family::Identity => {
                programs.push(BenchProgram::cps("identity", cps_convert(&gen_identity(false))?));
                programs.push(BenchProgram::cps("identity-do-something", cps_convert(&gen_identity(true))?));
            }
        }
    }
    for path in &b.files {
        let source = load(path, guess_lang(path, None)?)?;
        programs.push(BenchProgram { name: path.display().to_string(), source });
    }
    if programs.is_empty() {
        return Err(Fail("nothing to run: give --family or program files".into()));
    }
    let rows = run_matrix(&programs, &b.analyses, &cell_budget(b.max_transfers)?, b.exec);
    match b.format {
        Format::Json => emit(&(to_json(&rows) + "\n")),
        Format::Csv => emit(&to_csv(&rows)),
        Format::Text => {
            for r in &rows {
                let t = if r.timeout { "∞".to_string() } else { format!("{:.1}ms", r.time_ms) };
                emit(
                    &(format!(
                        "{:<28} {:>5} {:<9} {} {:>9} {}",
                        r.program, r.terms, r.analysis, r.k_or_m, r.transfers, t
                    ) + "\n"),
                );
            }
        }
    }
    let timeouts = rows.iter().filter(|r| r.timeout).count();
    if timeouts > 0 {
        eprintln!("cfa: {timeouts} cell(s) exhausted their budget");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(t: TraceArgs) -> Result<ExitCode, Fail> {
    let lang = guess_lang(&t.file, t.lang)?;
    match load(&t.file, lang)? {
        Source::Cps(p) => emit(&run_concrete(&p, TimeMode::Calls, t.steps)?.dump(&p)),
        Source::Fj(p) => {
            let tick = if t.call_site_only_tick { TickMode::CallSiteOnly } else { TickMode::PerStatement };
            emit(&run_fj(&p, FjOptions { tick, strict_casts: t.strict_cast }, t.steps)?.dump(&p));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let result = match Cli::parse().cmd {
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Bench(b) => cmd_bench(b),
        Cmd::Trace(t) => cmd_trace(t),
        Cmd::Convert { file } => std::fs::read_to_string(&file)
            .map_err(|e| Fail(format!("{}: {e}", file.display())))
            .and_then(|src| Ok(cps_convert_to_text(&src)?))
            .map(|text| {
                emit(&(text + "\n"));
                ExitCode::SUCCESS
            }),
    };
    result.unwrap_or_else(|Fail(msg)| {
        eprintln!("cfa: {msg}");
        ExitCode::from(2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..4"), Ok((1, 4)));
        assert_eq!(parse_range("2..=3"), Ok((2, 3)));
        assert_eq!(parse_range("5"), Ok((5, 5)));
        assert!(parse_range("0..2").is_err());
        assert!(parse_range("4..1").is_err());
        assert!(parse_range("a").is_err());
    }

    #[test]
    fn languages_from_extensions() {
        assert!(matches!(guess_lang(Path::new("a.scm"), None), Ok(Lang::Scheme)));
        assert!(matches!(guess_lang(Path::new("a.fj"), None), Ok(Lang::Fj)));
        assert!(matches!(guess_lang(Path::new("a.txt"), Some(Lang::Cps)), Ok(Lang::Cps)));
        assert!(guess_lang(Path::new("a"), None).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
