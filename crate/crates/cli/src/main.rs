use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use kgrepair::harness::{
    outcomes_csv, outcomes_jsonl, run_suite, Adapter, AdapterReply, AdapterRequest, AdapterSpec,
    CaseOutcome, CommandAdapter, HttpAdapter, MalformedAdapter, OracleAdapter, PricingTable,
    Prompt, Status, Strategy, SuiteCase, SuiteConfig, PICO_PER_USD,
};
use kgrepair::materialize::{
    materialize_plans, read_bundle, write_bundle, Bundle, DeterministicNamer, LlmNamer, Namer,
};
use kgrepair::metrics::{aggregate, Row, TIERS};
use kgrepair::parallel::Exec;
use kgrepair::rdf::{parse_turtle, Compactor, Graph};
use kgrepair::shacl::{parse_manifest_turtle, Manifest};
use kgrepair::validator::{merged_prefixes, validate};
use kgrepair::vio::{collect_plans, CollectOptions, PathMode};

#[derive(Parser)]
#[command(
    name = "kgrepair",
    version,
    about = "Generate SHACL violation test cases and score repair systems on them"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate test case bundles from a conforming graph.
    Generate(GenerateArgs),
    /// Run a repair system over bundles and score its answers.
    Repair(RepairArgs),
    /// Aggregate outcome files into summary tables.
    Report(ReportArgs),
    /// Validate a graph against a manifest.
    Validate(ValidateArgs),
    /// Answer repair requests on stdin with the ground truth of bundles.
    OracleAdapter(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Paths {
    First,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum NamerKind {
    Deterministic,
    Llm,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Data graph; repeat for several graphs, each written to its own subdirectory.
    #[arg(long, required = true)]
    graph: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop at full coverage, or exhaust every expansion tree.
    #[arg(long, value_enum, default_value = "first")]
    paths: Paths,
    /// How new entities are named.
    #[arg(long, value_enum, default_value = "deterministic")]
    namer: NamerKind,
    /// Adapter asked for names when `--namer llm` (cmd:… or http:…).
    #[arg(long)]
    adapter: Option<String>,
    /// Materialize plans in parallel.
    #[arg(long)]
    parallel: bool,
}

#[derive(clap::Args)]
struct RepairArgs {
    /// Directory of bundles written by `generate`.
    #[arg(long)]
    bundles: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// cmd:<command>, http:<url>, oracle or malformed.
    #[arg(long)]
    adapter: String,
    /// Context strategy such as `S,F+`, or `all`; repeatable.
    #[arg(long, default_value = "S,F+")]
    strategy: Vec<String>,
    /// Model name, used for pricing and reporting.
    #[arg(long, default_value = "GPT4o")]
    model: String,
    /// JSON pricing table; defaults to the built-in one.
    #[arg(long)]
    pricing: Option<PathBuf>,
    /// Requests in flight at once.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Largest estimated input cost per request, in USD.
    #[arg(long, default_value_t = 0.5)]
    budget_usd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset name in the outcomes; defaults to the bundle directory name.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Outcome JSONL files written by `repair`.
    #[arg(required = true)]
    outcomes: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    bundles: PathBuf,
}

/// Failures mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Refused(String),
    Io(anyhow::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.into())
    }
}

fn io_fail(e: anyhow::Error) -> Failure {
    Failure::Io(e)
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Cmd::Generate(a) => generate(a),
        Cmd::Repair(a) => repair(a),
        Cmd::Report(a) => report(a),
        Cmd::Validate(a) => validate_cmd(a),
        Cmd::OracleAdapter(a) => oracle_adapter(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Refused(report)) => {
            eprint!("{report}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_fail)?;
    let m = parse_manifest_turtle(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(io_fail)?;
    for w in m.warnings() {
        warn!("{}: {w}", path.display());
    }
    Ok(m)
}

fn read_graph(path: &Path) -> Result<Graph, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_fail)?;
    parse_turtle(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(io_fail)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(io_fail)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io_fail)
}

fn build_adapter(spec: &str, bundles: &[Bundle]) -> Result<Arc<dyn Adapter + Send>, Failure> {
    let spec: AdapterSpec = spec.parse().map_err(usage)?;
    Ok(match spec {
        AdapterSpec::Command(cmd) => Arc::new(CommandAdapter::new(cmd)),
        AdapterSpec::Http(url) => Arc::new(HttpAdapter::new(&url)),
        AdapterSpec::Malformed => Arc::new(MalformedAdapter),
        AdapterSpec::Oracle => {
            let mut o = OracleAdapter::new();
            for b in bundles {
                o.insert(
                    &b.meta.id,
                    &b.invalid,
                    &b.original,
                    &merged_prefixes(&b.manifest, &b.invalid),
                );
            }
            Arc::new(o)
        }
    })
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let m = read_manifest(&a.manifest)?;
    let ask: Option<Arc<dyn Adapter + Send>> = match a.namer {
        NamerKind::Deterministic => None,
        NamerKind::Llm => {
            let spec = a
                .adapter
                .as_deref()
                .ok_or_else(|| usage(anyhow!("--namer llm needs --adapter")))?;
            Some(build_adapter(spec, &[])?)
        }
    };
    let namer = move || -> Box<dyn Namer> {
        match &ask {
            None => Box::new(DeterministicNamer::new()),
            Some(adapter) => {
                let adapter = adapter.clone();
                Box::new(LlmNamer::new(move |text: &str| {
                    let req = AdapterRequest {
                        case_id: "mint".into(),
                        prompt: Prompt {
                            primer: text.to_owned(),
                            violation: String::new(),
                            manifest_context: String::new(),
                            graph_context: String::new(),
                            instructions: String::new(),
                        },
                    };
                    adapter
                        .repair(&req)
                        .map(|r| r.answer)
                        .map_err(|e| e.to_string())
                }))
            }
        }
    };
    let multi = a.graph.len() > 1;
    let opts = CollectOptions {
        mode: match a.paths {
            Paths::First => PathMode::First,
            Paths::All => PathMode::All,
        },
        ..CollectOptions::default()
    };
    let exec = if a.parallel {
        Exec::Parallel
    } else {
        Exec::Sequential
    };
    for path in &a.graph {
        let g = read_graph(path)?;
        let report = validate(&g, &m);
        if !report.conforms() {
            let c = Compactor::new(&merged_prefixes(&m, &g));
            return Err(Failure::Refused(format!(
                "{} does not conform to the manifest; refusing to generate\n{}",
                path.display(),
                report.render_text(&c)
            )));
        }
        let out = if multi {
            a.out.join(path.file_stem().unwrap_or_default())
        } else {
            a.out.clone()
        };
        let col = collect_plans(&g, &m, a.seed, &opts);
        for w in &col.warnings {
            warn!("{w}");
        }
        let (cases, dropped) = materialize_plans(&col.plans, &g, &m, a.seed, &namer, exec);
        for d in &dropped {
            info!("dropped {}: {}", d.rendered, d.reason);
        }
        for case in &cases {
            write_bundle(case, &m, &out).map_err(|e| io_fail(e.into()))?;
        }
        let alphas: Vec<usize> = cases.iter().map(|c| c.alpha).collect();
        let mean = if alphas.is_empty() {
            0.0
        } else {
            alphas.iter().sum::<usize>() as f64 / alphas.len() as f64
        };
        let max = alphas.iter().copied().max().unwrap_or(0);
        let summary = json!({
            "graph": path.display().to_string(),
            "seed": a.seed,
            "paths": match a.paths { Paths::First => "first", Paths::All => "all" },
            "plans": col.plans.len(),
            "cases": cases.len(),
            "dropped": dropped.iter().map(|d| json!({"plan": d.rendered, "reason": d.reason})).collect::<Vec<_>>(),
            "constraints": col.target.len(),
            "covered": col.covered.len(),
            "complete": col.complete,
            "alpha": {"mean": mean, "max": max},
            "warnings": col.warnings,
        });
        write_file(
            &out.join("generation.json"),
            &(serde_json::to_string_pretty(&summary).expect("JSON values serialize") + "\n"),
        )?;
        info!(
            "{}: {} cases, covered {}/{} constraints{}, alpha mean {mean:.2} max {max}",
            path.display(),
            cases.len(),
            col.covered.len(),
            col.target.len(),
            if col.complete { "" } else { " (incomplete)" },
        );
    }
    Ok(())
}

fn load_bundles(dir: &Path) -> Result<Vec<Bundle>, Failure> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .map_err(io_fail)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| read_bundle(d).map_err(|e| io_fail(e.into())))
        .collect()
}

fn strategies(specs: &[String]) -> Result<Vec<Strategy>, Failure> {
    let mut out = Vec::new();
    for s in specs {
        if s == "all" {
            out.extend(Strategy::all());
        } else {
            out.push(s.parse().map_err(usage)?);
        }
    }
    Ok(out)
}

fn repair(a: RepairArgs) -> Result<(), Failure> {
    let strategies = strategies(&a.strategy)?;
    if !(a.budget_usd.is_finite() && a.budget_usd >= 0.0) {
        return Err(usage(anyhow!("--budget-usd must be a non-negative number")));
    }
    let pricing = match &a.pricing {
        Some(p) => PricingTable::load(p)
            .with_context(|| format!("loading {}", p.display()))
            .map_err(io_fail)?,
        None => PricingTable::default(),
    };
    let bundles = load_bundles(&a.bundles)?;
    let adapter = build_adapter(&a.adapter, &bundles)?;
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.bundles
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".into())
    });
    let cases: Vec<SuiteCase> = bundles
        .iter()
        .map(|b| SuiteCase::from_bundle(b, &dataset))
        .collect();
    let budget = (a.budget_usd * PICO_PER_USD as f64).round() as u128;
    let mut outcomes: Vec<CaseOutcome> = Vec::new();
    for strategy in strategies {
        let cfg = SuiteConfig {
            strategy,
            model: a.model.clone(),
            pricing: pricing.clone(),
            parallelism: a.parallel,
            seed: a.seed,
            budget,
        };
        info!("running {} cases with strategy {strategy}", cases.len());
        outcomes.extend(run_suite(&cases, adapter.as_ref(), &cfg));
    }
    let failures = outcomes
        .iter()
        .filter(|o| o.status == Status::TransportFailure)
        .count();
    let skipped = outcomes
        .iter()
        .filter(|o| o.status == Status::Skipped)
        .count();
    write_file(&a.out.join("outcomes.jsonl"), &outcomes_jsonl(&outcomes))?;
    write_file(&a.out.join("outcomes.csv"), &outcomes_csv(&outcomes))?;
    if failures > 0 {
        warn!("{failures} transport failures");
    }
    if skipped > 0 {
        warn!("{skipped} cases skipped over budget");
    }
    info!("wrote {} outcomes to {}", outcomes.len(), a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let mut outcomes: Vec<CaseOutcome> = Vec::new();
    for path in &a.outcomes {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(io_fail)?;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let o: CaseOutcome = serde_json::from_str(line)
                .with_context(|| format!("{}:{}: not an outcome record", path.display(), i + 1))
                .map_err(io_fail)?;
            outcomes.push(o);
        }
    }
    let rows: Vec<Row> = outcomes.iter().map(CaseOutcome::row).collect();
    let summary = aggregate(&rows);
    write_file(&a.out.join("summary.csv"), &summary.to_csv())?;
    write_file(&a.out.join("summary.md"), &summary.to_markdown())?;
    write_file(&a.out.join("analysis.csv"), &analysis_csv(&rows))?;
    info!(
        "{} outcomes, {} summary rows",
        outcomes.len(),
        summary.groups.len()
    );
    Ok(())
}

/// Long format: one row per attempted case and tier with a 0/1 outcome.
fn analysis_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "model",
        "strategy",
        "manifest_context",
        "graph_context",
        "metric",
        "outcome",
    ])
    .expect("in-memory write");
    for r in rows {
        let Some(score) = &r.score else { continue };
        let (cm, cg) = match r.strategy.parse::<Strategy>() {
            Ok(s) => (s.manifest.to_string(), s.graph.to_string()),
            Err(_) => (String::new(), String::new()),
        };
        for (tier, pass) in TIERS.iter().zip(score.passes()) {
            w.write_record([
                r.dataset.as_str(),
                &r.model,
                &r.strategy,
                &cm,
                &cg,
                tier,
                if pass { "1" } else { "0" },
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 cells")
}

fn validate_cmd(a: ValidateArgs) -> Result<(), Failure> {
    let m = read_manifest(&a.manifest)?;
    let g = read_graph(&a.graph)?;
    let report = validate(&g, &m);
    let text = match a.format {
        Format::Text => report.render_text(&Compactor::new(&merged_prefixes(&m, &g))),
        Format::Json => {
            serde_json::to_string_pretty(&report.to_json()).expect("JSON values serialize") + "\n"
        }
    };
    match &a.out {
        Some(p) => write_file(p, &text)?,
        None => {
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    if report.conforms() {
        Ok(())
    } else {
        Err(Failure::Refused(format!(
            "{} validation results\n",
            report.len()
        )))
    }
}

fn oracle_adapter(a: OracleArgs) -> Result<(), Failure> {
    let bundles = load_bundles(&a.bundles)?;
    let mut oracle = OracleAdapter::new();
    for b in &bundles {
        oracle.insert(
            &b.meta.id,
            &b.invalid,
            &b.original,
            &merged_prefixes(&b.manifest, &b.invalid),
        );
    }
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<AdapterRequest>(&line) {
            Ok(req) => oracle.repair(&req).unwrap_or_else(|e| AdapterReply {
                answer: e.to_string(),
                tokens_in: None,
                tokens_out: None,
            }),
            Err(e) => AdapterReply {
                answer: format!("bad request: {e}"),
                tokens_in: None,
                tokens_out: None,
            },
        };
        writeln!(
            stdout,
            "{}",
            serde_json::to_string(&reply).expect("replies serialize")
        )?;
        stdout.flush()?;
    }
    Ok(())
}
