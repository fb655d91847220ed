//! Runs repair systems on test cases: context selection, prompting, cost
//! accounting and scoring.

pub mod adapter;
pub mod context;
pub mod pricing;
pub mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::materialize::{fnv1a, Bundle, TestCase};
use crate::metrics::{evaluate_repair, Row, TieredScore};
use crate::rdf::Graph;
use crate::shacl::Manifest;
use crate::validator::{merged_prefixes, validate};

pub use adapter::{
    extract_answer, oracle_answer, Adapter, AdapterReply, AdapterRequest, AdapterSpec,
    AdapterSpecError, CommandAdapter, HttpAdapter, MalformedAdapter, OracleAdapter, TransportError,
};
pub use context::{
    graph_context, manifest_context, GraphContext, ManifestContext, Strategy, StrategyError,
};
pub use pricing::{format_usd, Picodollars, Price, PricingTable, PICO_PER_USD};
pub use prompt::{build_prompt, estimate_tokens, Prompt, INSTRUCTIONS, PRIMER};

/// One case as the harness sees it.
#[derive(Clone, Debug)]
pub struct SuiteCase {
    pub id: String,
    pub dataset: String,
    pub invalid: Graph,
    pub original: Graph,
    pub manifest: Arc<Manifest>,
}

impl SuiteCase {
    pub fn from_test_case(case: &TestCase, dataset: &str, manifest: Arc<Manifest>) -> Self {
        SuiteCase {
            id: case.id.clone(),
            dataset: dataset.to_owned(),
            invalid: case.invalid.clone(),
            original: case.original.clone(),
            manifest,
        }
    }

    pub fn from_bundle(b: &Bundle, dataset: &str) -> Self {
        SuiteCase {
            id: b.meta.id.clone(),
            dataset: dataset.to_owned(),
            invalid: b.invalid.clone(),
            original: b.original.clone(),
            manifest: Arc::new(b.manifest.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub strategy: Strategy,
    pub model: String,
    pub pricing: PricingTable,
    pub parallelism: usize,
    pub seed: u64,
    /// Largest estimated input cost a request may have.
    pub budget: Picodollars,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            strategy: Strategy::new(ManifestContext::S, GraphContext::FPlus),
            model: "GPT4o".into(),
            pricing: PricingTable::default(),
            parallelism: 1,
            seed: 0,
            budget: PICO_PER_USD / 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// A reply was received and scored.
    Scored,
    /// Not sent: the estimated input cost exceeded the budget.
    Skipped,
    /// Not scored: the adapter could not be reached.
    TransportFailure,
    /// Nothing to repair: the invalid graph conforms.
    NoViolation,
}

/// Everything that happened to one case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub dataset: String,
    pub model: String,
    pub strategy: String,
    pub status: Status,
    /// Index of the chosen result in the validation report.
    pub result_index: Option<usize>,
    pub results: usize,
    pub focus: Option<String>,
    pub source_shape: Option<String>,
    pub component: Option<String>,
    pub prompt: Option<Prompt>,
    pub raw_text: Option<String>,
    pub answer: Option<String>,
    pub score: Option<TieredScore>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub tokens_estimated: bool,
    pub cost_pusd: Picodollars,
    pub latency_ms: u64,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl CaseOutcome {
    /// The metrics view: transport failures count as failed repairs, skipped
    /// and violation-free cases are left out of the pass rates.
    pub fn row(&self) -> Row {
        let score = match self.status {
            Status::Scored => self.score.clone(),
            Status::TransportFailure => Some(TieredScore::unparsed(
                self.error.clone().unwrap_or_default(),
            )),
            Status::Skipped | Status::NoViolation => None,
        };
        Row {
            dataset: self.dataset.clone(),
            model: self.model.clone(),
            strategy: self.strategy.clone(),
            score,
            tokens_in: self.tokens_in,
            tokens_out: self.tokens_out,
            cost: self.cost_pusd,
        }
    }

    pub fn cost_usd(&self) -> String {
        format_usd(self.cost_pusd)
    }
}

fn case_seed(seed: u64, id: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(id.as_bytes());
    fnv1a(&bytes)
}

/// Validates, prompts, requests and scores one case.
pub fn run_case(case: &SuiteCase, adapter: &dyn Adapter, cfg: &SuiteConfig) -> CaseOutcome {
    let m = &case.manifest;
    let mut out = CaseOutcome {
        case_id: case.id.clone(),
        dataset: case.dataset.clone(),
        model: cfg.model.clone(),
        strategy: cfg.strategy.to_string(),
        status: Status::NoViolation,
        result_index: None,
        results: 0,
        focus: None,
        source_shape: None,
        component: None,
        prompt: None,
        raw_text: None,
        answer: None,
        score: None,
        tokens_in: 0,
        tokens_out: 0,
        tokens_estimated: false,
        cost_pusd: 0,
        latency_ms: 0,
        warnings: Vec::new(),
        error: None,
    };
    let report = validate(&case.invalid, m);
    out.results = report.len();
    if report.conforms() {
        out.warnings
            .push("the invalid graph conforms; nothing to repair".into());
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed(cfg.seed, &case.id));
    let index = rng.gen_range(0..report.len());
    let r = &report.results()[index];
    out.result_index = Some(index);
    let prefixes = merged_prefixes(m, &case.invalid);
    let c = crate::rdf::Compactor::new(&prefixes);
    out.focus = Some(c.node(&r.focus));
    out.source_shape = Some(c.iri(r.source_shape.iri()));
    out.component = Some(r.component.name().to_owned());

    let cm = manifest_context(r, m, &case.invalid, cfg.strategy.manifest);
    let cg = graph_context(
        r,
        &case.invalid,
        m,
        cfg.strategy.graph,
        cfg.strategy.manifest,
    );
    out.warnings.extend(cg.warnings);
    let prompt = build_prompt(r, m, &cm, &cg.graph, &prefixes);
    let text = prompt.text();
    out.prompt = Some(prompt.clone());

    let price = cfg.pricing.get(&cfg.model);
    if price.is_none() {
        out.warnings.push(format!(
            "no price for model {}; cost counted as 0",
            cfg.model
        ));
    }
    let price = price.unwrap_or(Price {
        input: 0,
        output: 0,
    });
    let estimate = estimate_tokens(&text);
    if price.input_cost(estimate) > cfg.budget {
        out.status = Status::Skipped;
        out.error = Some("budget".into());
        out.tokens_in = estimate;
        out.tokens_estimated = true;
        return out;
    }

    let started = Instant::now();
    let reply = adapter.repair(&AdapterRequest {
        case_id: case.id.clone(),
        prompt,
    });
    out.latency_ms = started.elapsed().as_millis() as u64;
    let raw = match reply {
        Ok(r) => {
            out.tokens_estimated = r.tokens_in.is_none() || r.tokens_out.is_none();
            out.tokens_in = r.tokens_in.unwrap_or(estimate);
            out.tokens_out = r.tokens_out.unwrap_or_else(|| estimate_tokens(&r.answer));
            r.answer
        }
        Err(TransportError::BadReply(line)) => {
            out.tokens_estimated = true;
            out.tokens_in = estimate;
            out.tokens_out = estimate_tokens(&line);
            line
        }
        Err(e) => {
            out.status = Status::TransportFailure;
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.cost_pusd = price.cost(out.tokens_in, out.tokens_out);
    out.status = Status::Scored;
    out.score = Some(match extract_answer(&raw) {
        Ok(answer) => {
            let s = evaluate_repair(&answer, &case.invalid, &case.original, m);
            out.answer = Some(answer);
            s
        }
        Err(e) => TieredScore::unparsed(format!("extraction: {e}")),
    });
    out.raw_text = Some(raw);
    out
}

/// Runs every case with up to `cfg.parallelism` requests in flight. Outcomes
/// come back in case order.
pub fn run_suite(
    cases: &[SuiteCase],
    adapter: &dyn Adapter,
    cfg: &SuiteConfig,
) -> Vec<CaseOutcome> {
    let workers = cfg.parallelism.max(1).min(cases.len().max(1));
    if workers == 1 {
        return cases.iter().map(|c| run_case(c, adapter, cfg)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CaseOutcome>>> = Mutex::new(vec![None; cases.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(case) = cases.get(i) else { break };
                let outcome = run_case(case, adapter, cfg);
                slots.lock().expect("outcome slots")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("outcome slots")
        .into_iter()
        .map(|o| o.expect("every case ran"))
        .collect()
}

pub const OUTCOME_COLUMNS: [&str; 14] = [
    "case_id",
    "dataset",
    "model",
    "strategy",
    "syntactic",
    "semantic",
    "relaxed_iso",
    "iso",
    "tokens_in",
    "tokens_out",
    "cost_usd",
    "latency_ms",
    "status",
    "failure_reason",
];

/// One CSV row per outcome; unassessed tiers are empty cells.
pub fn outcomes_csv(outcomes: &[CaseOutcome]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(OUTCOME_COLUMNS).expect("in-memory write");
    for o in outcomes {
        let flags = o.score.as_ref().map(TieredScore::flags).unwrap_or_default();
        let status = serde_json::to_value(&o.status).expect("enum serializes");
        let reason = o
            .score
            .as_ref()
            .and_then(|s| s.failure_reason.clone())
            .or_else(|| o.error.clone())
            .unwrap_or_default();
        let mut rec = vec![
            o.case_id.clone(),
            o.dataset.clone(),
            o.model.clone(),
            o.strategy.clone(),
        ];
        rec.extend(flags);
        rec.extend([
            o.tokens_in.to_string(),
            o.tokens_out.to_string(),
            o.cost_usd(),
            o.latency_ms.to_string(),
            status.as_str().unwrap_or_default().to_owned(),
            reason,
        ]);
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 cells")
}

/// One JSON object per line with every intermediate artifact.
pub fn outcomes_jsonl(outcomes: &[CaseOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&serde_json::to_string(o).expect("outcomes serialize"));
        out.push('\n');
    }
    out
}
