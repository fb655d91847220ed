//! Tiered repair scores and their aggregation over suites.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::rdf::{isomorphic, relaxed_isomorphic, Graph};
use crate::shacl::Manifest;
use crate::sparql::{apply_update, parse_update};
use crate::validator::validate;

pub const TIERS: [&str; 4] = ["syntactic", "semantic", "relaxed_iso", "iso"];

/// Outcome of one repair. A tier is `Some` only when every lower tier passed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieredScore {
    pub syntactic: bool,
    pub semantic: Option<bool>,
    pub relaxed_iso: Option<bool>,
    pub iso: Option<bool>,
    pub failure_reason: Option<String>,
}

impl TieredScore {
    /// A repair that never reached the parser.
    pub fn unparsed(reason: impl Into<String>) -> Self {
        TieredScore {
            syntactic: false,
            semantic: None,
            relaxed_iso: None,
            iso: None,
            failure_reason: Some(reason.into()),
        }
    }

    /// Pass flags per tier, unassessed tiers counting as failures.
    pub fn passes(&self) -> [bool; 4] {
        [
            self.syntactic,
            self.semantic == Some(true),
            self.relaxed_iso == Some(true),
            self.iso == Some(true),
        ]
    }

    /// Index of the first failing tier, or `None` if all four pass.
    pub fn failed_tier(&self) -> Option<usize> {
        self.passes().iter().position(|p| !p)
    }

    /// `"true"`, `"false"` or empty for an unassessed tier.
    pub fn flags(&self) -> [String; 4] {
        let show = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
        [
            self.syntactic.to_string(),
            show(self.semantic),
            show(self.relaxed_iso),
            show(self.iso),
        ]
    }
}

/// Scores `answer` as a repair of `invalid`, whose unbroken version is `original`.
pub fn evaluate_repair(
    answer: &str,
    invalid: &Graph,
    original: &Graph,
    m: &Manifest,
) -> TieredScore {
    let update = match parse_update(answer) {
        Ok(u) => u,
        Err(e) => return TieredScore::unparsed(format!("syntax: {e}")),
    };
    let mut score = TieredScore {
        syntactic: true,
        semantic: Some(false),
        relaxed_iso: None,
        iso: None,
        failure_reason: None,
    };
    let repaired = match apply_update(invalid, &update) {
        Ok(g) => g,
        Err(e) => {
            score.failure_reason = Some(format!("apply: {e}"));
            return score;
        }
    };
    let report = validate(&repaired, m);
    if !report.conforms() {
        score.failure_reason = Some(format!("{} validation results remain", report.len()));
        return score;
    }
    score.semantic = Some(true);
    let relaxed = relaxed_isomorphic(&repaired, original);
    score.relaxed_iso = Some(relaxed);
    if !relaxed {
        score.failure_reason =
            Some("not isomorphic to the original after relaxing literals".into());
        return score;
    }
    let iso = isomorphic(&repaired, original);
    score.iso = Some(iso);
    if !iso {
        score.failure_reason = Some("literals differ from the original".into());
    }
    score
}

/// One scored (or skipped) case as seen by the aggregation.
#[derive(Clone, Debug)]
pub struct Row {
    pub dataset: String,
    pub model: String,
    pub strategy: String,
    /// `None` for cases skipped before a request was sent.
    pub score: Option<TieredScore>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Pico-USD.
    pub cost: u128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Every case counts once.
    Case,
    /// Every dataset counts once: the mean of per-dataset figures.
    Dataset,
}

/// Figures for one (model, strategy, dataset) group; the dataset is `*` for
/// the totals over all datasets.
#[derive(Clone, Debug, Serialize)]
pub struct GroupSummary {
    pub model: String,
    pub strategy: String,
    pub dataset: String,
    pub weighting: Weighting,
    pub attempted: usize,
    pub skipped: usize,
    /// Percent of attempted cases passing each tier.
    pub pass_rates: [f64; 4],
    pub mean_tokens_in: f64,
    pub mean_tokens_out: f64,
    pub mean_cost_usd: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

fn mean(total: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn summarize(model: &str, strategy: &str, dataset: &str, rows: &[&Row]) -> GroupSummary {
    let attempted: Vec<&TieredScore> = rows.iter().filter_map(|r| r.score.as_ref()).collect();
    let n = attempted.len();
    let mut passes = [0usize; 4];
    for s in &attempted {
        for (i, p) in s.passes().iter().enumerate() {
            passes[i] += usize::from(*p);
        }
    }
    let sent: Vec<&&Row> = rows.iter().filter(|r| r.score.is_some()).collect();
    GroupSummary {
        model: model.to_owned(),
        strategy: strategy.to_owned(),
        dataset: dataset.to_owned(),
        weighting: Weighting::Case,
        attempted: n,
        skipped: rows.len() - n,
        pass_rates: passes.map(|p| pct(p, n)),
        mean_tokens_in: mean(sent.iter().map(|r| r.tokens_in as f64).sum(), n),
        mean_tokens_out: mean(sent.iter().map(|r| r.tokens_out as f64).sum(), n),
        mean_cost_usd: mean(sent.iter().map(|r| r.cost as f64 * 1e-12).sum(), n),
    }
}

/// Per (model, strategy, dataset) figures, then per (model, strategy) totals
/// both case-weighted and dataset-weighted. Groups keep first-seen order.
pub fn aggregate(rows: &[Row]) -> Summary {
    let mut by_pair: IndexMap<(&str, &str), IndexMap<&str, Vec<&Row>>> = IndexMap::new();
    for r in rows {
        by_pair
            .entry((r.model.as_str(), r.strategy.as_str()))
            .or_default()
            .entry(r.dataset.as_str())
            .or_default()
            .push(r);
    }
    let mut groups = Vec::new();
    for ((model, strategy), datasets) in &by_pair {
        let per: Vec<GroupSummary> = datasets
            .iter()
            .map(|(d, rs)| summarize(model, strategy, d, rs))
            .collect();
        let all: Vec<&Row> = datasets.values().flatten().copied().collect();
        let pooled = summarize(model, strategy, "*", &all);
        let with_cases: Vec<&GroupSummary> = per.iter().filter(|g| g.attempted > 0).collect();
        let k = with_cases.len();
        let avg = |f: &dyn Fn(&GroupSummary) -> f64| mean(with_cases.iter().map(|g| f(g)).sum(), k);
        let by_dataset = GroupSummary {
            weighting: Weighting::Dataset,
            pass_rates: [0, 1, 2, 3].map(|i| avg(&|g| g.pass_rates[i])),
            mean_tokens_in: avg(&|g| g.mean_tokens_in),
            mean_tokens_out: avg(&|g| g.mean_tokens_out),
            mean_cost_usd: avg(&|g| g.mean_cost_usd),
            ..pooled.clone()
        };
        groups.extend(per);
        groups.push(pooled);
        groups.push(by_dataset);
    }
    Summary { groups }
}

const HEADER: [&str; 13] = [
    "model",
    "strategy",
    "dataset",
    "weighting",
    "attempted",
    "skipped",
    "syntactic",
    "semantic",
    "relaxed_iso",
    "iso",
    "mean_tokens_in",
    "mean_tokens_out",
    "mean_cost_usd",
];

impl GroupSummary {
    fn cells(&self) -> Vec<String> {
        let mut out = vec![
            self.model.clone(),
            self.strategy.clone(),
            self.dataset.clone(),
            match self.weighting {
                Weighting::Case => "case".into(),
                Weighting::Dataset => "dataset".into(),
            },
            self.attempted.to_string(),
            self.skipped.to_string(),
        ];
        out.extend(self.pass_rates.iter().map(|p| format!("{p:.2}")));
        out.push(format!("{:.1}", self.mean_tokens_in));
        out.push(format!("{:.1}", self.mean_tokens_out));
        out.push(format!("{:.6}", self.mean_cost_usd));
        out
    }
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for g in &self.groups {
            w.write_record(g.cells()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 cells")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", HEADER.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(HEADER.len()));
        for g in &self.groups {
            let _ = writeln!(out, "| {} |", g.cells().join(" | "));
        }
        out
    }

    /// The row for `(model, strategy, dataset, weighting)`.
    pub fn find(
        &self,
        model: &str,
        strategy: &str,
        dataset: &str,
        weighting: Weighting,
    ) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| {
            g.model == model
                && g.strategy == strategy
                && g.dataset == dataset
                && g.weighting == weighting
        })
    }
}
