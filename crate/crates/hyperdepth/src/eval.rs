//! Evaluation against labelled word-pair datasets.
//!
//! Two protocols. *Directionality*: hypernym pairs come ordered
//! (hypernym, hyponym); precision is the share called in that direction,
//! with undecided and missing pairs counted in the denominator as
//! failures — coverage is part of the result, not an excuse. *Detection*:
//! hypernym pairs against negatives of one relation (or all of them),
//! ranked by combined score and summarized as average precision. Pairs
//! with a missing word score 0 and stay in the ranking.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::depth::{lambda_word, TopologyKind};
use crate::error::{Error, Result};
use crate::headings::SimMethod;
use crate::scoring::{decide_direction, score_pairs, Direction, ScoreContext};

/// One labelled dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledPair {
    pub w1: String,
    pub w2: String,
    pub is_hypernym: bool,
    pub relation: String,
}

/// Cut a trailing part-of-speech marker (`-n`, `-v`, `-j`), if present.
fn strip_pos_suffix(word: &str) -> &str {
    for suffix in ["-n", "-v", "-j"] {
        if let Some(stripped) = word.strip_suffix(suffix) {
            if !stripped.is_empty() {
                return stripped;
            }
        }
    }
    word
}

/// Read a 4-column TSV: `w1 TAB w2 TAB True|False TAB relation`. `#`
/// starts a comment line; blank lines are skipped. With `strip_pos`,
/// trailing POS markers are removed from both words.
pub fn load_dataset(path: &Path, strip_pos: bool) -> Result<Vec<LabeledPair>> {
    let file = File::open(path).map_err(Error::io_at(path))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(Error::io_at(path))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated columns, found {}", fields.len())));
        }
        let is_hypernym = match fields[2].trim() {
            t if t.eq_ignore_ascii_case("true") => true,
            t if t.eq_ignore_ascii_case("false") => false,
            other => return Err(bad(format!("expected True or False, found {other:?}"))),
        };
        let (mut w1, mut w2) = (fields[0].trim(), fields[1].trim());
        if strip_pos {
            w1 = strip_pos_suffix(w1);
            w2 = strip_pos_suffix(w2);
        }
        if w1.is_empty() || w2.is_empty() {
            return Err(bad("empty word".into()));
        }
        pairs.push(LabeledPair {
            w1: w1.to_string(),
            w2: w2.to_string(),
            is_hypernym,
            relation: fields[3].trim().to_string(),
        });
    }
    Ok(pairs)
}

/// What to do with score ties when ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TieMode {
    /// Keep input order within a tie (the default).
    Stable,
    /// Put negatives before positives within a tie — the pessimistic
    /// reading; together with `Stable` it brackets the truth.
    Worst,
}

impl std::fmt::Display for TieMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TieMode::Stable => write!(f, "stable"),
            TieMode::Worst => write!(f, "worst"),
        }
    }
}

/// Average precision of a scored ranking: sort descending (ties per
/// `tie`), then average precision-at-rank over the positive items.
/// Undefined without at least one positive.
pub fn average_precision(ranked: &[(f64, bool)], tie: TieMode) -> Result<f64> {
    let positives = ranked.iter().filter(|(_, p)| *p).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one positive pair".into(),
        ));
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    // stable sort: equal keys keep input order
    match tie {
        TieMode::Stable => {
            order.sort_by(|&a, &b| {
                ranked[b].0.partial_cmp(&ranked[a].0).expect("finite scores")
            });
        }
        TieMode::Worst => {
            order.sort_by(|&a, &b| {
                ranked[b]
                    .0
                    .partial_cmp(&ranked[a].0)
                    .expect("finite scores")
                    .then_with(|| ranked[a].1.cmp(&ranked[b].1)) // false first
            });
        }
    }
    let mut seen_positive = 0usize;
    let mut sum = 0.0;
    for (rank0, &at) in order.iter().enumerate() {
        if ranked[at].1 {
            seen_positive += 1;
            sum += seen_positive as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Outcome of a directionality run over hypernym pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionOutcome {
    pub total: usize,
    pub correct: usize,
    pub undecided: usize,
    /// Pairs where at least one word had no λ; a subset of the failures.
    pub missing: usize,
    pub precision: f64,
}

/// Precision of direction calls over (hypernym, hyponym) ordered pairs:
/// correct / total, where undecided and missing pairs count as wrong.
pub fn directionality_precision(
    lambdas: &[(Option<f64>, Option<f64>)],
) -> Result<DirectionOutcome> {
    if lambdas.is_empty() {
        return Err(Error::UndefinedMetric(
            "directionality precision over an empty pair list".into(),
        ));
    }
    let mut correct = 0usize;
    let mut undecided = 0usize;
    let mut missing = 0usize;
    for &(l1, l2) in lambdas {
        if l1.is_none() || l2.is_none() {
            missing += 1;
        }
        match decide_direction(l1, l2) {
            Direction::W1IsHyper => correct += 1,
            Direction::Undecided => undecided += 1,
            Direction::W2IsHyper => {}
        }
    }
    Ok(DirectionOutcome {
        total: lambdas.len(),
        correct,
        undecided,
        missing,
        precision: correct as f64 / lambdas.len() as f64,
    })
}

/// One evaluation run, machine-readable. `scored + missing = total`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub topology: TopologyKind,
    pub similarity: SimMethod,
    pub total: usize,
    pub scored: usize,
    pub missing: usize,
    pub metric: String,
    pub value: f64,
}

/// Directionality over the hypernym rows of a dataset. Only λ matters
/// here; similarity never runs, so no embeddings are needed.
pub fn direction_eval(
    pairs: &[LabeledPair],
    ctx: &ScoreContext<'_>,
    dataset: &str,
) -> Result<EvalReport> {
    use rayon::prelude::*;

    let hypernyms: Vec<&LabeledPair> = pairs.iter().filter(|p| p.is_hypernym).collect();
    if hypernyms.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "dataset {dataset} has no hypernym pairs"
        )));
    }
    let lambdas: Vec<(Option<f64>, Option<f64>)> = hypernyms
        .par_iter()
        .map(|p| {
            let l1 = lambda_word(&p.w1, ctx.corpus, ctx.index, ctx.topology, ctx.k)?;
            let l2 = lambda_word(&p.w2, ctx.corpus, ctx.index, ctx.topology, ctx.k)?;
            Ok((l1.aggregate, l2.aggregate))
        })
        .collect::<Result<_>>()?;
    let outcome = directionality_precision(&lambdas)?;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        topology: ctx.topology,
        similarity: ctx.method,
        total: outcome.total,
        scored: outcome.total - outcome.missing,
        missing: outcome.missing,
        metric: "directionality_precision".to_string(),
        value: outcome.precision,
    })
}

/// Detection: rank hypernym pairs against negatives of `vs` ("all" keeps
/// every non-hypernym relation) by combined score and report average
/// precision. Missing-word pairs stay in the ranking at score 0.
pub fn detection_eval(
    pairs: &[LabeledPair],
    vs: &str,
    tie: TieMode,
    ctx: &ScoreContext<'_>,
    dataset: &str,
) -> Result<EvalReport> {
    let retained: Vec<&LabeledPair> = pairs
        .iter()
        .filter(|p| p.is_hypernym || vs == "all" || p.relation == vs)
        .collect();
    let negatives = retained.iter().filter(|p| !p.is_hypernym).count();
    if negatives == 0 {
        return Err(Error::UndefinedMetric(format!(
            "relation filter {vs:?} matches no negative pairs"
        )));
    }
    let words: Vec<(String, String)> = retained
        .iter()
        .map(|p| (p.w1.clone(), p.w2.clone()))
        .collect();
    let scores = score_pairs(ctx, &words)?;
    let ranked: Vec<(f64, bool)> = scores
        .iter()
        .zip(&retained)
        .map(|(s, p)| (s.combined, p.is_hypernym))
        .collect();
    let value = average_precision(&ranked, tie)?;
    let missing = scores.iter().filter(|s| s.w1_missing || s.w2_missing).count();
    Ok(EvalReport {
        dataset: dataset.to_string(),
        topology: ctx.topology,
        similarity: ctx.method,
        total: retained.len(),
        scored: retained.len() - missing,
        missing,
        metric: format!("average_precision_vs_{vs}"),
        value,
    })
}
