//! Pair scoring: combine the depth difference of two words with their
//! heading similarity, and call the direction of the relation.
//!
//! For a pair (w1, w2) the depth term is `(1 + λ(w1) − λ(w2)) / 2`,
//! clamped into [0, 1] (the raw value is kept for analysis); the combined
//! score is `depth_term × sim` and lives in [0, 1]. The sign of
//! λ(w1) − λ(w2) alone decides direction: positive means w1 is the more
//! general term. A word with no retrieved articles has no λ; such pairs
//! combine to 0, stay undecided, and are flagged so evaluation can report
//! coverage instead of silently absorbing them.

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::depth::{lambda_word, TopologyKind};
use crate::error::Result;
use crate::headings::{extract_headings, sim_score, EmbeddingTable, SimMethod};
use crate::index::InvertedIndex;

/// Who is the more general term of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    W1IsHyper,
    W2IsHyper,
    Undecided,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::W1IsHyper => write!(f, "w1"),
            Direction::W2IsHyper => write!(f, "w2"),
            Direction::Undecided => write!(f, "undecided"),
        }
    }
}

/// `(1 + λ1 − λ2) / 2` clamped to [0, 1]; returns (clamped, raw).
pub fn depth_term(lambda1: f64, lambda2: f64) -> (f64, f64) {
    let raw = (1.0 + lambda1 - lambda2) / 2.0;
    (raw.clamp(0.0, 1.0), raw)
}

/// Sign of the λ difference; any undefined λ (or an exact tie) stays
/// undecided rather than guessing.
pub fn decide_direction(lambda1: Option<f64>, lambda2: Option<f64>) -> Direction {
    match (lambda1, lambda2) {
        (Some(l1), Some(l2)) if l1 > l2 => Direction::W1IsHyper,
        (Some(l1), Some(l2)) if l1 < l2 => Direction::W2IsHyper,
        _ => Direction::Undecided,
    }
}

/// Everything computed for one pair, intermediates included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub w1: String,
    pub w2: String,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// Clamped depth term; `None` when either λ is undefined.
    pub depth_term: Option<f64>,
    /// The same term before clamping.
    pub depth_term_raw: Option<f64>,
    pub sim: f64,
    pub combined: f64,
    pub direction: Direction,
    pub w1_missing: bool,
    pub w2_missing: bool,
}

/// Shared inputs for scoring a batch of pairs.
pub struct ScoreContext<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a InvertedIndex,
    pub topology: TopologyKind,
    pub k: usize,
    pub method: SimMethod,
    pub table: Option<&'a EmbeddingTable>,
    pub max_disambig_hops: u32,
    pub use_stoplist: bool,
}

/// Score one pair end to end: λ for both words over the retrieved
/// articles, heading similarity, combined score, direction.
pub fn score_pair(ctx: &ScoreContext<'_>, w1: &str, w2: &str) -> Result<PairScore> {
    let profile1 = lambda_word(w1, ctx.corpus, ctx.index, ctx.topology, ctx.k)?;
    let profile2 = lambda_word(w2, ctx.corpus, ctx.index, ctx.topology, ctx.k)?;
    let lambda1 = profile1.aggregate;
    let lambda2 = profile2.aggregate;

    let h1 = extract_headings(w1, ctx.corpus, ctx.max_disambig_hops, ctx.use_stoplist);
    let h2 = extract_headings(w2, ctx.corpus, ctx.max_disambig_hops, ctx.use_stoplist);
    let sim = sim_score(&h1, &h2, ctx.method, ctx.table);

    let (dt, raw, combined) = match (lambda1, lambda2) {
        (Some(l1), Some(l2)) => {
            let (dt, raw) = depth_term(l1, l2);
            (Some(dt), Some(raw), dt * sim)
        }
        _ => (None, None, 0.0),
    };
    Ok(PairScore {
        w1: w1.to_string(),
        w2: w2.to_string(),
        lambda1,
        lambda2,
        depth_term: dt,
        depth_term_raw: raw,
        sim,
        combined,
        direction: decide_direction(lambda1, lambda2),
        w1_missing: lambda1.is_none(),
        w2_missing: lambda2.is_none(),
    })
}

/// Score many pairs in parallel; the output preserves input order.
pub fn score_pairs(ctx: &ScoreContext<'_>, pairs: &[(String, String)]) -> Result<Vec<PairScore>> {
    pairs
        .par_iter()
        .map(|(w1, w2)| score_pair(ctx, w1, w2))
        .collect()
}
