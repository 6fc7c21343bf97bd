//! Structural depth of a word in explanatory articles.
//!
//! The intuition: general terms are introduced early and shallow (the lead,
//! top-level sections), specific terms appear late and deep. Each
//! occurrence of a word contributes the product of two complements —
//! how shallow its unit sits in the article's topology, and how early its
//! sentence sits in the unit:
//!
//! ```text
//! λ(a, w) = Σ (1 − d(uᵢ)/D(a)) · (1 − j/|uᵢ|)
//! ```
//!
//! with `d(uᵢ)` the unit's depth under the chosen topology, `D(a)` one more
//! than the deepest unit (so the first factor never reaches zero), `j` the
//! 0-based sentence index and `|uᵢ|` the unit's sentence count. Both
//! factors live in (0, 1], so λ is positive exactly when the word occurs
//! and each occurrence contributes at most 1.
//!
//! A word's score over a corpus is the median of its per-article values
//! across the retrieved top-k articles; an even count averages the two
//! middle values. No retrieved article means no score — the aggregate is
//! undefined, never zero.

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{find_occurrences, Article, Corpus};
use crate::error::{Error, Result};
use crate::index::{top_k_articles, InvertedIndex};

/// How unit depth is read off the article structure.
///
/// `Star`: depth is the heading level — every top-level section hangs
/// directly off the lead. `Linear`: depth is the unit's position in
/// document order — the article is one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Star,
    Linear,
}

impl std::fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TopologyKind::Star => write!(f, "star"),
            TopologyKind::Linear => write!(f, "linear"),
        }
    }
}

/// Depth per unit plus the article's total depth (max + 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthAssignment {
    pub unit_depths: Vec<u32>,
    pub total_depth: u32,
}

/// Assign unit depths under `topology`. The first unit is the lead and
/// must sit at depth 0; articles without units have no depth.
pub fn assign_depths(article: &Article, topology: TopologyKind) -> Result<DepthAssignment> {
    if article.units.is_empty() {
        return Err(Error::NotComputable(format!(
            "article {:?} has no units",
            article.normalized_title
        )));
    }
    let unit_depths: Vec<u32> = match topology {
        TopologyKind::Star => article.units.iter().map(|u| u.level).collect(),
        TopologyKind::Linear => (0..article.units.len() as u32).collect(),
    };
    if unit_depths[0] != 0 {
        return Err(Error::NotComputable(format!(
            "article {:?}: lead unit has level {}, expected 0",
            article.normalized_title, unit_depths[0]
        )));
    }
    let total_depth = unit_depths.iter().max().copied().unwrap_or(0) + 1;
    Ok(DepthAssignment {
        unit_depths,
        total_depth,
    })
}

/// λ of one word in one article. Zero when the word does not occur.
pub fn lambda_article(article: &Article, word: &str, topology: TopologyKind) -> Result<f64> {
    let depths = assign_depths(article, topology)?;
    let total = depths.total_depth as f64;
    let mut lambda = 0.0;
    for occ in find_occurrences(article, word) {
        let unit_depth = depths.unit_depths[occ.unit_index] as f64;
        let sentence_count = article.units[occ.unit_index].sentences.len() as f64;
        lambda += (1.0 - unit_depth / total) * (1.0 - occ.sentence_index as f64 / sentence_count);
    }
    Ok(lambda)
}

/// Per-article λ values for a word plus their median. `aggregate` is
/// `None` when retrieval found nothing — absence of evidence is not a
/// score of zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    pub word: String,
    /// (article id, λ), ascending by article id.
    pub per_article: Vec<(String, f64)>,
    pub aggregate: Option<f64>,
}

/// Median; even-sized input averages the two middle values.
fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite lambda values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Some(sorted[mid])
    } else {
        Some((sorted[mid - 1] + sorted[mid]) / 2.0)
    }
}

/// Retrieve the top-k articles for `word`, compute λ in each, and
/// aggregate. The per-article pass runs in parallel; results are assembled
/// in ascending article id, so output is deterministic.
pub fn lambda_word(
    word: &str,
    corpus: &Corpus,
    index: &InvertedIndex,
    topology: TopologyKind,
    k: usize,
) -> Result<DepthProfile> {
    let ids = top_k_articles(index, word, k);
    let mut per_article: Vec<(String, f64)> = ids
        .into_par_iter()
        .map(|id| {
            let article = corpus.get_by_id(&id).ok_or_else(|| {
                Error::NotComputable(format!("index returned {id:?}, absent from corpus"))
            })?;
            let lambda = lambda_article(article, word, topology)?;
            Ok((id, lambda))
        })
        .collect::<Result<_>>()?;
    per_article.sort_by(|a, b| a.0.cmp(&b.0));
    let values: Vec<f64> = per_article.iter().map(|(_, l)| *l).collect();
    Ok(DepthProfile {
        word: word.to_string(),
        per_article,
        aggregate: median(&values),
    })
}
