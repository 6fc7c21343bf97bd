//! Heading meaning sets and their similarity.
//!
//! A word's meanings are read off the corpus: resolve the word's article
//! (following redirects); a regular article contributes its full heading
//! set as one meaning, while a disambiguation page fans out to its
//! outgoing links. A visited set plus a cap on successive disambiguation
//! expansions keeps cyclic link graphs finite.
//!
//! Two words are compared by the best pair of meanings: Jaccard overlap of
//! the heading strings, or cosine of averaged heading embeddings.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::corpus::{normalize_title, tokenize, Corpus};
use crate::error::{Error, Result};

/// Boilerplate section headings that say nothing about the topic.
pub const HEADING_STOPLIST: [&str; 5] = [
    "references",
    "external links",
    "see also",
    "notes",
    "further reading",
];

/// The meanings found for one word: source article → its normalized
/// heading strings. Map and sets are ordered, so iteration (and output)
/// is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HeadingSets {
    pub word: String,
    pub meanings: BTreeMap<String, BTreeSet<String>>,
}

impl HeadingSets {
    pub fn is_empty(&self) -> bool {
        self.meanings.is_empty()
    }
}

/// Casefold and trim — heading strings from different articles must
/// compare equal when they only differ in case or padding.
fn normalize_heading(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Collect the meaning sets for `word`.
///
/// Worklist walk: the word's own article (redirects followed) is the seed.
/// A regular article contributes one meaning: the headings of all its
/// units, page title included, minus the stoplist when `use_stoplist` is
/// set. A disambiguation page contributes nothing itself but enqueues
/// every outgoing link; each enqueue counts one disambiguation hop, and
/// anything past `max_disambig_hops` is dropped. Every title is visited at
/// most once, so cycles terminate.
pub fn extract_headings(
    word: &str,
    corpus: &Corpus,
    max_disambig_hops: u32,
    use_stoplist: bool,
) -> HeadingSets {
    let mut meanings = BTreeMap::new();
    let mut visited: HashSet<String> = HashSet::new();
    let mut queue: VecDeque<(String, u32)> = VecDeque::new();

    if let Ok(seed) = normalize_title(word) {
        queue.push_back((seed, 0));
    }
    while let Some((title, hops)) = queue.pop_front() {
        if !visited.insert(title.clone()) {
            continue;
        }
        let Some(article) = corpus.resolve(&title) else { continue };
        // a redirect may land on an already-harvested article
        if article.normalized_title != title && !visited.insert(article.normalized_title.clone()) {
            continue;
        }
        if article.is_disambiguation {
            if hops + 1 > max_disambig_hops {
                continue;
            }
            for unit in &article.units {
                for link in &unit.links {
                    queue.push_back((link.clone(), hops + 1));
                }
            }
        } else {
            let headings: BTreeSet<String> = article
                .units
                .iter()
                .map(|u| normalize_heading(&u.heading))
                .filter(|h| !use_stoplist || !HEADING_STOPLIST.contains(&h.as_str()))
                .collect();
            meanings.insert(article.normalized_title.clone(), headings);
        }
    }
    HeadingSets {
        word: word.to_string(),
        meanings,
    }
}

/// |A ∩ B| / |A ∪ B|; two empty sets share nothing.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}

/// Word vectors in the plain text format: an optional `count dim` header
/// line, then one `token v1 … vd` line each. Tokens are casefolded on
/// load; the first spelling of a duplicate wins.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        let file = File::open(path).map_err(Error::io_at(path))?;
        let reader = BufReader::new(file);
        let mut dim: Option<usize> = None;
        let mut vectors = HashMap::new();
        let bad = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(Error::io_at(path))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if line_no == 1 && fields.len() == 2 {
                if let (Ok(_count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>())
                {
                    dim = Some(d);
                    continue;
                }
            }
            if fields.len() < 2 {
                return Err(bad(line_no, "expected a token and at least one value".into()));
            }
            let token = fields[0].to_lowercase();
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(line_no, format!("bad vector value: {e}")))?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(bad(
                        line_no,
                        format!("dimension mismatch: expected {d}, found {}", values.len()),
                    ));
                }
                Some(_) => {}
            }
            vectors.entry(token).or_insert(values);
        }
        let dim = dim.ok_or_else(|| bad(0, "no vectors in file".into()))?;
        Ok(EmbeddingTable { dim, vectors })
    }

    #[cfg(test)]
    pub fn from_pairs(dim: usize, pairs: &[(&str, Vec<f64>)]) -> EmbeddingTable {
        EmbeddingTable {
            dim,
            vectors: pairs
                .iter()
                .map(|(t, v)| (t.to_lowercase(), v.clone()))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }
}

/// Mean vector of a heading set: each heading is the mean of its in-vocab
/// token vectors (headings with no in-vocab token are skipped), and the
/// set is the mean of its heading vectors. `None` when every heading is
/// out of vocabulary.
pub fn embedding_set_vector(headings: &BTreeSet<String>, table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut heading_count = 0usize;
    for heading in headings {
        let mut heading_sum = vec![0.0; table.dim()];
        let mut token_count = 0usize;
        for token in tokenize(heading) {
            if let Some(v) = table.get(&token) {
                for (s, x) in heading_sum.iter_mut().zip(v) {
                    *s += x;
                }
                token_count += 1;
            }
        }
        if token_count == 0 {
            continue;
        }
        for (s, h) in sum.iter_mut().zip(&heading_sum) {
            *s += h / token_count as f64;
        }
        heading_count += 1;
    }
    if heading_count == 0 {
        return None;
    }
    for s in &mut sum {
        *s /= heading_count as f64;
    }
    Some(sum)
}

/// Cosine clamped to [0, 1]; `None` when either vector has zero norm.
fn cosine_clamped(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(0.0, 1.0))
}

/// How heading overlap is turned into a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Jaccard,
    /// Cosine of averaged word vectors; needs an [`EmbeddingTable`].
    #[value(name = "cosine")]
    EmbeddingCosine,
}

impl std::fmt::Display for SimMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimMethod::Jaccard => write!(f, "jaccard"),
            SimMethod::EmbeddingCosine => write!(f, "cosine"),
        }
    }
}

/// Best similarity over all meaning pairs; 0.0 when either side has no
/// meanings or no pair has a defined similarity. Symmetric, and always in
/// [0, 1].
pub fn sim_score(
    s1: &HeadingSets,
    s2: &HeadingSets,
    method: SimMethod,
    table: Option<&EmbeddingTable>,
) -> f64 {
    let mut best: Option<f64> = None;
    match method {
        SimMethod::Jaccard => {
            for c1 in s1.meanings.values() {
                for c2 in s2.meanings.values() {
                    let s = jaccard(c1, c2);
                    best = Some(best.map_or(s, |b: f64| b.max(s)));
                }
            }
        }
        SimMethod::EmbeddingCosine => {
            let table = table.expect("EmbeddingCosine requires an embedding table");
            let v1: Vec<Option<Vec<f64>>> = s1
                .meanings
                .values()
                .map(|c| embedding_set_vector(c, table))
                .collect();
            let v2: Vec<Option<Vec<f64>>> = s2
                .meanings
                .values()
                .map(|c| embedding_set_vector(c, table))
                .collect();
            for a in v1.iter().flatten() {
                for b in v2.iter().flatten() {
                    if let Some(s) = cosine_clamped(a, b) {
                        best = Some(best.map_or(s, |x: f64| x.max(s)));
                    }
                }
            }
        }
    }
    best.unwrap_or(0.0)
}


#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    fn arb_heading_set() -> impl Strategy<Value = BTreeSet<String>> {
        proptest::collection::btree_set("[a-e]{1,3}", 1..6)
    }

    pub fn arb_heading_sets(word: &'static str) -> impl Strategy<Value = HeadingSets> {
        proptest::collection::btree_map("[a-z]{1,6}", arb_heading_set(), 1..4).prop_map(move |meanings| {
            HeadingSets {
                word: word.to_string(),
                meanings,
            }
        })
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(a in arb_heading_set(), b in arb_heading_set()) {
            let ab = jaccard(&a, &b);
            prop_assert_eq!(ab, jaccard(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }

        #[test]
        fn sim_score_is_symmetric_and_bounded(
            s1 in arb_heading_sets("w1"),
            s2 in arb_heading_sets("w2"),
        ) {
            let got = sim_score(&s1, &s2, SimMethod::Jaccard, None);
            prop_assert_eq!(got, sim_score(&s2, &s1, SimMethod::Jaccard, None));
            prop_assert!((0.0..=1.0).contains(&got));
            prop_assert_eq!(sim_score(&s1, &s1, SimMethod::Jaccard, None), 1.0);
        }

        /// Adding a meaning can only raise the max-over-pairs score.
        #[test]
        fn extra_meaning_never_lowers_sim(
            s1 in arb_heading_sets("w1"),
            s2 in arb_heading_sets("w2"),
            extra in arb_heading_set(),
        ) {
            let base = sim_score(&s1, &s2, SimMethod::Jaccard, None);
            let mut grown = s1.clone();
            grown.meanings.insert("zzz-grown".to_string(), extra);
            let more = sim_score(&grown, &s2, SimMethod::Jaccard, None);
            prop_assert!(more >= base);
        }

        /// Random cyclic link graphs never hang the walk.
        #[test]
        fn extraction_terminates_on_random_link_graphs(
            n in 2usize..8,
            edges in proptest::collection::vec((0usize..8, 0usize..8), 0..24),
            disambig_mask in proptest::collection::vec(any::<bool>(), 8),
            hops in 0u32..4,
        ) {
            let mut c = Corpus::new();
            for (i, &is_disambig) in disambig_mask.iter().enumerate().take(n) {
                let title = format!("node{i}");
                let links: Vec<String> = edges
                    .iter()
                    .filter(|(from, to)| *from == i && *to < n)
                    .map(|(_, to)| format!("node{to}"))
                    .collect();
                let unit = crate::corpus::Unit {
                    heading: title.clone(),
                    level: 0,
                    sentences: vec!["s.".into()],
                    links,
                };
                c.insert(
                    crate::corpus::Article::new(
                        title.clone(),
                        title,
                        is_disambig,
                        None,
                        vec![unit],
                    )
                    .unwrap(),
                )
                .unwrap();
            }
            let s = extract_headings("node0", &c, hops, true);
            // every harvested meaning is a non-disambiguation article
            for title in s.meanings.keys() {
                prop_assert!(!c.get(title).unwrap().is_disambiguation);
            }
        }
    }
}
