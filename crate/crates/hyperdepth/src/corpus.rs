//! Canonical corpus model shared by every stage: articles made of heading
//! units, normalized-title lookup, and token-level phrase matching.
//!
//! Matching is deliberately dumb: casefolded whole tokens with punctuation
//! trimmed from the edges, no stemming or lemmatization. A phrase of several
//! tokens matches only as a contiguous run inside a single sentence. Heading
//! text is never scanned for occurrences; headings feed retrieval and the
//! heading-similarity stage instead.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One section of an article: heading text, nesting level, body sentences
/// and outgoing link targets in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unit {
    pub heading: String,
    pub level: u32,
    pub sentences: Vec<String>,
    pub links: Vec<String>,
}

/// An article in canonical form.
///
/// `normalized_title` is always `normalize_title(&title)` and is the key
/// under which the article lives in a [`Corpus`]. Redirect articles carry a
/// `redirect_target` and usually no units; every other article has at least
/// one unit (unit 0 is the lead, headed by the page title at level 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub normalized_title: String,
    pub is_disambiguation: bool,
    pub redirect_target: Option<String>,
    pub units: Vec<Unit>,
}

impl Article {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        is_disambiguation: bool,
        redirect_target: Option<String>,
        units: Vec<Unit>,
    ) -> Result<Article> {
        let title = title.into();
        let normalized_title = normalize_title(&title)?;
        Ok(Article {
            id: id.into(),
            title,
            normalized_title,
            is_disambiguation,
            redirect_target,
            units,
        })
    }
}

/// Lowercase, underscores to spaces, whitespace runs collapsed, ends
/// trimmed. Idempotent. Errors when nothing is left.
pub fn normalize_title(raw: &str) -> Result<String> {
    let lowered = raw.to_lowercase().replace('_', " ");
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(Error::InvalidTitle(raw.to_string()));
    }
    Ok(collapsed)
}

/// Casefolded tokens with non-alphanumeric characters trimmed from both
/// edges; tokens that trim away entirely are dropped. Interior punctuation
/// (hyphens, apostrophes) survives.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// Position of a phrase match: which unit, which sentence within it.
/// Several instances inside one sentence still count as one occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence {
    pub unit_index: usize,
    pub sentence_index: usize,
}

/// All sentences of `article` in which `phrase` appears as a contiguous
/// token run. Sentence indices are 0-based within their unit.
pub fn find_occurrences(article: &Article, phrase: &str) -> BTreeSet<Occurrence> {
    let needle = tokenize(phrase);
    let mut out = BTreeSet::new();
    if needle.is_empty() {
        return out;
    }
    for (unit_index, unit) in article.units.iter().enumerate() {
        for (sentence_index, sentence) in unit.sentences.iter().enumerate() {
            let tokens = tokenize(sentence);
            if tokens.len() < needle.len() {
                continue;
            }
            if tokens.windows(needle.len()).any(|w| w == needle.as_slice()) {
                out.insert(Occurrence {
                    unit_index,
                    sentence_index,
                });
            }
        }
    }
    out
}

/// Immutable article collection keyed by normalized title. Iteration order
/// is ascending normalized title, which is what makes corpus files and
/// downstream output deterministic.
#[derive(Debug, Default, Clone)]
pub struct Corpus {
    articles: BTreeMap<String, Article>,
    by_id: HashMap<String, String>,
}

impl Corpus {
    pub fn new() -> Corpus {
        Corpus::default()
    }

    /// Rejects duplicate normalized titles, duplicate ids, and articles
    /// that have neither units nor a redirect target.
    pub fn insert(&mut self, article: Article) -> Result<()> {
        if article.units.is_empty() && article.redirect_target.is_none() {
            return Err(Error::EmptyArticle(article.title));
        }
        if self.articles.contains_key(&article.normalized_title) {
            return Err(Error::DuplicateArticle(article.normalized_title));
        }
        if self.by_id.contains_key(&article.id) {
            return Err(Error::DuplicateArticle(article.id));
        }
        self.by_id
            .insert(article.id.clone(), article.normalized_title.clone());
        self.articles
            .insert(article.normalized_title.clone(), article);
        Ok(())
    }

    /// Exact lookup by normalized title; no redirect following.
    pub fn get(&self, normalized_title: &str) -> Option<&Article> {
        self.articles.get(normalized_title)
    }

    pub fn get_by_id(&self, id: &str) -> Option<&Article> {
        self.articles.get(self.by_id.get(id)?)
    }

    /// Normalize `title` and follow redirects to a concrete article.
    /// Chains longer than 4 hops (including cycles) resolve to `None`.
    pub fn resolve(&self, title: &str) -> Option<&Article> {
        let key = normalize_title(title).ok()?;
        let mut article = self.articles.get(&key)?;
        for _ in 0..=4 {
            match &article.redirect_target {
                None => return Some(article),
                Some(target) => {
                    let key = normalize_title(target).ok()?;
                    article = self.articles.get(&key)?;
                }
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }
}

/// Wire format of one corpus line. `normalized_title` is derived, never
/// stored. Unknown fields are rejected so silent schema drift cannot pass.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArticleRecord {
    id: String,
    title: String,
    is_disambiguation: bool,
    redirect_target: Option<String>,
    units: Vec<Unit>,
}

/// Read a JSON-lines corpus file. Errors name the offending line.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(Error::io_at(path))?;
    let reader = BufReader::new(file);
    let mut corpus = Corpus::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(Error::io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArticleRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        if record.units.is_empty() && record.redirect_target.is_none() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!(
                    "article {:?} has no units and no redirect target",
                    record.title
                ),
            });
        }
        let article = Article::new(
            record.id,
            record.title,
            record.is_disambiguation,
            record.redirect_target,
            record.units,
        )
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if corpus.get(&article.normalized_title).is_some()
            || corpus.get_by_id(&article.id).is_some()
        {
            return Err(Error::Duplicate {
                path: path.to_path_buf(),
                line: line_no,
                title: article.normalized_title,
            });
        }
        corpus.insert(article)?;
    }
    Ok(corpus)
}

/// Write a corpus as JSON lines, one article per line, ascending
/// normalized title. Reading the result back gives an equal corpus.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io_at(path))?;
    let mut writer = BufWriter::new(file);
    for article in corpus.iter() {
        let record = ArticleRecord {
            id: article.id.clone(),
            title: article.title.clone(),
            is_disambiguation: article.is_disambiguation,
            redirect_target: article.redirect_target.clone(),
            units: article.units.clone(),
        };
        let json = serde_json::to_string(&record).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(json.as_bytes()).map_err(Error::io_at(path))?;
        writer.write_all(b"\n").map_err(Error::io_at(path))?;
    }
    writer.flush().map_err(Error::io_at(path))?;
    Ok(())
}


#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    fn arb_word() -> impl Strategy<Value = String> {
        "[a-z]{1,8}"
    }

    fn arb_sentence() -> impl Strategy<Value = String> {
        proptest::collection::vec(arb_word(), 1..8).prop_map(|ws| ws.join(" ") + ".")
    }

    fn arb_unit(level: u32) -> impl Strategy<Value = Unit> {
        (proptest::collection::vec(arb_sentence(), 0..5), arb_word()).prop_map(
            move |(sentences, heading)| Unit {
                heading,
                level,
                sentences,
                links: vec![],
            },
        )
    }

    fn arb_article(title: String) -> impl Strategy<Value = Article> {
        proptest::collection::vec(1u32..4, 0..5)
            .prop_flat_map(move |levels| {
                let mut units: Vec<BoxedStrategy<Unit>> = vec![arb_unit(0).boxed()];
                for level in levels {
                    units.push(arb_unit(level).boxed());
                }
                (Just(title.clone()), units)
            })
            .prop_map(|(title, units)| Article::new(title.clone(), title, false, None, units).unwrap())
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "[A-Za-z_ ]{1,24}") {
            if let Ok(once) = normalize_title(&raw) {
                prop_assert_eq!(normalize_title(&once).unwrap(), once);
            }
        }

        #[test]
        fn occurrence_indices_stay_in_bounds(
            a in arb_article("subject".to_string()),
            word in arb_word(),
        ) {
            for occ in find_occurrences(&a, &word) {
                prop_assert!(occ.unit_index < a.units.len());
                prop_assert!(occ.sentence_index < a.units[occ.unit_index].sentences.len());
            }
        }

        #[test]
        fn duplicating_phrase_in_sentence_changes_nothing(
            a in arb_article("subject".to_string()),
            word in arb_word(),
        ) {
            let mut doubled = a.clone();
            for u in &mut doubled.units {
                for s in &mut u.sentences {
                    let twice = format!("{s} {word} {word}");
                    *s = twice;
                }
            }
            let occs = find_occurrences(&doubled, &word);
            // every sentence now contains the word exactly once as a set entry
            let expected: usize = doubled.units.iter().map(|u| u.sentences.len()).sum();
            prop_assert_eq!(occs.len(), expected);
        }

        #[test]
        fn corpus_roundtrip_is_lossless(
            titles in proptest::collection::btree_set("[a-z]{3,10}", 1..6),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.jsonl");
            let mut corpus = Corpus::new();
            for t in &titles {
                let art = Article::new(
                    t.clone(),
                    t.clone(),
                    false,
                    None,
                    vec![Unit {
                        heading: t.clone(),
                        level: 0,
                        sentences: vec![format!("{t} exists.")],
                        links: vec![],
                    }],
                )
                .unwrap();
                corpus.insert(art).unwrap();
            }
            write_corpus(&corpus, &path).unwrap();
            let back = read_corpus(&path).unwrap();
            prop_assert_eq!(back.len(), corpus.len());
            for a in corpus.iter() {
                prop_assert_eq!(back.get(&a.normalized_title).unwrap(), a);
            }
        }
    }
}
