//! Positional inverted index with BM25 phrase retrieval.
//!
//! The retrieval unit is a whole phrase, not its individual tokens: a
//! phrase's frequency in an article is the number of *sentences* that
//! contain it as a contiguous token run — exactly the sentences
//! [`crate::corpus::find_occurrences`] would report. BM25 (k1 = 1.2,
//! b = 0.75) then ranks the matching articles, ties broken by ascending
//! normalized title. Token positions are stored per sentence so contiguity
//! checks never need the corpus at query time.
//!
//! The index persists as a binary sidecar stamped with a SHA-256 of the
//! corpus file; a stale or unreadable sidecar is rebuilt, never trusted.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{tokenize, Corpus};
use crate::error::{Error, Result};

const K1: f64 = 1.2;
const B: f64 = 0.75;

const MAGIC: &[u8; 8] = b"HDIDX001";

/// Where a token sits: which sentence of the document (counted across all
/// units) and which position inside that sentence. Heading tokens carry no
/// position — they count toward document length and term frequency only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TokenPos {
    sentence: u32,
    offset: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct Posting {
    doc: u32,
    /// Raw count of the token in the document, headings included.
    tf: u32,
    /// Sentence positions, ascending; empty when the token only appears in
    /// headings.
    positions: Vec<TokenPos>,
}

#[derive(Debug, Clone, PartialEq)]
struct DocEntry {
    id: String,
    normalized_title: String,
    /// Total token count, sentences and headings alike.
    length: u32,
}

/// Immutable after construction; safe to share across query threads.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    /// Ascending by article id; positions in this vector are the doc
    /// numbers used in postings.
    docs: Vec<DocEntry>,
    postings: HashMap<String, Vec<Posting>>,
    total_length: u64,
    corpus_hash: [u8; 32],
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_length as f64 / self.docs.len() as f64
        }
    }

    pub fn doc_length(&self, article_id: &str) -> Option<u32> {
        let at = self
            .docs
            .binary_search_by(|d| d.id.as_str().cmp(article_id))
            .ok()?;
        Some(self.docs[at].length)
    }

    /// SHA-256 of the corpus file this index was built from (zeros when the
    /// index was built in memory).
    pub fn corpus_hash(&self) -> &[u8; 32] {
        &self.corpus_hash
    }
}

/// Per-article accumulator: token → (tf, sentence positions).
type TokenMap = HashMap<String, (u32, Vec<TokenPos>)>;

/// Index every non-redirect article: all sentence and heading tokens count
/// toward length and term frequency; sentence tokens also carry positions
/// for phrase matching. Tokenization runs in parallel per article; the
/// merge is sequential in ascending article id, so the result is
/// deterministic.
pub fn build_index(corpus: &Corpus) -> InvertedIndex {
    let mut articles: Vec<_> = corpus.iter().filter(|a| a.redirect_target.is_none()).collect();
    articles.sort_by(|a, b| a.id.cmp(&b.id));

    let tokenized: Vec<(DocEntry, TokenMap)> = articles
        .par_iter()
        .map(|article| {
            let mut local = TokenMap::new();
            let mut length = 0u32;
            let mut sentence_no = 0u32;
            for unit in &article.units {
                for token in tokenize(&unit.heading) {
                    length += 1;
                    local.entry(token).or_default().0 += 1;
                }
                for sentence in &unit.sentences {
                    for (offset, token) in tokenize(sentence).into_iter().enumerate() {
                        length += 1;
                        let slot = local.entry(token).or_default();
                        slot.0 += 1;
                        slot.1.push(TokenPos {
                            sentence: sentence_no,
                            offset: offset as u32,
                        });
                    }
                    sentence_no += 1;
                }
            }
            let entry = DocEntry {
                id: article.id.clone(),
                normalized_title: article.normalized_title.clone(),
                length,
            };
            (entry, local)
        })
        .collect();

    let mut docs = Vec::with_capacity(tokenized.len());
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut total_length = 0u64;
    for (doc_no, (entry, local)) in tokenized.into_iter().enumerate() {
        total_length += entry.length as u64;
        docs.push(entry);
        let mut tokens: Vec<_> = local.into_iter().collect();
        tokens.sort_by(|a, b| a.0.cmp(&b.0));
        for (token, (tf, positions)) in tokens {
            postings.entry(token).or_default().push(Posting {
                doc: doc_no as u32,
                tf,
                positions,
            });
        }
    }

    InvertedIndex {
        docs,
        postings,
        total_length,
        corpus_hash: [0; 32],
    }
}

/// Number of distinct sentences of `doc` containing the token run
/// `needle`. Zero when any token is absent from the document.
fn phrase_tf(doc: u32, needle: &[&Vec<Posting>]) -> u32 {
    let per_doc: Option<Vec<&Posting>> = needle
        .iter()
        .map(|list| {
            list.binary_search_by(|p| p.doc.cmp(&doc))
                .ok()
                .map(|at| &list[at])
        })
        .collect();
    let Some(per_doc) = per_doc else { return 0 };

    if per_doc.len() == 1 {
        let mut sentences: Vec<u32> = per_doc[0].positions.iter().map(|p| p.sentence).collect();
        sentences.dedup();
        return sentences.len() as u32;
    }

    let rest: Vec<std::collections::HashSet<(u32, u32)>> = per_doc[1..]
        .iter()
        .map(|p| p.positions.iter().map(|t| (t.sentence, t.offset)).collect())
        .collect();
    let mut matched: Vec<u32> = Vec::new();
    for start in &per_doc[0].positions {
        let all_follow = rest
            .iter()
            .enumerate()
            .all(|(i, set)| set.contains(&(start.sentence, start.offset + 1 + i as u32)));
        if all_follow {
            matched.push(start.sentence);
        }
    }
    matched.dedup();
    matched.len() as u32
}

/// Rank the articles containing `phrase`, best first: BM25 where the whole
/// phrase is the term and its frequency is the number of matching
/// sentences. Score ties are broken by ascending normalized title. Every
/// returned article contains the phrase in at least one sentence.
pub fn top_k_scored(index: &InvertedIndex, phrase: &str, k: usize) -> Vec<(String, f64)> {
    let tokens = tokenize(phrase);
    if tokens.is_empty() || k == 0 || index.docs.is_empty() {
        return Vec::new();
    }
    let needle: Option<Vec<&Vec<Posting>>> =
        tokens.iter().map(|t| index.postings.get(t)).collect();
    let Some(needle) = needle else { return Vec::new() };

    // candidates: docs present in the rarest token's posting list
    let shortest = needle
        .iter()
        .min_by_key(|list| list.len())
        .expect("at least one token");
    let mut hits: Vec<(u32, u32)> = Vec::new();
    for posting in shortest.iter() {
        let tf = phrase_tf(posting.doc, &needle);
        if tf > 0 {
            hits.push((posting.doc, tf));
        }
    }
    if hits.is_empty() {
        return Vec::new();
    }

    let n = index.docs.len() as f64;
    let df = hits.len() as f64;
    let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
    let avg = index.avg_doc_length();
    let mut scored: Vec<(f64, &DocEntry)> = hits
        .into_iter()
        .map(|(doc, tf)| {
            let entry = &index.docs[doc as usize];
            let tf = tf as f64;
            let norm = K1 * (1.0 - B + B * entry.length as f64 / avg);
            (idf * tf * (K1 + 1.0) / (tf + norm), entry)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("BM25 scores are finite")
            .then_with(|| a.1.normalized_title.cmp(&b.1.normalized_title))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(score, entry)| (entry.id.clone(), score))
        .collect()
}

/// [`top_k_scored`] without the scores.
pub fn top_k_articles(index: &InvertedIndex, phrase: &str, k: usize) -> Vec<String> {
    top_k_scored(index, phrase, k).into_iter().map(|(id, _)| id).collect()
}

/// SHA-256 of a file's bytes; stamps index sidecars.
pub fn file_sha256(path: &Path) -> Result<[u8; 32]> {
    let mut file = File::open(path).map_err(Error::io_at(path))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(Error::io_at(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().into())
}

fn put_u32(w: &mut impl Write, v: u32, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(Error::io_at(path))
}

fn put_str(w: &mut impl Write, s: &str, path: &Path) -> Result<()> {
    put_u32(w, s.len() as u32, path)?;
    w.write_all(s.as_bytes()).map_err(Error::io_at(path))
}

struct IndexSource<'a, R: Read> {
    reader: R,
    path: &'a Path,
}

impl<R: Read> IndexSource<'_, R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.reader.read_exact(&mut b).map_err(Error::io_at(self.path))?;
        Ok(u32::from_le_bytes(b))
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        if len > 1 << 24 {
            return Err(Error::BadIndex {
                path: self.path.to_path_buf(),
                message: "unreasonable string length".into(),
            });
        }
        let mut b = vec![0u8; len];
        self.reader.read_exact(&mut b).map_err(Error::io_at(self.path))?;
        String::from_utf8(b).map_err(|_| Error::BadIndex {
            path: self.path.to_path_buf(),
            message: "non-UTF-8 string".into(),
        })
    }
}

/// Persist the index with `corpus_hash` stamped into the header.
pub fn write_index(index: &InvertedIndex, corpus_hash: [u8; 32], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io_at(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(Error::io_at(path))?;
    w.write_all(&corpus_hash).map_err(Error::io_at(path))?;
    put_u32(&mut w, index.docs.len() as u32, path)?;
    for d in &index.docs {
        put_str(&mut w, &d.id, path)?;
        put_str(&mut w, &d.normalized_title, path)?;
        put_u32(&mut w, d.length, path)?;
    }
    let mut tokens: Vec<_> = index.postings.keys().collect();
    tokens.sort();
    put_u32(&mut w, tokens.len() as u32, path)?;
    for token in tokens {
        put_str(&mut w, token, path)?;
        let list = &index.postings[token];
        put_u32(&mut w, list.len() as u32, path)?;
        for p in list {
            put_u32(&mut w, p.doc, path)?;
            put_u32(&mut w, p.tf, path)?;
            put_u32(&mut w, p.positions.len() as u32, path)?;
            for t in &p.positions {
                put_u32(&mut w, t.sentence, path)?;
                put_u32(&mut w, t.offset, path)?;
            }
        }
    }
    w.flush().map_err(Error::io_at(path))
}

/// Read a persisted index back. The caller decides whether the stamped
/// corpus hash is still current.
pub fn read_index(path: &Path) -> Result<InvertedIndex> {
    let file = File::open(path).map_err(Error::io_at(path))?;
    let mut src = IndexSource {
        reader: BufReader::new(file),
        path,
    };
    let mut magic = [0u8; 8];
    src.reader.read_exact(&mut magic).map_err(Error::io_at(path))?;
    if &magic != MAGIC {
        return Err(Error::BadIndex {
            path: path.to_path_buf(),
            message: "unknown magic".into(),
        });
    }
    let mut corpus_hash = [0u8; 32];
    src.reader.read_exact(&mut corpus_hash).map_err(Error::io_at(path))?;
    let doc_count = src.u32()? as usize;
    let mut docs = Vec::with_capacity(doc_count);
    let mut total_length = 0u64;
    for _ in 0..doc_count {
        let id = src.str()?;
        let normalized_title = src.str()?;
        let length = src.u32()?;
        total_length += length as u64;
        docs.push(DocEntry {
            id,
            normalized_title,
            length,
        });
    }
    let token_count = src.u32()? as usize;
    let mut postings = HashMap::with_capacity(token_count);
    for _ in 0..token_count {
        let token = src.str()?;
        let list_len = src.u32()? as usize;
        let mut list = Vec::with_capacity(list_len);
        for _ in 0..list_len {
            let doc = src.u32()?;
            let tf = src.u32()?;
            let pos_len = src.u32()? as usize;
            let mut positions = Vec::with_capacity(pos_len);
            for _ in 0..pos_len {
                positions.push(TokenPos {
                    sentence: src.u32()?,
                    offset: src.u32()?,
                });
            }
            list.push(Posting { doc, tf, positions });
        }
        postings.insert(token, list);
    }
    Ok(InvertedIndex {
        docs,
        postings,
        total_length,
        corpus_hash,
    })
}

/// Load the sidecar if it matches the current corpus file; otherwise build
/// from `corpus` and overwrite the sidecar. Returns the index and whether
/// a rebuild happened.
pub fn load_or_build(
    corpus: &Corpus,
    corpus_path: &Path,
    index_path: &Path,
) -> Result<(InvertedIndex, bool)> {
    let hash = file_sha256(corpus_path)?;
    if index_path.exists() {
        match read_index(index_path) {
            Ok(index) if *index.corpus_hash() == hash => return Ok((index, false)),
            Ok(_) | Err(_) => {} // stale or unreadable: rebuild below
        }
    }
    let mut index = build_index(corpus);
    index.corpus_hash = hash;
    write_index(&index, hash, index_path)?;
    Ok((index, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{find_occurrences, Article, Corpus, Unit};

    fn unit(heading: &str, level: u32, sentences: &[&str]) -> Unit {
        Unit {
            heading: heading.to_string(),
            level,
            sentences: sentences.iter().map(|s| s.to_string()).collect(),
            links: Vec::new(),
        }
    }

    fn corpus(entries: &[(&str, Vec<Unit>)]) -> Corpus {
        let mut c = Corpus::new();
        for (title, units) in entries {
            c.insert(Article::new(*title, *title, false, None, units.clone()).unwrap())
                .unwrap();
        }
        c
    }

    #[test]
    fn phrase_tf_counts_sentences_not_instances() {
        let c = corpus(&[(
            "a",
            vec![unit("a", 0, &["cat cat cat", "a cat sleeps", "no felines"])],
        )]);
        let index = build_index(&c);
        let ranked = top_k_scored(&index, "cat", 10);
        assert_eq!(ranked.len(), 1);
        // two sentences contain the word, however many times
        let needle = vec![index.postings.get("cat").unwrap()];
        assert_eq!(phrase_tf(0, &needle), 2);
    }

    #[test]
    fn multi_token_phrases_match_contiguously() {
        let c = corpus(&[
            ("a", vec![unit("a", 0, &["the big cat sat"])]),
            ("b", vec![unit("b", 0, &["big dogs and a cat"])]),
            ("c", vec![unit("c", 0, &["a bigcat hybrid"])]),
        ]);
        let index = build_index(&c);
        assert_eq!(top_k_articles(&index, "big cat", 10), vec!["a"]);
    }

    #[test]
    fn heading_tokens_do_not_create_phrase_matches() {
        let c = corpus(&[
            ("a", vec![unit("big cat", 0, &["unrelated sentence"])]),
            ("b", vec![unit("b", 0, &["a big cat here"])]),
        ]);
        let index = build_index(&c);
        assert_eq!(top_k_articles(&index, "big cat", 10), vec!["b"]);
    }

    /// BM25 hand-evaluated for two articles with equal phrase frequency
    /// and different lengths: the shorter document must score higher.
    #[test]
    fn bm25_prefers_shorter_document_at_equal_tf() {
        let c = corpus(&[
            ("long", vec![unit("alpha", 0, &["cat runs far and wide today"])]),
            ("shrt", vec![unit("beta", 0, &["cat runs fast"])]),
        ]);
        let index = build_index(&c);
        let ranked = top_k_scored(&index, "cat", 10);
        assert_eq!(ranked[0].0, "shrt");
        assert_eq!(ranked[1].0, "long");

        // by hand: N = 2 docs, df = 2, lengths 7 and 4 (heading included),
        // avgdl = 5.5, tf = 1 in both.
        let idf = ((2.0 - 2.0 + 0.5) / (2.0 + 0.5) + 1.0_f64).ln();
        let score = |dl: f64| idf * (1.0 * 2.2) / (1.0 + 1.2 * (0.25 + 0.75 * dl / 5.5));
        let by_id: std::collections::HashMap<_, _> = ranked.into_iter().collect();
        assert!((by_id["shrt"] - score(4.0)).abs() < 1e-12);
        assert!((by_id["long"] - score(7.0)).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_ascending_normalized_title() {
        // identical articles -> identical scores
        let c = corpus(&[
            ("zeta", vec![unit("h", 0, &["cat here"])]),
            ("echo", vec![unit("h", 0, &["cat here"])]),
            ("mike", vec![unit("h", 0, &["cat here"])]),
        ]);
        let index = build_index(&c);
        assert_eq!(top_k_articles(&index, "cat", 10), vec!["echo", "mike", "zeta"]);
    }

    #[test]
    fn k_truncates_the_ranking() {
        let c = corpus(&[
            ("a", vec![unit("h", 0, &["cat one"])]),
            ("b", vec![unit("h", 0, &["cat two"])]),
            ("c", vec![unit("h", 0, &["cat three"])]),
        ]);
        let index = build_index(&c);
        assert_eq!(top_k_articles(&index, "cat", 2).len(), 2);
        assert!(top_k_articles(&index, "cat", 0).is_empty());
    }

    #[test]
    fn absent_phrase_returns_empty() {
        let c = corpus(&[("a", vec![unit("h", 0, &["nothing relevant"])])]);
        let index = build_index(&c);
        assert!(top_k_articles(&index, "unicorn", 5).is_empty());
        assert!(top_k_articles(&index, "", 5).is_empty());
    }

    #[test]
    fn redirects_are_not_indexed() {
        let mut c = corpus(&[("real", vec![unit("real", 0, &["cat content"])])]);
        c.insert(Article::new("alias", "alias", false, Some("real".into()), vec![]).unwrap())
            .unwrap();
        let index = build_index(&c);
        assert_eq!(index.doc_count(), 1);
        assert_eq!(top_k_articles(&index, "cat", 10), vec!["real"]);
    }

    #[test]
    fn results_agree_with_find_occurrences() {
        let c = corpus(&[
            ("a", vec![unit("big cat", 0, &["the big cat sat", "big cat again"])]),
            ("b", vec![unit("b", 0, &["big dogs", "a cat"])]),
            ("c", vec![unit("c", 0, &["nothing"])]),
        ]);
        let index = build_index(&c);
        for phrase in ["big cat", "cat", "big", "nothing", "absent"] {
            let returned = top_k_articles(&index, phrase, 10);
            for id in &returned {
                let article = c.get_by_id(id).unwrap();
                assert!(
                    !find_occurrences(article, phrase).is_empty(),
                    "{id} returned for {phrase:?} but has no occurrence"
                );
            }
            // and no qualifying article is missing
            let qualifying: Vec<&str> = c
                .iter()
                .filter(|a| !find_occurrences(a, phrase).is_empty())
                .map(|a| a.id.as_str())
                .collect();
            assert_eq!(returned.len(), qualifying.len(), "phrase {phrase:?}");
        }
    }

    #[test]
    fn adding_unrelated_article_keeps_result_set() {
        let base = vec![
            ("a", vec![unit("h", 0, &["the cat sat"])]),
            ("b", vec![unit("h", 0, &["a cat stood"])]),
        ];
        let c1 = corpus(&base);
        let mut with_extra = base.clone();
        with_extra.push(("z", vec![unit("h", 0, &["dogs only here"])]));
        let c2 = corpus(&with_extra);

        let mut r1 = top_k_articles(&build_index(&c1), "cat", 10);
        let mut r2 = top_k_articles(&build_index(&c2), "cat", 10);
        r1.sort();
        r2.sort();
        assert_eq!(r1, r2);
    }

    #[test]
    fn index_roundtrips_through_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.idx");
        let c = corpus(&[
            ("a", vec![unit("alpha cat", 0, &["the big cat sat", "more text"])]),
            ("b", vec![unit("beta", 1, &["a cat stood"])]),
        ]);
        let index = build_index(&c);
        write_index(&index, [7; 32], &path).unwrap();
        let back = read_index(&path).unwrap();
        assert_eq!(back.corpus_hash(), &[7; 32]);
        assert_eq!(back.docs, index.docs);
        assert_eq!(back.postings, index.postings);
        assert_eq!(back.total_length, index.total_length);
    }

    #[test]
    fn load_or_build_rebuilds_on_stale_hash() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_path = dir.path().join("c.jsonl");
        let index_path = dir.path().join("c.idx");
        let c = corpus(&[("a", vec![unit("h", 0, &["cat text"])])]);
        crate::corpus::write_corpus(&c, &corpus_path).unwrap();

        let (_, rebuilt) = load_or_build(&c, &corpus_path, &index_path).unwrap();
        assert!(rebuilt);
        let (_, rebuilt) = load_or_build(&c, &corpus_path, &index_path).unwrap();
        assert!(!rebuilt);

        // corpus changes -> sidecar goes stale -> rebuild
        let mut c2 = c.clone();
        c2.insert(Article::new("b", "b", false, None, vec![unit("h", 0, &["cat more"])]).unwrap())
            .unwrap();
        crate::corpus::write_corpus(&c2, &corpus_path).unwrap();
        let (index, rebuilt) = load_or_build(&c2, &corpus_path, &index_path).unwrap();
        assert!(rebuilt);
        assert_eq!(index.doc_count(), 2);

        // garbage sidecar -> rebuild, not error
        std::fs::write(&index_path, b"not an index").unwrap();
        let (_, rebuilt) = load_or_build(&c2, &corpus_path, &index_path).unwrap();
        assert!(rebuilt);
    }

    #[test]
    fn identical_corpora_build_identical_indexes() {
        let entries = vec![
            ("a", vec![unit("alpha", 0, &["the cat sat here", "dogs too"])]),
            ("b", vec![unit("beta", 0, &["a cat stood there"])]),
            ("c", vec![unit("gamma", 2, &["felines everywhere", "cat cat"])]),
        ];
        let i1 = build_index(&corpus(&entries));
        let i2 = build_index(&corpus(&entries));
        assert_eq!(i1, i2);
    }
}
