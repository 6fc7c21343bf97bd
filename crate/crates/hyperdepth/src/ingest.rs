//! Streaming MediaWiki dump ingestion.
//!
//! [`parse_dump`] walks the XML with constant memory: one page is in flight
//! at a time and the event buffer is reused, so peak usage does not grow
//! with the number of pages. Wikitext handling is intentionally shallow —
//! section headings, links, redirects and disambiguation markers are
//! honoured; templates are dropped wholesale; anything pathological
//! degrades to plain text rather than failing the page.

use std::fs::File;
use std::io::BufRead;
use std::io::BufReader;
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::corpus::{normalize_title, Article, Corpus, Unit};
use crate::error::{Error, Result};

/// One `<page>` element as it appears in the dump, markup untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPage {
    pub title: String,
    pub namespace: i64,
    pub wikitext: String,
}

/// Which text node we are currently capturing.
#[derive(Clone, Copy, PartialEq)]
enum Capture {
    None,
    Title,
    Namespace,
    Text,
}

/// Streaming iterator over the pages of a dump. Pages with empty or missing
/// revision text are skipped and counted in [`DumpReader::skipped`].
pub struct DumpReader<R: BufRead> {
    xml: Reader<R>,
    buf: Vec<u8>,
    skipped: usize,
    failed: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(reader: R) -> DumpReader<R> {
        let mut xml = Reader::from_reader(reader);
        // MediaWiki exports are machine-generated; trimming would mangle
        // wikitext whitespace, so leave events untouched.
        xml.config_mut().trim_text(false);
        DumpReader {
            xml,
            buf: Vec::new(),
            skipped: 0,
            failed: false,
        }
    }

    /// Pages dropped so far because they had no revision text.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    fn xml_error(&self, e: impl std::fmt::Display) -> Error {
        Error::Xml {
            offset: self.xml.buffer_position(),
            message: e.to_string(),
        }
    }

    /// Pull events until one full `<page>` has been assembled.
    fn next_page(&mut self) -> Result<Option<RawPage>> {
        let mut in_page = false;
        let mut in_revision = false;
        let mut capture = Capture::None;
        let mut title = String::new();
        let mut ns_text = String::new();
        let mut text = String::new();
        let mut saw_text_element = false;

        loop {
            self.buf.clear();
            let position = self.xml.buffer_position();
            let bad_xml = move |e: &dyn std::fmt::Display| Error::Xml {
                offset: position,
                message: e.to_string(),
            };
            let event = match self.xml.read_event_into(&mut self.buf) {
                Ok(ev) => ev,
                Err(e) => return Err(self.xml_error(e)),
            };
            match event {
                Event::Start(ref e) => match e.local_name().as_ref() {
                    b"page" => {
                        in_page = true;
                        title.clear();
                        ns_text.clear();
                        text.clear();
                        saw_text_element = false;
                    }
                    b"revision" if in_page => {
                        in_revision = true;
                    }
                    b"title" if in_page => capture = Capture::Title,
                    b"ns" if in_page => capture = Capture::Namespace,
                    b"text" if in_revision => {
                        capture = Capture::Text;
                        saw_text_element = true;
                        // later revisions override earlier ones
                        text.clear();
                    }
                    _ => {}
                },
                Event::Empty(ref e) => {
                    if in_revision && e.local_name().as_ref() == b"text" {
                        saw_text_element = true;
                        text.clear();
                    }
                }
                Event::Text(ref t) => {
                    if capture != Capture::None {
                        let piece = t.unescape().map_err(|e| bad_xml(&e))?;
                        match capture {
                            Capture::Title => title.push_str(&piece),
                            Capture::Namespace => ns_text.push_str(&piece),
                            Capture::Text => text.push_str(&piece),
                            Capture::None => {}
                        }
                    }
                }
                Event::CData(ref c) => {
                    if capture != Capture::None {
                        let piece = String::from_utf8_lossy(c).into_owned();
                        match capture {
                            Capture::Title => title.push_str(&piece),
                            Capture::Namespace => ns_text.push_str(&piece),
                            Capture::Text => text.push_str(&piece),
                            Capture::None => {}
                        }
                    }
                }
                Event::End(ref e) => match e.local_name().as_ref() {
                    b"title" | b"ns" | b"text" => capture = Capture::None,
                    b"revision" => in_revision = false,
                    b"page" => {
                        in_page = false;
                        if !saw_text_element || text.is_empty() {
                            self.skipped += 1;
                            continue;
                        }
                        let namespace = ns_text.trim().parse::<i64>().unwrap_or(0);
                        return Ok(Some(RawPage {
                            title: title.clone(),
                            namespace,
                            wikitext: text.clone(),
                        }));
                    }
                    _ => {}
                },
                Event::Eof => {
                    if in_page {
                        return Err(self.xml_error("dump ends inside a <page> element"));
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<RawPage>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_page() {
            Ok(Some(page)) => Some(Ok(page)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Iterate the pages of a MediaWiki XML export.
pub fn parse_dump<R: BufRead>(reader: R) -> DumpReader<R> {
    DumpReader::new(reader)
}

/// A wikitext section before sentence splitting: heading text (still with
/// markup), nesting level, raw body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSection {
    pub heading: String,
    pub level: u32,
    pub body: String,
}

/// `== H ==` with n leading/trailing equals signs opens a section of level
/// n−1; anything else stays body text. Asymmetric or empty heading lines
/// degrade to body text.
fn parse_heading_line(line: &str) -> Option<(String, u32)> {
    let t = line.trim();
    let open = t.chars().take_while(|&c| c == '=').count();
    let close = t.chars().rev().take_while(|&c| c == '=').count();
    if open < 2 || open != close || open + close > t.len() {
        return None;
    }
    let inner = t[open..t.len() - close].trim();
    if inner.is_empty() {
        return None;
    }
    Some((inner.to_string(), open as u32 - 1))
}

/// Cut wikitext into sections. The text before the first heading becomes
/// the lead section, headed by the page title at level 0. Heading levels
/// are taken literally, no hierarchy repair.
pub fn segment_sections(title: &str, wikitext: &str) -> Vec<RawSection> {
    let mut sections = vec![RawSection {
        heading: title.trim().to_string(),
        level: 0,
        body: String::new(),
    }];
    for line in wikitext.lines() {
        if let Some((heading, level)) = parse_heading_line(line) {
            sections.push(RawSection {
                heading,
                level,
                body: String::new(),
            });
        } else {
            let body = &mut sections.last_mut().expect("lead always present").body;
            body.push_str(line);
            body.push('\n');
        }
    }
    sections
}

/// Remove `<!-- ... -->`; an unterminated comment swallows the rest.
fn strip_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("<!--") {
        out.push_str(&rest[..start]);
        match rest[start..].find("-->") {
            Some(end) => rest = &rest[start + end + 3..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

/// Drop `{{ ... }}` blocks wholesale, tracking nesting. An unbalanced
/// opener swallows the rest of the text.
fn strip_templates(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let bytes = s.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"{{") {
            depth += 1;
            i += 2;
        } else if depth > 0 && bytes[i..].starts_with(b"}}") {
            depth -= 1;
            i += 2;
        } else if depth == 0 {
            let ch = s[i..].chars().next().expect("in-bounds char");
            out.push(ch);
            i += ch.len_utf8();
        } else {
            i += s[i..].chars().next().map(char::len_utf8).unwrap_or(1);
        }
    }
    out
}

/// Replace `[[Target|label]]` with `label` and `[[Target]]` with `Target`.
/// An unclosed link keeps the raw text.
fn flatten_internal_links(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("[[") {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 2..];
        match tail.find("]]") {
            Some(end) => {
                let inner = &tail[..end];
                let shown = match inner.rfind('|') {
                    Some(p) => &inner[p + 1..],
                    None => inner,
                };
                out.push_str(shown);
                rest = &tail[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Replace `[http://u label]` with `label`; a bare `[http://u]` vanishes.
fn flatten_external_links(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find('[') {
        let tail = &rest[start + 1..];
        let is_external = tail.starts_with("http://")
            || tail.starts_with("https://")
            || tail.starts_with("ftp://")
            || tail.starts_with("//");
        if !is_external {
            out.push_str(&rest[..start + 1]);
            rest = tail;
            continue;
        }
        out.push_str(&rest[..start]);
        match tail.find(']') {
            Some(end) => {
                let inner = &tail[..end];
                if let Some(space) = inner.find(char::is_whitespace) {
                    out.push_str(inner[space..].trim_start());
                }
                rest = &tail[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Drop `<ref>...</ref>` (citation payload, not prose) and peel any other
/// angle-bracket tags, keeping their inner text.
fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find('<') {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        let end = match tail.find('>') {
            Some(e) => e,
            None => {
                out.push_str(tail);
                return out;
            }
        };
        let tag = &tail[1..end];
        let name = tag
            .trim_start_matches('/')
            .split(|c: char| c.is_whitespace() || c == '/')
            .next()
            .unwrap_or("")
            .to_lowercase();
        if name == "ref" && !tag.starts_with('/') && !tag.ends_with('/') {
            // opening <ref>: drop everything through the matching close
            match tail.to_lowercase().find("</ref>") {
                Some(close) => rest = &tail[close + 6..],
                None => return out,
            }
        } else {
            rest = &tail[end + 1..];
        }
    }
    out.push_str(rest);
    out
}

/// Remove bold/italic quote runs.
fn strip_quote_markup(s: &str) -> String {
    s.replace("'''", "").replace("''", "")
}

/// Reduce a wikitext fragment to plain text.
pub fn strip_markup(s: &str) -> String {
    let s = strip_comments(s);
    let s = strip_templates(&s);
    let s = strip_tags(&s);
    let s = flatten_internal_links(&s);
    let s = flatten_external_links(&s);
    strip_quote_markup(&s)
}

/// Split plain text into sentences: a `.` `?` or `!` followed by
/// whitespace ends a sentence, and a blank line always ends one. Interior
/// whitespace is normalized to single spaces; no sentence is empty.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    for paragraph in text.split("\n\n") {
        let flat = paragraph.split_whitespace().collect::<Vec<_>>().join(" ");
        if flat.is_empty() {
            continue;
        }
        let mut current = String::new();
        let mut chars = flat.chars().peekable();
        while let Some(c) = chars.next() {
            current.push(c);
            if matches!(c, '.' | '?' | '!') && chars.peek().is_some_and(|n| n.is_whitespace()) {
                let s = current.trim();
                if !s.is_empty() {
                    sentences.push(s.to_string());
                }
                current.clear();
            }
        }
        let s = current.trim();
        if !s.is_empty() {
            sentences.push(s.to_string());
        }
    }
    sentences
}

/// Normalized targets of every internal link in a fragment, `#fragment`
/// suffixes cut off, duplicates preserved in order. Links whose target
/// normalizes to nothing are dropped.
pub fn extract_links(segment: &str) -> Vec<String> {
    let mut links = Vec::new();
    let mut rest = segment;
    while let Some(start) = rest.find("[[") {
        let tail = &rest[start + 2..];
        match tail.find("]]") {
            Some(end) => {
                let inner = &tail[..end];
                let target = match inner.find('|') {
                    Some(p) => &inner[..p],
                    None => inner,
                };
                let target = match target.find('#') {
                    Some(p) => &target[..p],
                    None => target,
                };
                if let Ok(normalized) = normalize_title(target) {
                    links.push(normalized);
                }
                rest = &tail[end + 2..];
            }
            None => break,
        }
    }
    links
}

/// True when the page is a disambiguation page: a template whose name
/// mentions "disambig", or a title ending in "(disambiguation)".
pub fn detect_disambiguation(title: &str, wikitext: &str) -> bool {
    if title.trim().to_lowercase().ends_with("(disambiguation)") {
        return true;
    }
    let mut rest = wikitext;
    while let Some(start) = rest.find("{{") {
        let tail = &rest[start + 2..];
        let name_end = tail
            .find(['|', '}', '\n'])
            .unwrap_or(tail.len());
        let name = tail[..name_end].trim().to_lowercase();
        if name.contains("disambig") {
            return true;
        }
        rest = &tail[name_end..];
    }
    false
}

/// `#REDIRECT [[Target]]` (any case) at the start of the page; returns the
/// normalized target.
fn parse_redirect(wikitext: &str) -> Option<String> {
    let t = wikitext.trim_start();
    if !t.to_lowercase().starts_with("#redirect") {
        return None;
    }
    extract_links(t).into_iter().next()
}

/// Convert one raw page to its canonical article. Assumes the caller has
/// already filtered to the main namespace. Returns `None` for redirect
/// pages whose target is unusable.
pub fn page_to_article(page: &RawPage) -> Result<Option<Article>> {
    let normalized = normalize_title(&page.title)?;

    if let Some(target) = parse_redirect(&page.wikitext) {
        let article = Article::new(normalized, page.title.trim(), false, Some(target), vec![])?;
        return Ok(Some(article));
    }
    if page.wikitext.trim_start().to_lowercase().starts_with("#redirect") {
        // redirect keyword without a usable target
        return Ok(None);
    }

    let is_disambiguation = detect_disambiguation(&page.title, &page.wikitext);
    let mut units = Vec::new();
    for section in segment_sections(page.title.trim(), &page.wikitext) {
        let heading_plain = strip_markup(&section.heading);
        let heading = heading_plain.split_whitespace().collect::<Vec<_>>().join(" ");
        let links = extract_links(&section.body);
        let body_plain = strip_markup(&section.body);
        let sentences = split_sentences(&body_plain);
        units.push(Unit {
            heading,
            level: section.level,
            sentences,
            links,
        });
    }
    let article = Article::new(normalized, page.title.trim(), is_disambiguation, None, units)?;
    Ok(Some(article))
}

/// Counters reported after an ingest run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct IngestStats {
    pub pages_seen: usize,
    pub articles: usize,
    pub skipped_namespace: usize,
    pub skipped_empty: usize,
    pub skipped_duplicate: usize,
    pub skipped_invalid: usize,
}

/// Convert a whole dump into a corpus. Only main-namespace (0) pages are
/// converted; every skip is counted. Warnings go to standard error; the
/// resulting corpus is deterministic for identical dump bytes.
pub fn ingest_dump<R: BufRead>(reader: R) -> Result<(Corpus, IngestStats)> {
    let mut corpus = Corpus::new();
    let mut stats = IngestStats::default();
    let mut pages = parse_dump(reader);
    for page in &mut pages {
        let page = page?;
        stats.pages_seen += 1;
        if page.namespace != 0 {
            stats.skipped_namespace += 1;
            continue;
        }
        let article = match page_to_article(&page) {
            Ok(Some(a)) => a,
            Ok(None) => {
                eprintln!("warning: skipping page {:?}: unusable redirect", page.title);
                stats.skipped_invalid += 1;
                continue;
            }
            Err(e) => {
                eprintln!("warning: skipping page {:?}: {e}", page.title);
                stats.skipped_invalid += 1;
                continue;
            }
        };
        if corpus.get(&article.normalized_title).is_some() {
            eprintln!(
                "warning: skipping page {:?}: duplicate of {:?}",
                page.title, article.normalized_title
            );
            stats.skipped_duplicate += 1;
            continue;
        }
        corpus.insert(article)?;
        stats.articles += 1;
    }
    stats.skipped_empty = pages.skipped();
    stats.pages_seen += pages.skipped();
    Ok((corpus, stats))
}

/// [`ingest_dump`] from a file path.
pub fn ingest_dump_file(path: &Path) -> Result<(Corpus, IngestStats)> {
    let file = File::open(path).map_err(Error::io_at(path))?;
    ingest_dump(BufReader::new(file))
}
