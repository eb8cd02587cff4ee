//! Corpus ingestion: tokenization, sentence/paragraph segmentation and
//! vocabulary statistics with significance filtering.
//!
//! A token is a maximal run of alphanumeric characters, lowercased, with
//! internal hyphens preserved (`mantle-cell` stays one token). Sentences end
//! at `.`, `!` or `?` followed by whitespace; paragraphs are separated by
//! blank lines. A term is *significant* when it occurs often enough in the
//! collection without being so common that it carries no content.

use std::collections::{HashMap, HashSet};
use std::collections::BTreeMap;
use std::borrow::Cow;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A document as supplied by the caller, before any processing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    /// Caller-chosen identifier; must be non-empty and unique in a corpus.
    pub id: String,
    /// Optional title; by default folded into the text as a leading paragraph.
    #[serde(default)]
    pub title: Option<String>,
    /// Full body text (UTF-8).
    pub text: String,
}

/// Controls how a [`RawDocument`] is turned into a [`TokenizedDocument`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizeOptions {
    /// Fold the title in as the first paragraph of the document.
    pub include_title: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        TokenizeOptions { include_title: true }
    }
}

impl RawDocument {
    /// The text that tokenization actually sees: the body, optionally with
    /// the title prepended as its own leading paragraph.
    pub fn effective_text(&self, options: &TokenizeOptions) -> Cow<'_, str> {
        match &self.title {
            Some(title) if options.include_title && !title.trim().is_empty() => {
                Cow::Owned(format!("{}\n\n{}", title.trim(), self.text))
            }
            _ => Cow::Borrowed(&self.text),
        }
    }
}

/// A document reduced to lowercase tokens, grouped into sentences, with
/// paragraph boundaries kept as ranges over the sentence list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub id: String,
    /// Sentences in order; each a non-empty list of tokens.
    pub sentences: Vec<Vec<String>>,
    /// Half-open `(start, end)` sentence ranges, one per paragraph, in order.
    /// Together they partition the sentence list; a paragraph whose text had
    /// no tokens keeps an empty range so indices stay aligned with the text.
    pub paragraphs: Vec<(usize, usize)>,
}

impl TokenizedDocument {
    /// Tokenize `text` into sentences and paragraphs under the rules above.
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        let mut sentences = Vec::new();
        let mut paragraphs = Vec::new();
        for (bs, be) in paragraph_blocks(text) {
            let block = &text[bs..be];
            let start = sentences.len();
            for (ss, se) in sentence_spans(block) {
                let tokens = tokenize_span(&block[ss..se]);
                if !tokens.is_empty() {
                    sentences.push(tokens);
                }
            }
            paragraphs.push((start, sentences.len()));
        }
        TokenizedDocument { id: id.into(), sentences, paragraphs }
    }

    /// Tokenize a raw document, folding the title per `options`.
    pub fn from_raw(doc: &RawDocument, options: &TokenizeOptions) -> Self {
        Self::new(doc.id.clone(), &doc.effective_text(options))
    }

    /// Total number of tokens across all sentences.
    pub fn token_count(&self) -> u64 {
        self.sentences.iter().map(|s| s.len() as u64).sum()
    }

    /// Token multiset over the whole document.
    pub fn term_bag(&self) -> BTreeMap<String, u64> {
        bag_of(self.sentences.iter().flatten())
    }

    /// Token multiset over one paragraph (by paragraph index).
    pub fn paragraph_bag(&self, paragraph: usize) -> BTreeMap<String, u64> {
        let (start, end) = self.paragraphs[paragraph];
        bag_of(self.sentences[start..end].iter().flatten())
    }

    /// Token multiset over one sentence (by sentence index).
    pub fn sentence_bag(&self, sentence: usize) -> BTreeMap<String, u64> {
        bag_of(self.sentences[sentence].iter())
    }
}

fn bag_of<'a>(tokens: impl Iterator<Item = &'a String>) -> BTreeMap<String, u64> {
    let mut bag = BTreeMap::new();
    for t in tokens {
        *bag.entry(t.clone()).or_insert(0) += 1;
    }
    bag
}

/// Byte ranges of paragraph blocks: maximal runs of non-blank lines.
fn paragraph_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let body = line.strip_suffix('\n').unwrap_or(line);
        if body.trim().is_empty() {
            if let Some(done) = current.take() {
                blocks.push(done);
            }
        } else {
            let end = start + body.len();
            match &mut current {
                Some((_, e)) => *e = end,
                None => current = Some((start, end)),
            }
        }
    }
    if let Some(done) = current {
        blocks.push(done);
    }
    blocks
}

/// Byte ranges of sentence candidates within a paragraph block. A sentence
/// ends after `.`, `!` or `?` when the next character is whitespace (or the
/// block ends).
fn sentence_spans(block: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut iter = block.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_break = iter.peek().map_or(true, |&(_, next)| next.is_whitespace());
            if at_break {
                let end = i + c.len_utf8();
                spans.push((start, end));
                start = end;
            }
        }
    }
    if start < block.len() {
        spans.push((start, block.len()));
    }
    spans
}

/// Lowercased alphanumeric tokens of a sentence span, keeping hyphens that
/// sit between two alphanumeric characters.
fn tokenize_span(span: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = span.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '-'
            && !current.is_empty()
            && chars.peek().is_some_and(|next| next.is_alphanumeric())
        {
            current.push('-');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Paragraph texts of `text`, index-aligned with the paragraphs produced by
/// [`TokenizedDocument::new`] on the same input.
pub fn paragraph_texts(text: &str) -> Vec<String> {
    paragraph_blocks(text)
        .into_iter()
        .map(|(s, e)| text[s..e].trim().to_string())
        .collect()
}

/// Sentence texts of `text`, index-aligned with the sentences produced by
/// [`TokenizedDocument::new`] on the same input (token-free spans dropped).
pub fn sentence_texts(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (bs, be) in paragraph_blocks(text) {
        let block = &text[bs..be];
        for (ss, se) in sentence_spans(block) {
            let span = &block[ss..se];
            if !tokenize_span(span).is_empty() {
                out.push(span.trim().to_string());
            }
        }
    }
    out
}

/// Thresholds deciding which terms are significant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    /// A term present in more than this fraction of documents is dropped.
    pub max_df_ratio: f64,
    /// A term must occur at least this many times in the whole collection.
    pub min_count: u64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig { max_df_ratio: 0.10, min_count: 3 }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "max_df_ratio must be in (0, 1], got {}",
                self.max_df_ratio
            )));
        }
        if self.min_count == 0 {
            return Err(Error::ConfigInvalid("min_count must be at least 1".into()));
        }
        Ok(())
    }

    fn is_significant(&self, collection_count: u64, document_frequency: u64, documents: u64) -> bool {
        collection_count >= self.min_count
            && (document_frequency as f64) <= self.max_df_ratio * documents as f64
    }
}

/// Collection-wide counts for a single term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabularyEntry {
    /// Total occurrences across the collection.
    pub collection_count: u64,
    /// Number of documents the term occurs in.
    pub document_frequency: u64,
    /// Whether the term passed both significance thresholds.
    pub significant: bool,
}

/// Corpus-level totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Number of documents.
    pub documents: u64,
    /// Number of significant terms.
    pub significant_terms: u64,
    /// Total token count over all documents.
    pub total_tokens: u64,
}

/// Term table of a corpus, with per-term counts and significance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    entries: BTreeMap<String, VocabularyEntry>,
    config: SignificanceConfig,
}

impl Vocabulary {
    /// Reassemble a vocabulary from stored parts (used when loading an index).
    pub fn from_parts(
        entries: BTreeMap<String, VocabularyEntry>,
        config: SignificanceConfig,
    ) -> Self {
        Vocabulary { entries, config }
    }

    pub fn get(&self, term: &str) -> Option<&VocabularyEntry> {
        self.entries.get(term)
    }

    pub fn is_significant(&self, term: &str) -> bool {
        self.entries.get(term).is_some_and(|e| e.significant)
    }

    /// All significant terms in lexicographic order.
    pub fn significant_terms(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, e)| e.significant)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    /// All entries in lexicographic term order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &VocabularyEntry)> {
        self.entries.iter().map(|(t, e)| (t.as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn config(&self) -> &SignificanceConfig {
        &self.config
    }
}

/// Count terms over `docs` and apply significance thresholds.
///
/// Counting is parallelized over documents; partial counts merge by integer
/// addition, so the result does not depend on worker count.
pub fn build_vocabulary(
    docs: &[TokenizedDocument],
    config: SignificanceConfig,
) -> Result<(Vocabulary, CorpusStats)> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let counts = count_terms(docs);
    finalize_vocabulary(counts, docs.len() as u64, total_tokens(docs), config)
}

/// Merge the counts of `new_docs` into an existing vocabulary and re-apply
/// significance thresholds under the grown document count.
pub fn update_vocabulary(
    old: &Vocabulary,
    old_stats: &CorpusStats,
    new_docs: &[TokenizedDocument],
) -> Result<(Vocabulary, CorpusStats)> {
    let mut counts = count_terms(new_docs);
    for (term, entry) in &old.entries {
        let slot = counts.entry(term.clone()).or_insert((0, 0));
        slot.0 += entry.collection_count;
        slot.1 += entry.document_frequency;
    }
    finalize_vocabulary(
        counts,
        old_stats.documents + new_docs.len() as u64,
        old_stats.total_tokens + total_tokens(new_docs),
        old.config,
    )
}

/// Per-term `(collection_count, document_frequency)` over `docs`.
fn count_terms(docs: &[TokenizedDocument]) -> HashMap<String, (u64, u64)> {
    docs.par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, (u64, u64)>, doc| {
            let mut local: HashMap<&str, u64> = HashMap::new();
            for sentence in &doc.sentences {
                for token in sentence {
                    *local.entry(token).or_insert(0) += 1;
                }
            }
            for (term, n) in local {
                let slot = acc.entry(term.to_string()).or_insert((0, 0));
                slot.0 += n;
                slot.1 += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (term, (cc, df)) in b {
                let slot = a.entry(term).or_insert((0, 0));
                slot.0 += cc;
                slot.1 += df;
            }
            a
        })
}

fn total_tokens(docs: &[TokenizedDocument]) -> u64 {
    docs.iter().map(|d| d.token_count()).sum()
}

fn finalize_vocabulary(
    counts: HashMap<String, (u64, u64)>,
    documents: u64,
    total_tokens: u64,
    config: SignificanceConfig,
) -> Result<(Vocabulary, CorpusStats)> {
    let mut entries = BTreeMap::new();
    let mut significant = 0u64;
    for (term, (cc, df)) in counts {
        let is_sig = config.is_significant(cc, df, documents);
        if is_sig {
            significant += 1;
        }
        entries.insert(
            term,
            VocabularyEntry {
                collection_count: cc,
                document_frequency: df,
                significant: is_sig,
            },
        );
    }
    let stats = CorpusStats { documents, significant_terms: significant, total_tokens };
    Ok((Vocabulary { entries, config }, stats))
}

/// Read a corpus from `path`: a JSONL file (one document object per line,
/// fields `id`, optional `title`, `text`) or a directory of `.txt` files
/// whose stems become document ids.
pub fn read_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    let meta = fs::metadata(path)?;
    if meta.is_dir() {
        read_text_dir(path)
    } else {
        read_jsonl(path)
    }
}

/// Read a JSONL corpus file.
pub fn read_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let data = read_utf8(path)?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(line).map_err(|e| {
            Error::InvalidCorpus(format!("{}: line {}: {}", path.display(), idx + 1, e))
        })?;
        validate_id(&doc.id, &mut seen, path)?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Read every `*.txt` file directly under `dir`, in file-name order.
pub fn read_text_dir(dir: &Path) -> Result<Vec<RawDocument>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for path in paths {
        let text = read_utf8(&path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        validate_id(&id, &mut seen, &path)?;
        docs.push(RawDocument { id, title: None, text });
    }
    Ok(docs)
}

fn read_utf8(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::InvalidData {
            Error::InvalidCorpus(format!("{}: not valid UTF-8", path.display()))
        } else {
            Error::Io(e)
        }
    })
}

fn validate_id(id: &str, seen: &mut HashSet<String>, path: &Path) -> Result<()> {
    if id.is_empty() {
        return Err(Error::InvalidCorpus(format!(
            "{}: document with empty id",
            path.display()
        )));
    }
    if !seen.insert(id.to_string()) {
        return Err(Error::InvalidCorpus(format!(
            "{}: duplicate document id {:?}",
            path.display(),
            id
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_empty_text() {
        let doc = TokenizedDocument::new("d", "");
        assert!(doc.sentences.is_empty());
        assert!(doc.paragraphs.is_empty());
    }

    #[test]
    fn tokenize_sentences_and_hyphens() {
        let doc = TokenizedDocument::new("d", "Mantle-cell lymphoma. Burkitt too.");
        assert_eq!(
            doc.sentences,
            vec![vec!["mantle-cell", "lymphoma"], vec!["burkitt", "too"]]
        );
        assert_eq!(doc.paragraphs, vec![(0, 2)]);
    }

    #[test]
    fn tokenize_blank_line_starts_new_paragraph() {
        let doc = TokenizedDocument::new("d", "A b\n\nC d");
        assert_eq!(doc.paragraphs, vec![(0, 1), (1, 2)]);
        assert_eq!(doc.sentences.len(), 2);
    }

    #[test]
    fn tokenize_keeps_numbers_splits_decimals() {
        let doc = TokenizedDocument::new("d", "Take 2 aspirin every 3.5 hours");
        assert_eq!(
            doc.sentences,
            vec![vec!["take", "2", "aspirin", "every", "3", "5", "hours"]]
        );
    }

    #[test]
    fn tokenize_hyphen_needs_both_sides() {
        let doc = TokenizedDocument::new("d", "pre- and post-war a--b");
        assert_eq!(
            doc.sentences,
            vec![vec!["pre", "and", "post-war", "a", "b"]]
        );
    }

    #[test]
    fn abbreviation_period_before_letter_does_not_break() {
        let doc = TokenizedDocument::new("d", "see e.g. the fig.1 case");
        // "e.g" keeps the internal period inside one sentence run; the break
        // happens only where the period is followed by whitespace.
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(doc.sentences[0], vec!["see", "e", "g"]);
        assert_eq!(doc.sentences[1], vec!["the", "fig", "1", "case"]);
    }

    #[test]
    fn title_folds_in_as_first_paragraph() {
        let raw = RawDocument {
            id: "p1".into(),
            title: Some("Liquid mixer".into()),
            text: "A stirrer rotates.".into(),
        };
        let with = TokenizedDocument::from_raw(&raw, &TokenizeOptions::default());
        assert_eq!(with.paragraphs.len(), 2);
        assert_eq!(with.sentences[0], vec!["liquid", "mixer"]);

        let without =
            TokenizedDocument::from_raw(&raw, &TokenizeOptions { include_title: false });
        assert_eq!(without.paragraphs.len(), 1);
        assert_eq!(without.sentences[0], vec!["a", "stirrer", "rotates"]);
    }

    #[test]
    fn paragraph_texts_align_with_tokenized_paragraphs() {
        let text = "First one.\n\n!!!\n\nThird one here.";
        let doc = TokenizedDocument::new("d", text);
        let texts = paragraph_texts(text);
        assert_eq!(doc.paragraphs.len(), texts.len());
        assert_eq!(texts[0], "First one.");
        assert_eq!(texts[1], "!!!");
        // The punctuation-only paragraph carries no sentences.
        assert_eq!(doc.paragraphs[1].0, doc.paragraphs[1].1);
    }

    #[test]
    fn sentence_texts_align_with_sentences() {
        let text = "One here. Two here!\n\nThree here?";
        let doc = TokenizedDocument::new("d", text);
        let texts = sentence_texts(text);
        assert_eq!(doc.sentences.len(), texts.len());
        assert_eq!(texts, vec!["One here.", "Two here!", "Three here?"]);
    }

    fn doc_of(id: &str, words: &[&str]) -> TokenizedDocument {
        let n = words.len();
        TokenizedDocument {
            id: id.into(),
            sentences: vec![words.iter().map(|w| w.to_string()).collect()],
            paragraphs: vec![(0, if n == 0 { 0 } else { 1 })],
        }
    }

    #[test]
    fn vocabulary_applies_both_thresholds() {
        // 50 documents; "the" appears in 6 of them (df ratio 0.12 > 0.10),
        // "rare" appears twice in one (count 2 < 3), "good" three times.
        let mut docs = Vec::new();
        for i in 0..6 {
            docs.push(doc_of(&format!("t{i}"), &["the", "filler"]));
        }
        docs.push(doc_of("r", &["rare", "rare", "good"]));
        docs.push(doc_of("g", &["good", "good"]));
        for i in 0..42 {
            docs.push(doc_of(&format!("f{i}"), &["pad"]));
        }
        let (vocab, stats) = build_vocabulary(&docs, SignificanceConfig::default()).unwrap();
        assert_eq!(stats.documents, 50);
        let the = vocab.get("the").unwrap();
        assert_eq!((the.collection_count, the.document_frequency), (6, 6));
        assert!(!the.significant, "df ratio 0.12 exceeds 0.10");
        assert!(!vocab.get("rare").unwrap().significant, "count 2 below 3");
        let good = vocab.get("good").unwrap();
        assert!(good.significant);
        assert_eq!((good.collection_count, good.document_frequency), (3, 2));
        assert_eq!(stats.significant_terms, 1);
    }

    #[test]
    fn df_ratio_exactly_at_threshold_is_kept() {
        // 10 docs, term in exactly 1: ratio 0.10 == max_df_ratio.
        let mut docs = vec![doc_of("a", &["edge", "edge", "edge"])];
        for i in 0..9 {
            docs.push(doc_of(&format!("f{i}"), &["pad"]));
        }
        let (vocab, _) = build_vocabulary(&docs, SignificanceConfig::default()).unwrap();
        assert!(vocab.get("edge").unwrap().significant);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = build_vocabulary(&[], SignificanceConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn significant_terms_come_out_sorted() {
        let docs = vec![
            doc_of("a", &["zebra", "zebra", "zebra", "apple", "apple", "apple"]),
            doc_of("b", &["mid", "mid", "mid"]),
            doc_of("c", &["pad"]),
        ];
        let config = SignificanceConfig { max_df_ratio: 1.0, min_count: 3 };
        let (vocab, _) = build_vocabulary(&docs, config).unwrap();
        assert_eq!(vocab.significant_terms(), vec!["apple", "mid", "zebra"]);
    }

    #[test]
    fn update_vocabulary_merges_counts_and_promotes() {
        let old_docs = vec![doc_of("a", &["planet", "planet", "pad", "pad", "pad"])];
        let config = SignificanceConfig { max_df_ratio: 1.0, min_count: 3 };
        let (vocab, stats) = build_vocabulary(&old_docs, config).unwrap();
        assert!(!vocab.is_significant("planet"), "count 2 below 3");

        let new_docs = vec![doc_of("b", &["planet"])];
        let (updated, new_stats) = update_vocabulary(&vocab, &stats, &new_docs).unwrap();
        assert!(updated.is_significant("planet"), "2 + 1 occurrences promote it");
        assert_eq!(new_stats.documents, 2);
        assert_eq!(new_stats.total_tokens, stats.total_tokens + 1);
        let planet = updated.get("planet").unwrap();
        assert_eq!((planet.collection_count, planet.document_frequency), (3, 2));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad_ratio = SignificanceConfig { max_df_ratio: 0.0, min_count: 3 };
        assert!(matches!(
            build_vocabulary(&[doc_of("a", &["x"])], bad_ratio),
            Err(Error::ConfigInvalid(_))
        ));
        let bad_count = SignificanceConfig { max_df_ratio: 0.5, min_count: 0 };
        assert!(matches!(
            build_vocabulary(&[doc_of("a", &["x"])], bad_count),
            Err(Error::ConfigInvalid(_))
        ));
    }

    proptest! {
        #[test]
        fn tokenization_is_deterministic(text in ".{0,300}") {
            let a = TokenizedDocument::new("d", &text);
            let b = TokenizedDocument::new("d", &text);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn tokens_are_lowercase_with_internal_hyphens(text in ".{0,300}") {
            let doc = TokenizedDocument::new("d", &text);
            for sentence in &doc.sentences {
                prop_assert!(!sentence.is_empty());
                for token in sentence {
                    prop_assert!(!token.is_empty());
                    prop_assert!(!token.starts_with('-') && !token.ends_with('-'));
                    prop_assert!(!token.contains("--"));
                    prop_assert_eq!(
                        token.clone(),
                        token.to_lowercase(),
                        "token {:?} not lowercase", token
                    );
                }
            }
        }

        #[test]
        fn paragraphs_partition_the_sentence_list(text in ".{0,300}") {
            let doc = TokenizedDocument::new("d", &text);
            let mut cursor = 0;
            for &(start, end) in &doc.paragraphs {
                prop_assert_eq!(start, cursor);
                prop_assert!(end >= start);
                cursor = end;
            }
            prop_assert_eq!(cursor, doc.sentences.len());
        }

        #[test]
        fn collection_counts_sum_to_total_tokens(
            words in proptest::collection::vec(
                proptest::collection::vec("[a-d]{1,2}", 0..8), 1..6)
        ) {
            let docs: Vec<_> = words.iter().enumerate().map(|(i, ws)| {
                let refs: Vec<&str> = ws.iter().map(|s| s.as_str()).collect();
                doc_of(&format!("d{i}"), &refs)
            }).collect();
            let (vocab, stats) =
                build_vocabulary(&docs, SignificanceConfig { max_df_ratio: 1.0, min_count: 1 })
                    .unwrap();
            let sum: u64 = vocab.iter().map(|(_, e)| e.collection_count).sum();
            prop_assert_eq!(sum, stats.total_tokens);
        }

        #[test]
        fn tighter_thresholds_shrink_the_significant_set(
            words in proptest::collection::vec(
                proptest::collection::vec("[a-d]{1,2}", 1..8), 2..8)
        ) {
            let docs: Vec<_> = words.iter().enumerate().map(|(i, ws)| {
                let refs: Vec<&str> = ws.iter().map(|s| s.as_str()).collect();
                doc_of(&format!("d{i}"), &refs)
            }).collect();
            let loose = SignificanceConfig { max_df_ratio: 1.0, min_count: 1 };
            let tight = SignificanceConfig { max_df_ratio: 0.6, min_count: 2 };
            let (vl, _) = build_vocabulary(&docs, loose).unwrap();
            let (vt, _) = build_vocabulary(&docs, tight).unwrap();
            for term in vt.significant_terms() {
                prop_assert!(vl.is_significant(term));
            }
        }
    }
}
