//! Builds the semantic space: every significant term accumulates the seed
//! vectors of the significant terms it shares contexts with.
//!
//! For one context (a sentence, or a sliding token window) with significant
//! tokens `t` of multiplicity `m_t`, the context sum is `S = sum m_t *
//! seed(t)`; each distinct significant token `u` then receives `S - m_u *
//! seed(u)` — everything around it, never its own seed. Accumulation is a
//! sum of deterministic integer-valued contributions, so document order,
//! sharding and worker count cannot change the result, and adding documents
//! later is exact for terms whose significance status did not change.
//!
//! Accumulators are kept in f64 while building. Vectors handed to the
//! similarity layer are produced by quantizing an accumulator to f32 and
//! normalizing, which makes every query result identical before and after a
//! save/load round-trip (stored accumulators are f32).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, TokenizedDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::seedspace::{self, SeedConfig, SeedVector};

/// Documents per shard during parallel accumulation. Fixed (independent of
/// worker count) so the merge structure, and thus the result, never varies.
const SHARD_SIZE: usize = 256;

/// What counts as one co-occurrence context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Each sentence is one context.
    Sentence,
    /// Sliding windows of this many tokens within each sentence; sentences
    /// shorter than the window form a single context.
    Window(usize),
}

impl Default for ContextMode {
    fn default() -> Self {
        ContextMode::Sentence
    }
}

/// Accumulation settings beyond the seed geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub context_mode: ContextMode,
    /// Weight each in-context occurrence by the term's idf instead of plain
    /// multiplicity.
    pub context_idf: bool,
}

impl EmbedOptions {
    pub fn validate(&self) -> Result<()> {
        if let ContextMode::Window(w) = self.context_mode {
            if w < 2 {
                return Err(Error::ConfigInvalid(format!(
                    "context window must cover at least 2 tokens, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Raw co-occurrence sum for one term.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticAccumulator {
    /// Unnormalized accumulated context sums (length = space dimension).
    pub raw: Vec<f64>,
    /// Number of contexts that contributed.
    pub context_count: u64,
    /// True when the term crossed the significance threshold during an
    /// incremental add: its accumulator misses contexts from the documents
    /// indexed before the add, until the next full rebuild.
    pub partial: bool,
}

impl SemanticAccumulator {
    fn zero(dim: usize) -> Self {
        SemanticAccumulator { raw: vec![0.0; dim], context_count: 0, partial: false }
    }
}

/// A document embedded in the semantic space.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVector {
    pub doc_id: String,
    /// Unit-normalized f32 vector (length = space dimension).
    pub vec: Vec<f32>,
    /// Significant tokens (with multiplicity) that went into the vector.
    pub term_count: u64,
}

/// A document that could not be embedded, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedDocument {
    pub doc_id: String,
    pub reason: String,
}

/// Result of composing a weighted term multiset into a unit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedVector {
    pub vec: Vec<f32>,
    /// Significant tokens (with multiplicity) that contributed.
    pub term_count: u64,
}

/// The trained semantic space: one accumulator per significant term, plus
/// everything needed to keep growing it.
#[derive(Debug, Clone)]
pub struct SemanticSpace {
    seed_config: SeedConfig,
    options: EmbedOptions,
    vocab: Vocabulary,
    stats: CorpusStats,
    /// Significant terms in lexicographic order; the row order everywhere.
    terms: Vec<String>,
    index: HashMap<String, u32>,
    accumulators: Vec<SemanticAccumulator>,
    /// Seed vectors by row; regenerated from config, never persisted.
    seeds: Vec<SeedVector>,
    /// Per-row idf weights, present when `options.context_idf` is set.
    context_idf: Option<Vec<f64>>,
    doc_ids: BTreeSet<String>,
}

impl SemanticSpace {
    pub fn seed_config(&self) -> &SeedConfig {
        &self.seed_config
    }

    pub fn options(&self) -> &EmbedOptions {
        &self.options
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn dim(&self) -> usize {
        self.seed_config.dim
    }

    /// Significant terms in row (lexicographic) order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_ids(&self) -> &BTreeSet<String> {
        &self.doc_ids
    }

    pub fn accumulator(&self, term: &str) -> Option<&SemanticAccumulator> {
        self.index.get(term).map(|&row| &self.accumulators[row as usize])
    }

    /// `(term, accumulator)` pairs in row order.
    pub fn iter_accumulators(&self) -> impl Iterator<Item = (&str, &SemanticAccumulator)> {
        self.terms.iter().map(|t| t.as_str()).zip(self.accumulators.iter())
    }

    /// Absorb one context (a token slice) into the accumulators in place.
    /// Contexts with fewer than two significant tokens change nothing.
    pub fn absorb_context(&mut self, tokens: &[String]) {
        let mut scratch = Scratch::new(self.seed_config.dim);
        absorb(
            tokens,
            &self.index,
            &self.seeds,
            self.context_idf.as_deref(),
            &mut scratch,
            &mut self.accumulators,
        );
    }

    /// Inverse document frequency weight `ln(M / df)` of a known term.
    pub fn idf_weight(&self, term: &str) -> Result<f64> {
        let entry = self
            .vocab
            .get(term)
            .filter(|e| e.document_frequency > 0)
            .ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
        Ok((self.stats.documents as f64 / entry.document_frequency as f64).ln())
    }

    /// Unit-normalized semantic vector of a significant term.
    pub fn term_vector(&self, term: &str) -> Result<Vec<f32>> {
        let &row = self
            .index
            .get(term)
            .ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
        normalized_f32(&self.accumulators[row as usize].raw)
            .ok_or_else(|| Error::ZeroVector(format!("term {term:?} has no co-occurrence signal")))
    }

    /// Compose a unit vector for a weighted term multiset: each significant
    /// term contributes `count * idf * term_vector`. Terms that are unknown,
    /// insignificant or signal-free are skipped.
    pub fn compose_vector(&self, bag: &BTreeMap<String, u64>) -> Result<ComposedVector> {
        let dim = self.seed_config.dim;
        let mut sum = vec![0.0f64; dim];
        let mut used_tokens = 0u64;
        for (term, &n) in bag {
            if n == 0 {
                continue;
            }
            let Some(&row) = self.index.get(term) else { continue };
            let Some(tv) = normalized_f32(&self.accumulators[row as usize].raw) else {
                continue;
            };
            let w = self.idf_weight(term)?;
            used_tokens += n;
            let scale = n as f64 * w;
            for (dst, &x) in sum.iter_mut().zip(tv.iter()) {
                *dst += scale * x as f64;
            }
        }
        if used_tokens == 0 {
            return Err(Error::NoSignificantTerms);
        }
        let norm = sum.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NoSignificantTerms);
        }
        let vec = sum.iter().map(|&x| (x / norm) as f32).collect();
        Ok(ComposedVector { vec, term_count: used_tokens })
    }

    /// Rebuild a space from stored parts. `rows` must hold exactly the
    /// significant terms of `vocab` in lexicographic order.
    pub fn from_parts(
        seed_config: SeedConfig,
        options: EmbedOptions,
        vocab: Vocabulary,
        stats: CorpusStats,
        doc_ids: BTreeSet<String>,
        rows: Vec<(String, SemanticAccumulator)>,
    ) -> Result<Self> {
        seed_config.validate()?;
        options.validate()?;
        {
            let significant = vocab.significant_terms();
            if significant.len() != rows.len()
                || !significant.iter().zip(rows.iter()).all(|(a, (b, _))| *a == b)
            {
                return Err(Error::InconsistentBundle(
                    "accumulator rows do not match the significant vocabulary".into(),
                ));
            }
        }
        if let Some((term, acc)) =
            rows.iter().find(|(_, acc)| acc.raw.len() != seed_config.dim)
        {
            return Err(Error::InconsistentBundle(format!(
                "accumulator for {:?} has {} coordinates, space has {}",
                term,
                acc.raw.len(),
                seed_config.dim
            )));
        }
        let (terms, accumulators): (Vec<String>, Vec<SemanticAccumulator>) =
            rows.into_iter().unzip();
        let scaffold = SpaceScaffold::build(&terms, &vocab, &stats, &seed_config, &options)?;
        Ok(SemanticSpace {
            seed_config,
            options,
            vocab,
            stats,
            terms,
            index: scaffold.index,
            accumulators,
            seeds: scaffold.seeds,
            context_idf: scaffold.context_idf,
            doc_ids,
        })
    }
}

/// Row index, seeds and optional idf table for a term list.
struct SpaceScaffold {
    index: HashMap<String, u32>,
    seeds: Vec<SeedVector>,
    context_idf: Option<Vec<f64>>,
}

impl SpaceScaffold {
    fn build(
        terms: &[String],
        vocab: &Vocabulary,
        stats: &CorpusStats,
        seed_config: &SeedConfig,
        options: &EmbedOptions,
    ) -> Result<Self> {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let seeds = seedspace::seeds_for_terms(terms.iter().map(|t| t.as_str()), seed_config)?;
        let context_idf = if options.context_idf {
            Some(
                terms
                    .iter()
                    .map(|t| {
                        let e = vocab.get(t).expect("row term is in vocabulary");
                        (stats.documents as f64 / e.document_frequency as f64).ln()
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(SpaceScaffold { index, seeds, context_idf })
    }
}

/// Build a semantic space over `docs` with the given vocabulary and stats.
pub fn build_space(
    docs: &[TokenizedDocument],
    vocab: Vocabulary,
    stats: CorpusStats,
    seed_config: SeedConfig,
    options: EmbedOptions,
) -> Result<SemanticSpace> {
    seed_config.validate()?;
    options.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_ids = BTreeSet::new();
    for doc in docs {
        if !doc_ids.insert(doc.id.clone()) {
            return Err(Error::DuplicateDocumentId(doc.id.clone()));
        }
    }
    let terms: Vec<String> = vocab.significant_terms().iter().map(|t| t.to_string()).collect();
    let scaffold = SpaceScaffold::build(&terms, &vocab, &stats, &seed_config, &options)?;
    let mut accumulators = vec![SemanticAccumulator::zero(seed_config.dim); terms.len()];
    absorb_corpus(
        docs,
        &scaffold.index,
        &scaffold.seeds,
        scaffold.context_idf.as_deref(),
        seed_config.dim,
        options.context_mode,
        &mut accumulators,
    );
    Ok(SemanticSpace {
        seed_config,
        options,
        vocab,
        stats,
        terms,
        index: scaffold.index,
        accumulators,
        seeds: scaffold.seeds,
        context_idf: scaffold.context_idf,
        doc_ids,
    })
}

/// Fold `new_docs` into an existing space under an updated vocabulary
/// (see [`crate::corpus::update_vocabulary`]).
///
/// Terms significant before and after keep their accumulators and receive
/// the new contexts on top — exactly what a full rebuild would give them
/// when their co-occurring significant set is stable. Terms promoted to
/// significant start from zero and are flagged [`SemanticAccumulator::partial`]
/// unless they never occurred in the previously indexed documents. Demoted
/// terms are dropped.
pub fn add_documents(
    space: SemanticSpace,
    new_docs: &[TokenizedDocument],
    updated_vocab: Vocabulary,
    updated_stats: CorpusStats,
) -> Result<SemanticSpace> {
    if new_docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_ids = space.doc_ids;
    for doc in new_docs {
        if !doc_ids.insert(doc.id.clone()) {
            return Err(Error::DuplicateDocumentId(doc.id.clone()));
        }
    }

    let terms: Vec<String> =
        updated_vocab.significant_terms().iter().map(|t| t.to_string()).collect();
    let scaffold = SpaceScaffold::build(
        &terms,
        &updated_vocab,
        &updated_stats,
        &space.seed_config,
        &space.options,
    )?;

    // Carry over accumulators of terms that stayed significant; decide the
    // partial flag for the rest from the old vocabulary.
    let mut old_accs: Vec<Option<SemanticAccumulator>> =
        space.accumulators.into_iter().map(Some).collect();
    let old_index = space.index;
    let old_vocab = space.vocab;
    let mut accumulators = Vec::with_capacity(terms.len());
    for term in &terms {
        let acc = match old_index.get(term) {
            Some(&row) => old_accs[row as usize].take().expect("each old row moves once"),
            None => {
                let mut acc = SemanticAccumulator::zero(space.seed_config.dim);
                // Promoted terms occurred before without being absorbed;
                // brand-new terms have no missing history.
                acc.partial = old_vocab.get(term).is_some();
                acc
            }
        };
        accumulators.push(acc);
    }

    absorb_corpus(
        new_docs,
        &scaffold.index,
        &scaffold.seeds,
        scaffold.context_idf.as_deref(),
        space.seed_config.dim,
        space.options.context_mode,
        &mut accumulators,
    );

    Ok(SemanticSpace {
        seed_config: space.seed_config,
        options: space.options,
        vocab: updated_vocab,
        stats: updated_stats,
        terms,
        index: scaffold.index,
        accumulators,
        seeds: scaffold.seeds,
        context_idf: scaffold.context_idf,
        doc_ids,
    })
}

/// Embed every document; documents with no significant terms are reported
/// as skipped rather than failing the batch.
pub fn document_vectors(
    space: &SemanticSpace,
    docs: &[TokenizedDocument],
) -> Result<(Vec<DocumentVector>, Vec<SkippedDocument>)> {
    let composed: Vec<(String, Result<ComposedVector>)> = docs
        .par_iter()
        .map(|doc| (doc.id.clone(), space.compose_vector(&doc.term_bag())))
        .collect();
    let mut vectors = Vec::new();
    let mut skipped = Vec::new();
    for (doc_id, result) in composed {
        match result {
            Ok(c) => vectors.push(DocumentVector { doc_id, vec: c.vec, term_count: c.term_count }),
            Err(Error::NoSignificantTerms) => skipped.push(SkippedDocument {
                doc_id,
                reason: "no significant terms".into(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((vectors, skipped))
}

/// Quantize to f32, then normalize (in f64) over the quantized values.
/// Returns `None` for an all-zero input.
pub(crate) fn normalized_f32(raw: &[f64]) -> Option<Vec<f32>> {
    let q: Vec<f32> = raw.iter().map(|&x| x as f32).collect();
    let norm_sq: f64 = q.iter().map(|&x| x as f64 * x as f64).sum();
    if norm_sq == 0.0 {
        return None;
    }
    let norm = norm_sq.sqrt();
    Some(q.iter().map(|&x| (x as f64 / norm) as f32).collect())
}

/// Visit every context of a document under the given mode.
fn for_each_context(doc: &TokenizedDocument, mode: ContextMode, f: &mut impl FnMut(&[String])) {
    match mode {
        ContextMode::Sentence => {
            for sentence in &doc.sentences {
                f(sentence);
            }
        }
        ContextMode::Window(w) => {
            for sentence in &doc.sentences {
                if sentence.len() <= w {
                    f(sentence);
                } else {
                    for window in sentence.windows(w) {
                        f(window);
                    }
                }
            }
        }
    }
}

/// Reusable per-shard working memory for context absorption.
struct Scratch {
    /// Dense context sum `S`.
    dense: Vec<f64>,
    /// Which coordinates of `dense` are live.
    seen: Vec<bool>,
    touched: Vec<u32>,
    /// Rows of the significant tokens in the current context.
    rows: Vec<u32>,
    /// Distinct rows with multiplicities.
    counts: Vec<(u32, u64)>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            dense: vec![0.0; dim],
            seen: vec![false; dim],
            touched: Vec::new(),
            rows: Vec::new(),
            counts: Vec::new(),
        }
    }
}

/// Where absorbed contributions land: either the space's own accumulator
/// table or a per-shard partial map.
trait ContextSink {
    fn slot(&mut self, row: u32, dim: usize) -> &mut SemanticAccumulator;
}

impl ContextSink for Vec<SemanticAccumulator> {
    fn slot(&mut self, row: u32, _dim: usize) -> &mut SemanticAccumulator {
        &mut self[row as usize]
    }
}

/// Per-shard partial accumulators, keyed by row.
#[derive(Default)]
struct ShardSink(BTreeMap<u32, SemanticAccumulator>);

impl ContextSink for ShardSink {
    fn slot(&mut self, row: u32, dim: usize) -> &mut SemanticAccumulator {
        self.0.entry(row).or_insert_with(|| SemanticAccumulator::zero(dim))
    }
}

/// Absorb one context into `sink`. No-op when fewer than two significant
/// tokens (with multiplicity) are present.
fn absorb<S: ContextSink>(
    tokens: &[String],
    index: &HashMap<String, u32>,
    seeds: &[SeedVector],
    idf: Option<&[f64]>,
    scratch: &mut Scratch,
    sink: &mut S,
) {
    scratch.rows.clear();
    for token in tokens {
        if let Some(&row) = index.get(token) {
            scratch.rows.push(row);
        }
    }
    if scratch.rows.len() < 2 {
        return;
    }
    scratch.rows.sort_unstable();
    scratch.counts.clear();
    for &row in scratch.rows.iter() {
        match scratch.counts.last_mut() {
            Some((r, m)) if *r == row => *m += 1,
            _ => scratch.counts.push((row, 1)),
        }
    }

    let dim = scratch.dense.len();
    let weight_of = |row: u32, m: u64| -> f64 {
        let base = m as f64;
        match idf {
            Some(table) => base * table[row as usize],
            None => base,
        }
    };

    // S = sum of weighted seeds, tracked sparsely.
    for &(row, m) in &scratch.counts {
        let w = weight_of(row, m);
        let seed = &seeds[row as usize];
        for &p in &seed.positives {
            if !scratch.seen[p as usize] {
                scratch.seen[p as usize] = true;
                scratch.touched.push(p);
            }
            scratch.dense[p as usize] += w;
        }
        for &n in &seed.negatives {
            if !scratch.seen[n as usize] {
                scratch.seen[n as usize] = true;
                scratch.touched.push(n);
            }
            scratch.dense[n as usize] -= w;
        }
    }

    // Each distinct token receives S minus its own weighted seed.
    for &(row, m) in &scratch.counts {
        let w = weight_of(row, m);
        let acc = sink.slot(row, dim);
        acc.context_count += 1;
        for &i in &scratch.touched {
            acc.raw[i as usize] += scratch.dense[i as usize];
        }
        let seed = &seeds[row as usize];
        for &p in &seed.positives {
            acc.raw[p as usize] -= w;
        }
        for &n in &seed.negatives {
            acc.raw[n as usize] += w;
        }
    }

    for &i in &scratch.touched {
        scratch.dense[i as usize] = 0.0;
        scratch.seen[i as usize] = false;
    }
    scratch.touched.clear();
}

/// Absorb a whole corpus: fixed-size document shards processed in parallel,
/// partial accumulators merged in ascending shard order.
fn absorb_corpus(
    docs: &[TokenizedDocument],
    index: &HashMap<String, u32>,
    seeds: &[SeedVector],
    idf: Option<&[f64]>,
    dim: usize,
    mode: ContextMode,
    accumulators: &mut [SemanticAccumulator],
) {
    let shards: Vec<ShardSink> = docs
        .par_chunks(SHARD_SIZE)
        .map(|chunk| {
            let mut scratch = Scratch::new(dim);
            let mut shard = ShardSink::default();
            for doc in chunk {
                for_each_context(doc, mode, &mut |ctx| {
                    absorb(ctx, index, seeds, idf, &mut scratch, &mut shard)
                });
            }
            shard
        })
        .collect();
    for shard in shards {
        for (row, part) in shard.0 {
            let acc = &mut accumulators[row as usize];
            for (dst, src) in acc.raw.iter_mut().zip(part.raw) {
                *dst += src;
            }
            acc.context_count += part.context_count;
        }
    }
}
