//! Corpus analytics on top of the semantic space: agglomerative clustering,
//! threshold cuts, extractive summarization, portfolio comparison and
//! word-usage tables.
//!
//! Everything here is a pure function over immutable inputs. Clustering
//! scans its distance matrix in a fixed order and breaks ties by the
//! smallest slot pair, so equal inputs always produce the same tree.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDocument;
use crate::embedder::{DocumentVector, SemanticSpace};
use crate::error::{Error, Result};
use crate::simeng::{self, Candidate, Neighbor};

/// How the distance between two clusters follows from their members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Mean over all cross-cluster pairs (UPGMA).
    #[default]
    Average,
    /// Farthest pair.
    Complete,
    /// Nearest pair.
    Single,
}

/// One agglomerative merge. Node ids: `0..n` are leaves (positions in
/// [`Dendrogram::leaves`]); merge `t` creates node `n + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Similarity `1 - D^2 / 2` of the linkage distance `D` at merge time.
    pub similarity: f64,
}

/// Full merge history of a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    /// `leaves.len() - 1` merges, in merge order.
    pub merges: Vec<Merge>,
}

/// One multi-member cluster from a dendrogram cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Member doc ids, ascending.
    pub members: Vec<String>,
    /// Similarity of the cluster's topmost internal merge.
    pub split_at: f64,
}

/// Result of cutting a dendrogram at a similarity threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCut {
    /// Multi-member clusters, by `split_at` descending.
    pub clusters: Vec<Cluster>,
    /// Leaves that ended up alone; counted but not listed.
    pub singletons: usize,
}

/// An extractive summary: which units of the document to keep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub doc_id: String,
    /// Kept unit indices, strictly increasing (original order).
    pub kept: Vec<usize>,
    /// Similarity of each kept unit to the whole document, aligned with `kept`.
    pub scores: Vec<f64>,
}

/// Granularity of extractive summarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryUnit {
    #[default]
    Paragraph,
    Sentence,
}

/// Matches of one left-hand document against the right-hand set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioEntry {
    pub doc_id: String,
    /// Matching right-hand documents, similarity descending.
    pub matches: Vec<Neighbor>,
}

/// Cross-portfolio comparison: for every left-hand document, the right-hand
/// documents it matches at or above the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub threshold: f64,
    /// Entries ordered by their best match, descending; documents without
    /// matches are omitted.
    pub entries: Vec<PortfolioEntry>,
}

/// One term's row in a word-usage column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRow {
    pub term: String,
    /// Occurrences in the column's own document.
    pub count: u64,
    /// Similarity of the term's vector to the other document's vector.
    pub similarity: f64,
    /// Whether the term also occurs in the other document's text.
    pub shared: bool,
}

/// Word-usage column for one document of a compared pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordUsageColumn {
    pub doc_id: String,
    pub rows: Vec<UsageRow>,
}

/// Side-by-side word-usage comparison of two documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordUsageTable {
    pub a: WordUsageColumn,
    pub b: WordUsageColumn,
}

/// Euclidean distance matrix (row-major, n x n) over unit document vectors.
fn distance_matrix(docs: &[DocumentVector]) -> Result<Vec<f64>> {
    let dim = docs[0].vec.len();
    for d in docs {
        if d.vec.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: d.vec.len() });
        }
        let norm = d.vec.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized { norm });
        }
    }
    let n = docs.len();
    let matrix: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let docs = &docs;
            (0..n).map(move |j| {
                if i == j {
                    return 0.0;
                }
                let dot: f64 = docs[i]
                    .vec
                    .iter()
                    .zip(docs[j].vec.iter())
                    .map(|(&x, &y)| x as f64 * y as f64)
                    .sum();
                let sim = dot.clamp(-1.0, 1.0);
                (2.0 * (1.0 - sim)).sqrt()
            })
        })
        .collect();
    Ok(matrix)
}

/// Agglomerative hierarchical clustering over the pairwise distance matrix.
///
/// Clusters live in fixed matrix slots (slot = original document position);
/// each step merges the pair with the smallest linkage distance, breaking
/// ties by the smallest (row, col) slot pair, and the merged cluster takes
/// the smaller slot. Distances to the merged cluster are updated
/// incrementally per linkage rule.
pub fn hcluster(docs: &[DocumentVector], linkage: Linkage) -> Result<Dendrogram> {
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments { found: docs.len(), needed: 2 });
    }
    let n = docs.len();
    let mut dist = distance_matrix(docs)?;
    let mut alive = vec![true; n];
    let mut node_of_slot: Vec<usize> = (0..n).collect();
    let mut size_of_slot: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        // Smallest distance over alive slot pairs; first hit in row-major
        // order wins, which is exactly the smallest (row, col) tie rule.
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in i + 1..n {
                if !alive[j] {
                    continue;
                }
                let d = dist[i * n + j];
                if best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let (i, j, d) = best.expect("at least two clusters remain before the last merge");

        merges.push(Merge {
            left: node_of_slot[i],
            right: node_of_slot[j],
            similarity: 1.0 - d * d / 2.0,
        });

        // New cluster occupies slot i.
        let (si, sj) = (size_of_slot[i] as f64, size_of_slot[j] as f64);
        for l in 0..n {
            if !alive[l] || l == i || l == j {
                continue;
            }
            let dil = dist[i.min(l) * n + i.max(l)];
            let djl = dist[j.min(l) * n + j.max(l)];
            let updated = match linkage {
                Linkage::Average => (si * dil + sj * djl) / (si + sj),
                Linkage::Complete => dil.max(djl),
                Linkage::Single => dil.min(djl),
            };
            dist[i.min(l) * n + i.max(l)] = updated;
        }
        alive[j] = false;
        node_of_slot[i] = n + step;
        size_of_slot[i] += size_of_slot[j];
    }

    Ok(Dendrogram { leaves: docs.iter().map(|d| d.doc_id.clone()).collect(), merges })
}

/// Cut a dendrogram at `min_similarity`: report every maximal subtree whose
/// internal merges all reach the threshold. Single-leaf subtrees are counted
/// as singletons but not listed.
pub fn cut_clusters(dendrogram: &Dendrogram, min_similarity: f64) -> ClusterCut {
    let n = dendrogram.leaves.len();
    let merges = &dendrogram.merges;

    // A subtree qualifies when its own merge and all merges below reach the
    // threshold. Leaves always qualify.
    let mut valid = vec![false; merges.len()];
    let node_valid = |node: usize, valid: &[bool]| node < n || valid[node - n];
    for (t, m) in merges.iter().enumerate() {
        valid[t] = m.similarity >= min_similarity
            && node_valid(m.left, &valid)
            && node_valid(m.right, &valid);
    }

    // Parent merge of each internal node (merges reference earlier nodes).
    let mut parent = vec![usize::MAX; merges.len()];
    for (t, m) in merges.iter().enumerate() {
        for child in [m.left, m.right] {
            if child >= n {
                parent[child - n] = t;
            }
        }
    }

    let mut clusters = Vec::new();
    let mut covered = 0usize;
    for t in 0..merges.len() {
        let is_maximal =
            valid[t] && (parent[t] == usize::MAX || !valid[parent[t]]);
        if !is_maximal {
            continue;
        }
        let mut members = Vec::new();
        let mut stack = vec![n + t];
        while let Some(node) = stack.pop() {
            if node < n {
                members.push(dendrogram.leaves[node].clone());
            } else {
                let m = &merges[node - n];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        members.sort();
        covered += members.len();
        clusters.push(Cluster { members, split_at: merges[t].similarity });
    }
    clusters.sort_by(|a, b| {
        b.split_at
            .total_cmp(&a.split_at)
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    ClusterCut { clusters, singletons: n - covered }
}

/// Cut a dendrogram into `n_clusters` groups: replay merges until only that
/// many remain, so the last `n_clusters - 1` (loosest) merges are undone.
/// The target is clamped to `1..=leaves`. As in [`cut_clusters`],
/// single-leaf groups are counted as singletons but not listed.
pub fn cut_into(dendrogram: &Dendrogram, n_clusters: usize) -> ClusterCut {
    let n = dendrogram.leaves.len();
    let target = n_clusters.clamp(1, n.max(1));
    let steps = n.saturating_sub(target);
    let mut nodes: Vec<Option<(Vec<usize>, f64)>> =
        (0..n).map(|i| Some((vec![i], f64::INFINITY))).collect();
    nodes.resize(n + steps, None);
    for (t, m) in dendrogram.merges.iter().take(steps).enumerate() {
        let (mut members, _) = nodes[m.left].take().expect("left child still unmerged");
        let (right, _) = nodes[m.right].take().expect("right child still unmerged");
        members.extend(right);
        // The node's own merge is its topmost so far, hence its split point.
        nodes[n + t] = Some((members, m.similarity));
    }
    let mut clusters = Vec::new();
    let mut singletons = 0usize;
    for (member_idx, split_at) in nodes.into_iter().flatten() {
        if member_idx.len() < 2 {
            singletons += 1;
            continue;
        }
        let mut members: Vec<String> =
            member_idx.iter().map(|&i| dendrogram.leaves[i].clone()).collect();
        members.sort();
        clusters.push(Cluster { members, split_at });
    }
    clusters.sort_by(|a, b| {
        b.split_at
            .total_cmp(&a.split_at)
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    ClusterCut { clusters, singletons }
}

/// Extractive summary: embed every unit (paragraph or sentence) and the
/// whole document, keep the `n_keep` units most similar to the document,
/// and re-emit them in original order. Units without significant terms are
/// ineligible.
pub fn summarize(
    doc: &TokenizedDocument,
    space: &SemanticSpace,
    n_keep: usize,
    unit: SummaryUnit,
) -> Result<Summary> {
    let doc_vec = space.compose_vector(&doc.term_bag())?.vec;
    let unit_count = match unit {
        SummaryUnit::Paragraph => doc.paragraphs.len(),
        SummaryUnit::Sentence => doc.sentences.len(),
    };
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for idx in 0..unit_count {
        let bag = match unit {
            SummaryUnit::Paragraph => doc.paragraph_bag(idx),
            SummaryUnit::Sentence => doc.sentence_bag(idx),
        };
        match space.compose_vector(&bag) {
            Ok(composed) => {
                scored.push((idx, simeng::cosine(&composed.vec, &doc_vec)?));
            }
            Err(Error::NoSignificantTerms) => continue,
            Err(e) => return Err(e),
        }
    }
    if scored.is_empty() {
        return Err(Error::NoSignificantTerms);
    }
    // Highest similarity first, earlier unit on ties, then restore order.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n_keep);
    scored.sort_by_key(|&(idx, _)| idx);
    Ok(Summary {
        doc_id: doc.id.clone(),
        kept: scored.iter().map(|&(idx, _)| idx).collect(),
        scores: scored.iter().map(|&(_, s)| s).collect(),
    })
}

/// Compare two document sets: for every left-hand document, list the
/// right-hand documents with similarity at or above `threshold`.
pub fn compare_portfolios(
    a: &[DocumentVector],
    b: &[DocumentVector],
    threshold: f64,
) -> Result<PortfolioReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let rows: Vec<Candidate> =
        a.iter().map(|d| Candidate { id: &d.doc_id, vec: &d.vec }).collect();
    let cols: Vec<Candidate> =
        b.iter().map(|d| Candidate { id: &d.doc_id, vec: &d.vec }).collect();
    let matrix = simeng::cross_matrix(&rows, &cols)?;
    let mut entries = Vec::new();
    for (i, row) in matrix.row_ids.iter().enumerate() {
        let mut matches: Vec<Neighbor> = matrix
            .col_ids
            .iter()
            .enumerate()
            .filter_map(|(j, col)| {
                let sim = matrix.get(i, j);
                (sim >= threshold).then(|| Neighbor { id: col.clone(), similarity: sim })
            })
            .collect();
        if matches.is_empty() {
            continue;
        }
        matches.sort_by(|x, y| y.similarity.total_cmp(&x.similarity).then_with(|| x.id.cmp(&y.id)));
        entries.push(PortfolioEntry { doc_id: row.clone(), matches });
    }
    entries.sort_by(|x, y| {
        y.matches[0]
            .similarity
            .total_cmp(&x.matches[0].similarity)
            .then_with(|| x.doc_id.cmp(&y.doc_id))
    });
    Ok(PortfolioReport { threshold, entries })
}

/// Word-usage comparison of two documents: each column ranks the document's
/// own significant terms by the similarity of their vectors to the *other*
/// document's vector, flagging terms whose surface form both texts share.
pub fn word_usage_table(
    doc_a: &TokenizedDocument,
    doc_b: &TokenizedDocument,
    space: &SemanticSpace,
    top_n: usize,
) -> Result<WordUsageTable> {
    let bag_a = doc_a.term_bag();
    let bag_b = doc_b.term_bag();
    let vec_a = space.compose_vector(&bag_a)?.vec;
    let vec_b = space.compose_vector(&bag_b)?.vec;

    let column = |own_id: &str,
                  own_bag: &BTreeMap<String, u64>,
                  other_bag: &BTreeMap<String, u64>,
                  other_vec: &[f32]|
     -> Result<WordUsageColumn> {
        let mut rows = Vec::new();
        for (term, &count) in own_bag {
            if !space.vocab().is_significant(term) {
                continue;
            }
            let sim = match space.term_vector(term) {
                Ok(tv) => simeng::cosine(&tv, other_vec)?,
                Err(Error::ZeroVector(_)) => continue,
                Err(e) => return Err(e),
            };
            rows.push(UsageRow {
                term: term.clone(),
                count,
                similarity: sim,
                shared: other_bag.contains_key(term),
            });
        }
        rows.sort_by(|a, b| {
            b.similarity.total_cmp(&a.similarity).then_with(|| a.term.cmp(&b.term))
        });
        rows.truncate(top_n);
        Ok(WordUsageColumn { doc_id: own_id.to_string(), rows })
    };

    Ok(WordUsageTable {
        a: column(&doc_a.id, &bag_a, &bag_b, &vec_b)?,
        b: column(&doc_b.id, &bag_b, &bag_a, &vec_a)?,
    })
}
