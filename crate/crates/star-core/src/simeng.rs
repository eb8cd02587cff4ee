//! Similarity engine over unit vectors: cosine similarity, the derived
//! Euclidean distance, exhaustive ranked retrieval, vector rejection for
//! sense filtering, a plain word-overlap baseline, and batched
//! cross-similarity matrices.
//!
//! Every comparison takes unit-normalized f32 vectors and accumulates in
//! f64. Ranking is total: ties in similarity break by ascending id, so any
//! two runs over the same inputs produce the same order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedder::SemanticSpace;
use crate::error::{Error, Result};

/// How far a norm may drift from 1 before a vector is rejected.
const NORM_TOLERANCE: f64 = 1e-6;

/// Residual norm below which a rejected vector counts as zero.
const RESIDUAL_FLOOR: f64 = 1e-9;

/// A vector to score, borrowing its id and coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub vec: &'a [f32],
}

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

/// Dense row-major cosine matrix between two candidate lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// `row_ids.len() * col_ids.len()` values, row-major.
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.col_ids.len() + col]
    }
}

fn norm_f64(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

fn check_unit(v: &[f32]) -> Result<()> {
    let norm = norm_f64(v);
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

fn check_dims(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dims(a, b)?;
    check_unit(a)?;
    check_unit(b)?;
    let dot: f64 = a.iter().zip(b.iter()).map(|(&x, &y)| x as f64 * y as f64).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Euclidean distance between unit vectors with cosine similarity `sim`:
/// `sqrt(2 * (1 - sim))`. Decreases strictly as similarity grows.
pub fn distance(sim: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&sim) {
        return Err(Error::OutOfRange(sim));
    }
    Ok((2.0 * (1.0 - sim)).sqrt())
}

fn rank_order(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.id.cmp(&b.id))
}

/// The `k` most similar candidates, most similar first; ties break by
/// ascending id. Scans exhaustively, so the result is exact.
pub fn top_k(query: &[f32], candidates: &[Candidate], k: usize) -> Result<Vec<Neighbor>> {
    check_unit(query)?;
    let mut scored = candidates
        .par_iter()
        .map(|c| {
            check_dims(query, c.vec)?;
            check_unit(c.vec)?;
            let dot: f64 =
                query.iter().zip(c.vec.iter()).map(|(&x, &y)| x as f64 * y as f64).sum();
            Ok(Neighbor { id: c.id.to_string(), similarity: dot.clamp(-1.0, 1.0) })
        })
        .collect::<Result<Vec<Neighbor>>>()?;
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(scored)
}

/// Remove from `v` its component along the unit vector `against` and
/// re-normalize. Fails with [`Error::ZeroVector`] when `v` is (numerically)
/// parallel to `against`.
pub fn orthogonalize(v: &[f32], against: &[f32]) -> Result<Vec<f32>> {
    check_dims(v, against)?;
    check_unit(v)?;
    check_unit(against)?;
    // Divide by the anchor's exact squared norm rather than assuming 1, so
    // projecting a vector onto itself leaves a residual of exactly zero.
    let dot: f64 = v.iter().zip(against.iter()).map(|(&x, &a)| x as f64 * a as f64).sum();
    let norm_sq: f64 = against.iter().map(|&a| a as f64 * a as f64).sum();
    let proj = dot / norm_sq;
    let residual: Vec<f64> = v
        .iter()
        .zip(against.iter())
        .map(|(&x, &a)| x as f64 - proj * a as f64)
        .collect();
    let norm = residual.iter().map(|&x| x * x).sum::<f64>().sqrt();
    if norm < RESIDUAL_FLOOR {
        return Err(Error::ZeroVector(
            "vector is parallel to the direction being removed".into(),
        ));
    }
    Ok(residual.iter().map(|&x| (x / norm) as f32).collect())
}

/// Cosine similarity between a term's semantic vector and a document vector.
pub fn word_doc_similarity(space: &SemanticSpace, term: &str, doc_vec: &[f32]) -> Result<f64> {
    let tv = space.term_vector(term)?;
    cosine(&tv, doc_vec)
}

/// Surface-overlap baseline: cosine between tf-idf bags over significant
/// terms only. Documents that share no significant words score exactly 0,
/// whatever their meaning — the contrast case for semantic similarity.
pub fn word_overlap_similarity(
    space: &SemanticSpace,
    bag_a: &BTreeMap<String, u64>,
    bag_b: &BTreeMap<String, u64>,
) -> Result<f64> {
    let weigh = |bag: &BTreeMap<String, u64>| -> Result<BTreeMap<String, f64>> {
        let mut weights = BTreeMap::new();
        for (term, &n) in bag {
            if n == 0 || !space.vocab().is_significant(term) {
                continue;
            }
            weights.insert(term.clone(), n as f64 * space.idf_weight(term)?);
        }
        Ok(weights)
    };
    let wa = weigh(bag_a)?;
    let wb = weigh(bag_b)?;
    let norm = |w: &BTreeMap<String, f64>| w.values().map(|&x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&wa), norm(&wb));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::NoSignificantTerms);
    }
    let mut dot = 0.0;
    for (term, &x) in &wa {
        if let Some(&y) = wb.get(term) {
            dot += x * y;
        }
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// All-pairs cosine matrix between `rows` and `cols`, computed row-parallel.
pub fn cross_matrix(rows: &[Candidate], cols: &[Candidate]) -> Result<SimilarityMatrix> {
    for c in rows.iter().chain(cols.iter()) {
        check_unit(c.vec)?;
    }
    if let (Some(r), Some(c)) = (rows.first(), cols.first()) {
        check_dims(r.vec, c.vec)?;
    }
    let values: Vec<f64> = rows
        .par_iter()
        .flat_map_iter(|r| {
            cols.iter().map(|c| {
                let dot: f64 =
                    r.vec.iter().zip(c.vec.iter()).map(|(&x, &y)| x as f64 * y as f64).sum();
                dot.clamp(-1.0, 1.0)
            })
        })
        .collect();
    Ok(SimilarityMatrix {
        row_ids: rows.iter().map(|c| c.id.to_string()).collect(),
        col_ids: cols.iter().map(|c| c.id.to_string()).collect(),
        values,
    })
}
