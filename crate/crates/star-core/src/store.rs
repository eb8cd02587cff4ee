//! Index persistence: a directory bundle holding the manifest, vocabulary,
//! raw term accumulators, document vectors and the document table.
//!
//! Layout:
//! - `manifest.json` — format version, configs, corpus stats, hash-function
//!   identifier, creation time, SHA-256 checksums of the data files.
//! - `vocab.tsv` — per term: counts, significance, context count, partial flag.
//! - `terms.vec` — accumulator matrix, one row per significant term in
//!   lexicographic order.
//! - `docs.vec` — unit document vectors, one row per embedded document.
//! - `docids.tsv` — every indexed document: id, embedded flag, significant
//!   token count, title.
//!
//! `.vec` files start with the 8-byte magic `STARIDX1`, then two u64
//! little-endian integers (rows, dimension), then rows × dimension f32
//! little-endian values. Accumulators are stored in 32 bits; semantic
//! vectors are always derived from 32-bit-quantized accumulators, so query
//! results are bit-identical before and after a round-trip. Seed vectors
//! are never stored — they regenerate from the manifest's seed config,
//! guarded by the hash-function identifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{CorpusStats, SignificanceConfig, Vocabulary, VocabularyEntry};
use crate::embedder::{EmbedOptions, SemanticAccumulator, SemanticSpace};
use crate::error::{Error, Result};
use crate::seedspace::{SeedConfig, HASH_FUNCTION_ID};

/// On-disk format revision this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

/// Leading magic of `.vec` matrix files.
pub const VEC_MAGIC: &[u8; 8] = b"STARIDX1";

const MANIFEST_FILE: &str = "manifest.json";
const VOCAB_FILE: &str = "vocab.tsv";
const TERMS_FILE: &str = "terms.vec";
const DOCS_FILE: &str = "docs.vec";
const DOCIDS_FILE: &str = "docids.tsv";

/// Everything about an index except the bulk data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    /// Identifies the seed derivation; a different value means stored
    /// accumulators and regenerated seeds would disagree.
    pub hash_function: String,
    /// Seconds since the Unix epoch at save time.
    pub created_unix: u64,
    pub seed_config: SeedConfig,
    pub significance: SignificanceConfig,
    pub embed_options: EmbedOptions,
    pub stats: CorpusStats,
    /// SHA-256 hex digests of the data files.
    pub checksums: BTreeMap<String, String>,
}

/// One indexed document: always an id, a vector only when the document had
/// significant terms at embedding time.
#[derive(Debug, Clone, PartialEq)]
pub struct DocRecord {
    pub doc_id: String,
    pub title: Option<String>,
    /// Unit vector and the significant token count that produced it.
    pub vector: Option<(Vec<f32>, u64)>,
}

/// A loaded index: manifest, semantic space, and the document table in
/// index order.
#[derive(Debug, Clone)]
pub struct IndexBundle {
    pub manifest: IndexManifest,
    pub space: SemanticSpace,
    pub docs: Vec<DocRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Escape tabs, newlines, carriage returns and backslashes for TSV fields.
fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(field: &str) -> Result<String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::InconsistentBundle(format!(
                    "invalid escape sequence \\{} in TSV field",
                    other.map_or(String::from("<end>"), |c| c.to_string())
                )))
            }
        }
    }
    Ok(out)
}

/// Serialize a row-major f32 matrix with the `.vec` header.
fn encode_vec_file(rows: usize, dim: usize, values: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + 16 + rows * dim * 4);
    buf.extend_from_slice(VEC_MAGIC);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(dim as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(buf.len(), 24 + rows * dim * 4);
    buf
}

/// Parse a `.vec` file into (rows, dim, values).
fn decode_vec_file(name: &str, bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 24 || &bytes[..8] != VEC_MAGIC {
        return Err(Error::InconsistentBundle(format!("{name}: missing STARIDX1 magic")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let payload = &bytes[24..];
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::InconsistentBundle(format!("{name}: header overflows")))?;
    if payload.len() != expected {
        return Err(Error::InconsistentBundle(format!(
            "{name}: header says {rows} x {dim} ({expected} payload bytes), file has {}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, dim, values))
}

/// Verify the bundle's internal consistency before writing anything.
fn check_bundle(space: &SemanticSpace, docs: &[DocRecord]) -> Result<()> {
    let dim = space.dim();
    let mut ids = BTreeSet::new();
    for record in docs {
        if !ids.insert(record.doc_id.as_str()) {
            return Err(Error::InconsistentBundle(format!(
                "document id {:?} appears twice in the document table",
                record.doc_id
            )));
        }
        if let Some((vec, _)) = &record.vector {
            if vec.len() != dim {
                return Err(Error::InconsistentBundle(format!(
                    "document {:?} has a {}-dimensional vector in a {}-dimensional space",
                    record.doc_id,
                    vec.len(),
                    dim
                )));
            }
        }
    }
    let space_ids: BTreeSet<&str> = space.doc_ids().iter().map(|s| s.as_str()).collect();
    if ids != space_ids {
        return Err(Error::InconsistentBundle(
            "document table does not match the documents the space was built from".into(),
        ));
    }
    if space.stats().documents != docs.len() as u64 {
        return Err(Error::InconsistentBundle(format!(
            "stats say {} documents, document table has {}",
            space.stats().documents,
            docs.len()
        )));
    }
    Ok(())
}

/// Write the index to `dir`, creating it if needed. Returns the manifest.
pub fn save_index(space: &SemanticSpace, docs: &[DocRecord], dir: &Path) -> Result<IndexManifest> {
    check_bundle(space, docs)?;
    fs::create_dir_all(dir)?;
    let dim = space.dim();

    // vocab.tsv: every known term with counts and accumulator metadata.
    let mut vocab_tsv = String::new();
    vocab_tsv.push_str("#term\tcollection_count\tdocument_frequency\tsignificant\tcontext_count\tpartial\n");
    for (term, entry) in space.vocab().iter() {
        let (context_count, partial) = match space.accumulator(term) {
            Some(acc) => (acc.context_count, acc.partial),
            None => (0, false),
        };
        vocab_tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            term,
            entry.collection_count,
            entry.document_frequency,
            u8::from(entry.significant),
            context_count,
            u8::from(partial),
        ));
    }

    // terms.vec: raw accumulators, quantized to f32, lexicographic rows.
    let term_rows = space.terms().len();
    let terms_vec = encode_vec_file(
        term_rows,
        dim,
        space
            .iter_accumulators()
            .flat_map(|(_, acc)| acc.raw.iter().map(|&x| x as f32)),
    );

    // docs.vec + docids.tsv.
    let embedded: Vec<&DocRecord> = docs.iter().filter(|d| d.vector.is_some()).collect();
    let docs_vec = encode_vec_file(
        embedded.len(),
        dim,
        embedded
            .iter()
            .flat_map(|d| d.vector.as_ref().unwrap().0.iter().copied()),
    );
    let mut docids_tsv = String::new();
    docids_tsv.push_str("#doc_id\tembedded\tterm_count\ttitle\n");
    for record in docs {
        let (embedded_flag, term_count) = match &record.vector {
            Some((_, n)) => (1, *n),
            None => (0, 0),
        };
        docids_tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            escape(&record.doc_id),
            embedded_flag,
            term_count,
            record.title.as_deref().map(escape).unwrap_or_default(),
        ));
    }

    let mut checksums = BTreeMap::new();
    checksums.insert(VOCAB_FILE.to_string(), sha256_hex(vocab_tsv.as_bytes()));
    checksums.insert(TERMS_FILE.to_string(), sha256_hex(&terms_vec));
    checksums.insert(DOCS_FILE.to_string(), sha256_hex(&docs_vec));
    checksums.insert(DOCIDS_FILE.to_string(), sha256_hex(docids_tsv.as_bytes()));

    let manifest = IndexManifest {
        format_version: FORMAT_VERSION,
        hash_function: HASH_FUNCTION_ID.to_string(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed_config: *space.seed_config(),
        significance: *space.vocab().config(),
        embed_options: *space.options(),
        stats: *space.stats(),
        checksums,
    };

    fs::write(dir.join(VOCAB_FILE), vocab_tsv)?;
    fs::write(dir.join(TERMS_FILE), terms_vec)?;
    fs::write(dir.join(DOCS_FILE), docs_vec)?;
    fs::write(dir.join(DOCIDS_FILE), docids_tsv)?;
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Error::InconsistentBundle(format!("manifest serialization: {e}")))?,
    )?;
    Ok(manifest)
}

fn read_checked(dir: &Path, name: &str, manifest: &IndexManifest) -> Result<Vec<u8>> {
    let bytes = fs::read(dir.join(name))?;
    let expected = manifest.checksums.get(name).ok_or_else(|| {
        Error::InconsistentBundle(format!("manifest has no checksum for {name}"))
    })?;
    if &sha256_hex(&bytes) != expected {
        return Err(Error::ChecksumMismatch { file: name.to_string() });
    }
    Ok(bytes)
}

fn tsv_rows(name: &str, bytes: &[u8]) -> Result<Vec<Vec<String>>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::InconsistentBundle(format!("{name} is not valid UTF-8")))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        rows.push(line.split('\t').map(str::to_string).collect());
    }
    Ok(rows)
}

fn parse_u64(name: &str, field: &str) -> Result<u64> {
    field
        .parse()
        .map_err(|_| Error::InconsistentBundle(format!("{name}: invalid integer {field:?}")))
}

fn parse_flag(name: &str, field: &str) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::InconsistentBundle(format!("{name}: invalid flag {field:?}"))),
    }
}

/// Load an index written by [`save_index`], verifying version, hash
/// function and checksums.
pub fn load_index(dir: &Path) -> Result<IndexBundle> {
    let manifest_bytes = fs::read(dir.join(MANIFEST_FILE))?;
    let value: serde_json::Value = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| Error::InconsistentBundle(format!("manifest.json: {e}")))?;
    let found_version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::InconsistentBundle("manifest.json: no format_version".into()))?;
    if found_version != FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: found_version as u32,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: IndexManifest = serde_json::from_value(value)
        .map_err(|e| Error::InconsistentBundle(format!("manifest.json: {e}")))?;
    if manifest.hash_function != HASH_FUNCTION_ID {
        return Err(Error::HashFunctionMismatch {
            found: manifest.hash_function,
            expected: HASH_FUNCTION_ID.to_string(),
        });
    }

    let vocab_bytes = read_checked(dir, VOCAB_FILE, &manifest)?;
    let terms_bytes = read_checked(dir, TERMS_FILE, &manifest)?;
    let docs_bytes = read_checked(dir, DOCS_FILE, &manifest)?;
    let docids_bytes = read_checked(dir, DOCIDS_FILE, &manifest)?;

    // Vocabulary and per-term accumulator metadata.
    let mut entries = BTreeMap::new();
    let mut meta = BTreeMap::new();
    for row in tsv_rows(VOCAB_FILE, &vocab_bytes)? {
        if row.len() != 6 {
            return Err(Error::InconsistentBundle(format!(
                "vocab.tsv: expected 6 columns, found {}",
                row.len()
            )));
        }
        let term = row[0].clone();
        let entry = VocabularyEntry {
            collection_count: parse_u64(VOCAB_FILE, &row[1])?,
            document_frequency: parse_u64(VOCAB_FILE, &row[2])?,
            significant: parse_flag(VOCAB_FILE, &row[3])?,
        };
        let context_count = parse_u64(VOCAB_FILE, &row[4])?;
        let partial = parse_flag(VOCAB_FILE, &row[5])?;
        if entry.significant {
            meta.insert(term.clone(), (context_count, partial));
        }
        if entries.insert(term, entry).is_some() {
            return Err(Error::InconsistentBundle(format!(
                "vocab.tsv: duplicate term {:?}",
                row[0]
            )));
        }
    }
    let vocab = Vocabulary::from_parts(entries, manifest.significance);

    // Accumulator matrix.
    let (term_rows, term_dim, term_values) = decode_vec_file(TERMS_FILE, &terms_bytes)?;
    if term_dim != manifest.seed_config.dim {
        return Err(Error::InconsistentBundle(format!(
            "terms.vec is {term_dim}-dimensional, manifest says {}",
            manifest.seed_config.dim
        )));
    }
    if term_rows != meta.len() {
        return Err(Error::InconsistentBundle(format!(
            "terms.vec has {term_rows} rows, vocabulary has {} significant terms",
            meta.len()
        )));
    }
    let rows: Vec<(String, SemanticAccumulator)> = meta
        .into_iter()
        .enumerate()
        .map(|(i, (term, (context_count, partial)))| {
            let start = i * term_dim;
            let raw = term_values[start..start + term_dim]
                .iter()
                .map(|&x| x as f64)
                .collect();
            (term, SemanticAccumulator { raw, context_count, partial })
        })
        .collect();

    // Document table and vectors.
    let (doc_rows, doc_dim, doc_values) = decode_vec_file(DOCS_FILE, &docs_bytes)?;
    if doc_rows > 0 && doc_dim != manifest.seed_config.dim {
        return Err(Error::InconsistentBundle(format!(
            "docs.vec is {doc_dim}-dimensional, manifest says {}",
            manifest.seed_config.dim
        )));
    }
    let mut docs = Vec::new();
    let mut doc_ids = BTreeSet::new();
    let mut next_vector = 0usize;
    for row in tsv_rows(DOCIDS_FILE, &docids_bytes)? {
        if row.len() != 4 {
            return Err(Error::InconsistentBundle(format!(
                "docids.tsv: expected 4 columns, found {}",
                row.len()
            )));
        }
        let doc_id = unescape(&row[0])?;
        let embedded = parse_flag(DOCIDS_FILE, &row[1])?;
        let term_count = parse_u64(DOCIDS_FILE, &row[2])?;
        let title = if row[3].is_empty() { None } else { Some(unescape(&row[3])?) };
        if !doc_ids.insert(doc_id.clone()) {
            return Err(Error::InconsistentBundle(format!(
                "docids.tsv: duplicate document id {doc_id:?}"
            )));
        }
        let vector = if embedded {
            if next_vector >= doc_rows {
                return Err(Error::InconsistentBundle(
                    "docids.tsv marks more embedded documents than docs.vec has rows".into(),
                ));
            }
            let start = next_vector * doc_dim;
            next_vector += 1;
            Some((doc_values[start..start + doc_dim].to_vec(), term_count))
        } else {
            None
        };
        docs.push(DocRecord { doc_id, title, vector });
    }
    if next_vector != doc_rows {
        return Err(Error::InconsistentBundle(format!(
            "docs.vec has {doc_rows} rows, docids.tsv marks {next_vector} embedded documents"
        )));
    }
    if manifest.stats.documents != docs.len() as u64 {
        return Err(Error::InconsistentBundle(format!(
            "manifest says {} documents, docids.tsv has {}",
            manifest.stats.documents,
            docs.len()
        )));
    }

    let space = SemanticSpace::from_parts(
        manifest.seed_config,
        manifest.embed_options,
        vocab,
        manifest.stats,
        doc_ids,
        rows,
    )?;
    Ok(IndexBundle { manifest, space, docs })
}
