//! Hybrid lexical + dense index over units, with reciprocal rank fusion.
//!
//! Lexical search is BM25 (Robertson/Sparck Jones IDF with +1 inside the
//! log, so IDF stays non-negative). Dense search is an exact scan: at a few
//! hundred thousand 256-dim vectors a full dot-product sweep is sub-second,
//! and exactness keeps the oracle tests crisp. Ranked lists are fused with
//! `RRF(d) = sum over lists of 1 / (k + rank(d))`; documents absent from a
//! list contribute only the present list's term.
//!
//! Tie-breaking everywhere is ascending `unit_id`, so two processes with the
//! same inputs produce identical rankings.

mod store;

pub use store::{read_manifest, FORMAT_VERSION};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{Unit, UnitKind};
use crate::embed::{Embedder, EmbedError, Embedding};
use crate::text::tokenize;
use crate::workbook::ImageAsset;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("units ({units}) and embeddings ({embeddings}) differ in length")]
    MisalignedInput { units: usize, embeddings: usize },
    #[error("duplicate unit_id {0:?}")]
    DuplicateUnitId(String),
    #[error("vector dimension mismatch: index has {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("query tokenizes to nothing")]
    EmptyQuery,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("index format version mismatch: found {found:?}, expected {expected:?}")]
    Version { found: String, expected: String },
    #[error("corrupt index file {file}: {detail}")]
    Corrupt { file: String, detail: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// RRF rank constant.
    pub k_rrf: u32,
    /// Dense candidate list depth.
    pub k_vector: usize,
    /// Lexical candidate list depth.
    pub k_lexical: usize,
    /// Fused results returned.
    pub k_final: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_rrf: 60,
            k_vector: 20,
            k_lexical: 20,
            k_final: 10,
            bm25_k1: 1.2,
            bm25_b: 0.75,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_rrf < 1 || self.k_vector < 1 || self.k_lexical < 1 || self.k_final < 1 {
            return Err("all retrieval counts must be >= 1".into());
        }
        if self.k_final > self.k_vector + self.k_lexical {
            return Err("k_final cannot exceed k_vector + k_lexical".into());
        }
        if !(self.bm25_k1 > 0.0 && self.bm25_b >= 0.0 && self.bm25_b <= 1.0) {
            return Err("bm25 parameters out of range".into());
        }
        Ok(())
    }
}

/// Which ranked list(s) a fused hit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionSource {
    Vector,
    Lexical,
    Both,
}

impl std::fmt::Display for FusionSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionSource::Vector => "Vector",
            FusionSource::Lexical => "Lexical",
            FusionSource::Both => "Both",
        })
    }
}

/// A fused retrieval result with its rank provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedHit {
    pub unit_id: String,
    pub rrf_score: f64,
    pub vector_rank: Option<u32>,
    pub lexical_rank: Option<u32>,
    pub source: FusionSource,
}

impl FusedHit {
    fn from_ranks(
        unit_id: String,
        vector_rank: Option<u32>,
        lexical_rank: Option<u32>,
        k_rrf: u32,
    ) -> Self {
        let term = |rank: Option<u32>| {
            rank.map(|r| 1.0 / f64::from(k_rrf + r)).unwrap_or(0.0)
        };
        let source = match (vector_rank, lexical_rank) {
            (Some(_), Some(_)) => FusionSource::Both,
            (Some(_), None) => FusionSource::Vector,
            (None, Some(_)) => FusionSource::Lexical,
            (None, None) => unreachable!("hit must appear in at least one list"),
        };
        FusedHit {
            unit_id,
            rrf_score: term(vector_rank) + term(lexical_rank),
            vector_rank,
            lexical_rank,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Posting {
    ordinal: u32,
    tf: u32,
}

/// Image payload stored alongside units so prompt attachments (and image
/// captions) survive an index save/load round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMedia {
    pub id: String,
    pub media_type: String,
    pub caption: Option<String>,
    pub bytes: Vec<u8>,
}

impl From<&ImageAsset> for StoredMedia {
    fn from(asset: &ImageAsset) -> Self {
        StoredMedia {
            id: asset.id.clone(),
            media_type: asset.media_type.clone(),
            caption: asset.caption.clone(),
            bytes: asset.bytes.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IndexStats {
    pub n_units: usize,
    pub n_rows: usize,
    pub n_columns: usize,
    pub n_windows: usize,
    pub n_images: usize,
    pub n_terms: usize,
    pub n_postings: usize,
}

impl IndexStats {
    pub fn kind_count(&self, kind: UnitKind) -> usize {
        match kind {
            UnitKind::Row => self.n_rows,
            UnitKind::Column => self.n_columns,
            UnitKind::Window => self.n_windows,
            UnitKind::Image => self.n_images,
        }
    }
}

/// Immutable hybrid index: unit store, BM25 postings, dense vectors, and
/// image payloads. Build once, share freely across threads.
pub struct HybridIndex {
    units: Vec<Unit>, // sorted by unit_id; position = ordinal
    ordinals: HashMap<String, u32>,
    postings: Vec<(String, Vec<Posting>)>, // term-sorted
    term_lookup: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    vectors: Vec<f32>, // row-major by ordinal
    dim: usize,
    media: Vec<StoredMedia>,
    media_lookup: HashMap<String, u32>,
    stats: IndexStats,
    /// Free-form provenance recorded by the builder (embedder spec,
    /// decompose config); persisted in the manifest.
    pub meta: serde_json::Value,
}

/// Build an index over aligned `units` / `embeddings` with no image
/// payloads.
pub fn build_index(units: Vec<Unit>, embeddings: Vec<Embedding>) -> Result<HybridIndex, IndexError> {
    build_index_with_media(units, embeddings, Vec::new())
}

/// Build an index carrying image payloads for prompt attachments.
pub fn build_index_with_media(
    units: Vec<Unit>,
    embeddings: Vec<Embedding>,
    media: Vec<StoredMedia>,
) -> Result<HybridIndex, IndexError> {
    if units.len() != embeddings.len() {
        return Err(IndexError::MisalignedInput {
            units: units.len(),
            embeddings: embeddings.len(),
        });
    }
    let dim = embeddings.first().map(Embedding::dim).unwrap_or(0);
    for e in &embeddings {
        if e.dim() != dim {
            return Err(IndexError::DimMismatch {
                expected: dim,
                got: e.dim(),
            });
        }
    }

    // Sort by unit_id so ordinals, postings, and tie-breaks all share one
    // deterministic order.
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| units[a].unit_id.cmp(&units[b].unit_id));
    for pair in order.windows(2) {
        if units[pair[0]].unit_id == units[pair[1]].unit_id {
            return Err(IndexError::DuplicateUnitId(units[pair[0]].unit_id.clone()));
        }
    }

    let mut sorted_units = Vec::with_capacity(units.len());
    let mut vectors = Vec::with_capacity(units.len() * dim);
    let mut doc_lengths = Vec::with_capacity(units.len());
    let mut term_map: HashMap<String, Vec<Posting>> = HashMap::new();

    // Avoid cloning unit bodies: pull them out of the original vec in sorted
    // order.
    let mut slots: Vec<Option<(Unit, Embedding)>> = units
        .into_iter()
        .zip(embeddings)
        .map(Some)
        .collect();
    for (ordinal, &src) in order.iter().enumerate() {
        let (unit, embedding) = slots[src].take().expect("each slot moved once");
        let tokens = tokenize(&unit.text);
        doc_lengths.push(tokens.len() as u32);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (term, count) in tf {
            term_map.entry(term).or_default().push(Posting {
                ordinal: ordinal as u32,
                tf: count,
            });
        }
        vectors.extend_from_slice(embedding.values());
        sorted_units.push(unit);
    }

    let mut postings: Vec<(String, Vec<Posting>)> = term_map.into_iter().collect();
    postings.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, list) in &mut postings {
        list.sort_by_key(|p| p.ordinal);
    }
    let term_lookup = postings
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.clone(), i as u32))
        .collect();
    let ordinals = sorted_units
        .iter()
        .enumerate()
        .map(|(i, u)| (u.unit_id.clone(), i as u32))
        .collect();

    let total_tokens: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
    let avg_doc_length = if sorted_units.is_empty() {
        0.0
    } else {
        total_tokens as f64 / sorted_units.len() as f64
    };

    let mut media = media;
    media.sort_by(|a, b| a.id.cmp(&b.id));
    let media_lookup = media
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.clone(), i as u32))
        .collect();

    let stats = IndexStats {
        n_units: sorted_units.len(),
        n_rows: sorted_units.iter().filter(|u| u.kind == UnitKind::Row).count(),
        n_columns: sorted_units.iter().filter(|u| u.kind == UnitKind::Column).count(),
        n_windows: sorted_units.iter().filter(|u| u.kind == UnitKind::Window).count(),
        n_images: sorted_units.iter().filter(|u| u.kind == UnitKind::Image).count(),
        n_terms: postings.len(),
        n_postings: postings.iter().map(|(_, l)| l.len()).sum(),
    };

    Ok(HybridIndex {
        units: sorted_units,
        ordinals,
        postings,
        term_lookup,
        doc_lengths,
        avg_doc_length,
        vectors,
        dim,
        media,
        media_lookup,
        stats,
        meta: serde_json::Value::Null,
    })
}

impl HybridIndex {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stats(&self) -> &IndexStats {
        &self.stats
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, unit_id: &str) -> Option<&Unit> {
        self.ordinals.get(unit_id).map(|&o| &self.units[o as usize])
    }

    pub fn media(&self, image_id: &str) -> Option<&StoredMedia> {
        self.media_lookup
            .get(image_id)
            .map(|&i| &self.media[i as usize])
    }

    fn vector(&self, ordinal: usize) -> &[f32] {
        &self.vectors[ordinal * self.dim..(ordinal + 1) * self.dim]
    }

    /// Exact top-k by dot product (cosine, by the unit-norm invariant),
    /// descending; ties broken by ascending unit_id.
    pub fn search_dense(
        &self,
        query: &Embedding,
        k: usize,
    ) -> Result<Vec<(String, f64)>, IndexError> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        if query.dim() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        let q = query.values();
        let scored = (0..self.units.len()).map(|ord| {
            let dot: f64 = self
                .vector(ord)
                .iter()
                .zip(q)
                .map(|(&a, &b)| f64::from(a) * f64::from(b))
                .sum();
            (ord as u32, dot)
        });
        Ok(self.take_top(scored, k))
    }

    /// BM25 top-k with canonical parameters (k1=1.2, b=0.75), descending;
    /// ties broken by ascending unit_id. Repeated query terms are scored
    /// once.
    pub fn search_lexical(&self, query: &str, k: usize) -> Result<Vec<(String, f64)>, IndexError> {
        self.search_lexical_with(query, k, 1.2, 0.75)
    }

    /// BM25 with explicit parameters (the config-driven path used by
    /// `retrieve`).
    pub fn search_lexical_with(
        &self,
        query: &str,
        k: usize,
        k1: f64,
        b: f64,
    ) -> Result<Vec<(String, f64)>, IndexError> {
        let tokens = tokenize(query);
        if tokens.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let mut seen = std::collections::HashSet::new();
        let n = self.units.len() as f64;
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in tokens {
            if !seen.insert(term.clone()) {
                continue;
            }
            let Some(&term_idx) = self.term_lookup.get(&term) else {
                continue;
            };
            let list = &self.postings[term_idx as usize].1;
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for posting in list {
                let dl = f64::from(self.doc_lengths[posting.ordinal as usize]);
                let tf = f64::from(posting.tf);
                let norm = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avg_doc_length));
                *scores.entry(posting.ordinal).or_insert(0.0) += idf * norm;
            }
        }
        Ok(self.take_top(scores.into_iter(), k))
    }

    fn take_top(
        &self,
        scored: impl Iterator<Item = (u32, f64)>,
        k: usize,
    ) -> Vec<(String, f64)> {
        let mut all: Vec<(u32, f64)> = scored.collect();
        all.sort_unstable_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        all.truncate(k);
        all.into_iter()
            .map(|(ord, score)| (self.units[ord as usize].unit_id.clone(), score))
            .collect()
    }

    /// End-to-end hybrid retrieval: embed the query, run both searches, fuse.
    /// A query whose tokens all miss the lexicon still runs dense-only
    /// fusion rather than erroring.
    pub fn retrieve(
        &self,
        query: &str,
        embedder: &dyn Embedder,
        cfg: &RetrievalConfig,
    ) -> Result<Vec<FusedHit>, IndexError> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let query_vec = embedder.embed_text(query)?;
        let dense = self.search_dense(&query_vec, cfg.k_vector)?;
        let lexical = if tokenize(query).is_empty() {
            Vec::new()
        } else {
            self.search_lexical_with(query, cfg.k_lexical, cfg.bm25_k1, cfg.bm25_b)?
        };
        Ok(fuse_rrf(&dense, &lexical, cfg))
    }
}

/// Reciprocal rank fusion of two rank-sorted lists. Each distinct unit
/// scores `sum over lists containing it of 1 / (k_rrf + rank)`; the output
/// is sorted by score descending (ties by ascending unit_id) and truncated
/// to `k_final`.
pub fn fuse_rrf(
    vector_list: &[(String, f64)],
    lexical_list: &[(String, f64)],
    cfg: &RetrievalConfig,
) -> Vec<FusedHit> {
    let mut ranks: std::collections::BTreeMap<&str, (Option<u32>, Option<u32>)> =
        std::collections::BTreeMap::new();
    for (i, (id, _)) in vector_list.iter().enumerate() {
        ranks.entry(id).or_default().0 = Some(i as u32 + 1);
    }
    for (i, (id, _)) in lexical_list.iter().enumerate() {
        ranks.entry(id).or_default().1 = Some(i as u32 + 1);
    }
    let mut hits: Vec<FusedHit> = ranks
        .into_iter()
        .map(|(id, (v, l))| FusedHit::from_ranks(id.to_string(), v, l, cfg.k_rrf))
        .collect();
    hits.sort_by(|a, b| {
        b.rrf_score
            .partial_cmp(&a.rrf_score)
            .expect("rrf scores are finite")
            .then_with(|| a.unit_id.cmp(&b.unit_id))
    });
    hits.truncate(cfg.k_final);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::UnitSpan;
    use crate::embed::HashEmbedder;

    fn unit(id: &str, text: &str) -> Unit {
        Unit {
            unit_id: id.to_string(),
            kind: UnitKind::Row,
            sheet: "S".into(),
            span: UnitSpan::Cells {
                start_col: 1,
                start_row: 1,
                end_col: 1,
                end_row: 1,
            },
            text: text.to_string(),
            image_ref: None,
        }
    }

    fn small_index(texts: &[(&str, &str)]) -> HybridIndex {
        let embedder = HashEmbedder::default();
        let units: Vec<Unit> = texts.iter().map(|(id, t)| unit(id, t)).collect();
        let embeddings = units
            .iter()
            .map(|u| embedder.embed_text(&u.text).unwrap())
            .collect();
        build_index(units, embeddings).unwrap()
    }

    #[test]
    fn empty_index_answers_empty() {
        let idx = build_index(Vec::new(), Vec::new()).unwrap();
        let embedder = HashEmbedder::default();
        let hits = idx.retrieve("anything at all", &embedder, &RetrievalConfig::default()).unwrap();
        assert!(hits.is_empty());
        let q = embedder.embed_text("anything").unwrap();
        assert!(idx.search_dense(&q, 5).unwrap().is_empty());
    }

    #[test]
    fn unique_token_is_sole_lexical_hit() {
        let idx = small_index(&[
            ("a", "alpha beta gamma"),
            ("b", "delta epsilon zeta"),
            ("c", "eta theta iota"),
        ]);
        let hits = idx.search_lexical("epsilon", 10).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, "b");
        assert!(hits[0].1 > 0.0);
    }

    #[test]
    fn absent_terms_return_nothing() {
        let idx = small_index(&[("a", "alpha beta")]);
        assert!(idx.search_lexical("missing words", 10).unwrap().is_empty());
        assert!(matches!(
            idx.search_lexical("?!", 10),
            Err(IndexError::EmptyQuery)
        ));
    }

    #[test]
    fn dense_self_query_ranks_first() {
        let idx = small_index(&[
            ("a", "alpha beta gamma"),
            ("b", "delta epsilon zeta"),
            ("c", "eta theta iota"),
        ]);
        let embedder = HashEmbedder::default();
        let q = embedder.embed_text("delta epsilon zeta").unwrap();
        let hits = idx.search_dense(&q, 3).unwrap();
        assert_eq!(hits[0].0, "b");
        assert!((hits[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn k_larger_than_corpus_returns_everything_ranked() {
        let idx = small_index(&[("a", "one two"), ("b", "three four"), ("c", "five six")]);
        let embedder = HashEmbedder::default();
        let q = embedder.embed_text("one").unwrap();
        let hits = idx.search_dense(&q, 100).unwrap();
        assert_eq!(hits.len(), 3);
        for pair in hits.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn duplicate_unit_ids_rejected() {
        let embedder = HashEmbedder::default();
        let units = vec![unit("same", "one"), unit("same", "two")];
        let embeddings = units
            .iter()
            .map(|u| embedder.embed_text(&u.text).unwrap())
            .collect();
        assert!(matches!(
            build_index(units, embeddings),
            Err(IndexError::DuplicateUnitId(_))
        ));
    }

    #[test]
    fn query_dim_mismatch_rejected() {
        let idx = small_index(&[("a", "alpha")]);
        let other = HashEmbedder::new(64).unwrap();
        let q = other.embed_text("alpha").unwrap();
        assert!(matches!(
            idx.search_dense(&q, 1),
            Err(IndexError::DimMismatch { .. })
        ));
    }

    #[test]
    fn rrf_single_list_rank_one() {
        let cfg = RetrievalConfig::default();
        let hits = fuse_rrf(&[("a".into(), 0.9)], &[], &cfg);
        assert_eq!(hits.len(), 1);
        assert!((hits[0].rrf_score - 1.0 / 61.0).abs() < 1e-12);
        assert_eq!(hits[0].source, FusionSource::Vector);
        assert_eq!(format!("{:.4}", hits[0].rrf_score), "0.0164");
    }

    #[test]
    fn rrf_both_lists_rank_one() {
        let cfg = RetrievalConfig::default();
        let hits = fuse_rrf(&[("a".into(), 0.9)], &[("a".into(), 7.0)], &cfg);
        assert!((hits[0].rrf_score - 2.0 / 61.0).abs() < 1e-12);
        assert_eq!(hits[0].source, FusionSource::Both);
        assert_eq!(format!("{:.4}", hits[0].rrf_score), "0.0328");
    }

    #[test]
    fn rrf_worked_example() {
        let cfg = RetrievalConfig::default();
        let vec_list: Vec<(String, f64)> =
            [("A", 0.9), ("B", 0.8), ("C", 0.7)].map(|(s, v)| (s.to_string(), v)).into();
        let lex_list: Vec<(String, f64)> =
            [("B", 9.0), ("C", 8.0), ("D", 7.0)].map(|(s, v)| (s.to_string(), v)).into();
        let hits = fuse_rrf(&vec_list, &lex_list, &cfg);
        let ids: Vec<&str> = hits.iter().map(|h| h.unit_id.as_str()).collect();
        assert_eq!(ids, ["B", "C", "A", "D"]);
        let expected = [
            1.0 / 62.0 + 1.0 / 61.0,
            1.0 / 63.0 + 1.0 / 62.0,
            1.0 / 61.0,
            1.0 / 63.0,
        ];
        for (hit, want) in hits.iter().zip(expected) {
            assert!((hit.rrf_score - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rrf_scores_are_rank_based() {
        // Strictly monotone transforms of the raw scores leave fusion
        // untouched, because only positions enter the formula.
        let cfg = RetrievalConfig::default();
        let vec_list: Vec<(String, f64)> = (0..15)
            .map(|i| (format!("v{i}"), 1.0 - i as f64 * 0.05))
            .collect();
        let lex_list: Vec<(String, f64)> = (0..15)
            .map(|i| (format!("v{}", 14 - i), 30.0 - i as f64))
            .collect();
        let base = fuse_rrf(&vec_list, &lex_list, &cfg);
        let tv: Vec<(String, f64)> = vec_list
            .iter()
            .map(|(id, s)| (id.clone(), 2.0 * s + 1.0))
            .collect();
        let tl: Vec<(String, f64)> = lex_list
            .iter()
            .map(|(id, s)| (id.clone(), s.powi(3) + 7.0))
            .collect();
        assert_eq!(fuse_rrf(&tv, &tl, &cfg), base);
    }

    #[test]
    fn rrf_score_bounds_and_monotonicity() {
        let cfg = RetrievalConfig::default();
        let max = 2.0 / f64::from(cfg.k_rrf + 1);
        for v_rank in 1..=20u32 {
            for l_rank in 1..=20u32 {
                let hit = FusedHit::from_ranks("x".into(), Some(v_rank), Some(l_rank), cfg.k_rrf);
                assert!(hit.rrf_score > 0.0 && hit.rrf_score <= max);
                let better =
                    FusedHit::from_ranks("x".into(), Some(v_rank), Some(l_rank + 1), cfg.k_rrf);
                assert!(hit.rrf_score > better.rrf_score);
            }
        }
    }

    #[test]
    fn retrieve_finds_unique_token() {
        let idx = small_index(&[
            ("a", "alpha beta gamma"),
            ("b", "delta needle zeta"),
            ("c", "eta theta iota"),
        ]);
        let embedder = HashEmbedder::default();
        let hits = idx.retrieve("needle", &embedder, &RetrievalConfig::default()).unwrap();
        assert_eq!(hits[0].unit_id, "b");
    }

    #[test]
    fn retrieve_is_deterministic() {
        let texts: Vec<(String, String)> = (0..50)
            .map(|i| (format!("u{i:03}"), format!("token{} shared word {}", i % 7, i)))
            .collect();
        let borrowed: Vec<(&str, &str)> = texts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let idx = small_index(&borrowed);
        let embedder = HashEmbedder::default();
        let cfg = RetrievalConfig::default();
        let a = idx.retrieve("shared token3 word", &embedder, &cfg).unwrap();
        let b = idx.retrieve("shared token3 word", &embedder, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
