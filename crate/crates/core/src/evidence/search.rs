use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{cosine, embed, CorpusSnapshot, EmbedError, Embedder, EvidenceQuery, EvidenceTier};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub entry_id: String,
    pub similarity: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("query embedder {query} does not match snapshot embedder {snapshot}")]
    EmbedderMismatch { query: String, snapshot: String },
    #[error("query vector has dimension {got}, snapshot dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

fn rank_order(a: &SearchHit, b: &SearchHit) -> Ordering {
    b.similarity
        .partial_cmp(&a.similarity)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.entry_id.cmp(&b.entry_id))
}

/// Top-`k` entries by cosine similarity, ties broken by ascending entry id.
pub fn search_vector(
    snapshot: &CorpusSnapshot,
    vector: &[f32],
    k: usize,
    tiers: Option<&[EvidenceTier]>,
) -> Result<Vec<SearchHit>, SearchError> {
    if vector.len() != snapshot.dimension() {
        return Err(SearchError::DimensionMismatch {
            expected: snapshot.dimension(),
            got: vector.len(),
        });
    }
    let mut hits: Vec<SearchHit> = snapshot
        .entries()
        .iter()
        .filter(|e| tiers.is_none_or(|t| t.contains(&e.tier)))
        .map(|e| SearchHit {
            entry_id: e.entry_id.clone(),
            similarity: cosine(vector, &e.embedding),
        })
        .collect();
    if k < hits.len() {
        hits.select_nth_unstable_by(k, rank_order);
        hits.truncate(k);
    }
    hits.sort_by(rank_order);
    Ok(hits)
}

pub fn search_filtered(
    snapshot: &CorpusSnapshot,
    query: &EvidenceQuery,
    embedder: &dyn Embedder,
    k: usize,
    tiers: Option<&[EvidenceTier]>,
) -> Result<Vec<SearchHit>, SearchError> {
    if embedder.embedder_id() != snapshot.embedder_id() {
        return Err(SearchError::EmbedderMismatch {
            query: embedder.embedder_id().to_string(),
            snapshot: snapshot.embedder_id().to_string(),
        });
    }
    let text = query.render();
    let vector = embed(&[text.as_str()], embedder)?.remove(0);
    search_vector(snapshot, &vector, k, tiers)
}

pub fn search(
    snapshot: &CorpusSnapshot,
    query: &EvidenceQuery,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<SearchHit>, SearchError> {
    search_filtered(snapshot, query, embedder, k, None)
}

/// Reference ranking: full sort of every entry by (similarity desc, id asc).
pub fn brute_force_rank(snapshot: &CorpusSnapshot, vector: &[f32]) -> Vec<SearchHit> {
    let mut all: Vec<SearchHit> = snapshot
        .entries()
        .iter()
        .map(|e| SearchHit {
            entry_id: e.entry_id.clone(),
            similarity: e.embedding.iter().zip(vector).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum(),
        })
        .collect();
    all.sort_by(rank_order);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{
        build_entries, dedup_normalize, embed_entries, freeze_snapshot, ChunkConfig, EvidenceRecord, EvidenceStream,
        TokenHashEmbedder,
    };
    use proptest::prelude::*;

    fn snapshot(texts: &[String]) -> CorpusSnapshot {
        let records = dedup_normalize(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| EvidenceRecord {
                    stream: EvidenceStream::Literature,
                    title: format!("doc {i}"),
                    pmid: None,
                    text: t.clone(),
                    meta: None,
                    tier: None,
                })
                .collect(),
        );
        let e = TokenHashEmbedder::new(32);
        let mut entries = build_entries(&records, ChunkConfig::default());
        embed_entries(&mut entries, &e).unwrap();
        freeze_snapshot(entries, e.embedder_id(), 32, "test").unwrap()
    }

    #[test]
    fn embedder_mismatch_rejected() {
        let snap = snapshot(&["platinum resistant relapse".into()]);
        let q = EvidenceQuery {
            disease_context: vec!["x".into()],
            scene: "y".into(),
            prior_treatments: vec![],
            free_terms: vec![],
        };
        let err = search(&snap, &q, &TokenHashEmbedder::new(64), 3).unwrap_err();
        assert!(matches!(err, SearchError::EmbedderMismatch { .. }));
    }

    #[test]
    fn best_match_first() {
        let snap = snapshot(&[
            "weekly paclitaxel platinum resistant".into(),
            "olaparib maintenance after response".into(),
            "germ cell tumour bleomycin".into(),
        ]);
        let e = TokenHashEmbedder::new(32);
        let v = embed(&["olaparib maintenance"], &e).unwrap().remove(0);
        let hits = search_vector(&snap, &v, 1, None).unwrap();
        let top = snap.entry(&hits[0].entry_id).unwrap();
        assert!(top.chunk_text.contains("olaparib"));
    }

    proptest! {
        #[test]
        fn top_k_is_prefix_of_brute_force(
            docs in proptest::collection::vec("[a-e]{1,2}( [a-e]{1,2}){0,6}", 1..30),
            q in "[a-e]{1,2}( [a-e]{1,2}){0,4}",
            k in 1usize..12,
        ) {
            let snap = snapshot(&docs);
            let e = TokenHashEmbedder::new(32);
            let v = embed(&[q.as_str()], &e).unwrap().remove(0);
            let fast = search_vector(&snap, &v, k, None).unwrap();
            let full = brute_force_rank(&snap, &v);
            prop_assert_eq!(&fast[..], &full[..k.min(full.len())]);
        }
    }
}
