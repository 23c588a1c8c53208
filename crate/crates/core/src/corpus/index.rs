use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::io::{self, BufRead};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chunk::{chunk_text, CharRange, ChunkConfig, ChunkError};
use super::embed::{cosine_similarity, embed_texts, EmbedError, Embedder, EmbeddingVector};
use crate::fsutil;

/// Bibliography entry of a corpus document, used for reference checking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub title: String,
    #[serde(default)]
    pub year: Option<i32>,
}

/// A research article supplied by the lesson designer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    pub year: Option<i32>,
    /// Plain-text article body. Not stored in index snapshots.
    #[serde(skip)]
    pub body: String,
    #[serde(default)]
    pub bibliography: Vec<BibEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub ordinal: usize,
    pub char_range: CharRange,
    pub text: String,
    pub embedding: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub doc_id: String,
    pub ordinal: usize,
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("document id {0:?} already present")]
    DuplicateDocument(String),
    #[error("document title must not be empty (id {0:?})")]
    EmptyTitle(String),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("index uses embedder {index:?} but {requested:?} was supplied")]
    EmbedderMismatch { index: String, requested: String },
    #[error("index is empty")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// In-memory chunk index with exhaustive cosine retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    embedder_id: String,
    dims: usize,
    documents: Vec<CorpusDocument>,
    chunks: Vec<Chunk>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    embedder: String,
    dims: usize,
    documents: Vec<CorpusDocument>,
    chunks: usize,
}

const SNAPSHOT_FORMAT: &str = "lessonforge-index";

/// Ordering used for hits: score descending, then (doc_id, ordinal) ascending.
/// `Less` means "ranks first".
fn rank_order(a: (&f64, &str, usize), b: (&f64, &str, usize)) -> Ordering {
    b.0.total_cmp(a.0)
        .then_with(|| a.1.cmp(b.1))
        .then_with(|| a.2.cmp(&b.2))
}

struct Ranked<'a> {
    score: f64,
    chunk: &'a Chunk,
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked<'_> {}
impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked<'_> {
    // Max-heap top = worst-ranked candidate.
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(
            (&self.score, &self.chunk.doc_id, self.chunk.ordinal),
            (&other.score, &other.chunk.doc_id, other.chunk.ordinal),
        )
    }
}

impl CorpusIndex {
    pub fn new(embedder_id: impl Into<String>, dims: usize) -> CorpusIndex {
        CorpusIndex {
            embedder_id: embedder_id.into(),
            dims,
            documents: Vec::new(),
            chunks: Vec::new(),
        }
    }

    pub fn for_embedder(embedder: &dyn Embedder) -> CorpusIndex {
        CorpusIndex::new(embedder.id(), embedder.dims())
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn documents(&self) -> &[CorpusDocument] {
        &self.documents
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    fn check_embedder(&self, embedder: &dyn Embedder) -> Result<(), IndexError> {
        if embedder.id() != self.embedder_id {
            return Err(IndexError::EmbedderMismatch {
                index: self.embedder_id.clone(),
                requested: embedder.id(),
            });
        }
        Ok(())
    }

    /// Chunks, embeds and adds a document. Returns the number of chunks added.
    pub fn ingest(
        &mut self,
        doc: CorpusDocument,
        embedder: &dyn Embedder,
        config: &ChunkConfig,
    ) -> Result<usize, IndexError> {
        self.check_embedder(embedder)?;
        if doc.title.trim().is_empty() {
            return Err(IndexError::EmptyTitle(doc.id));
        }
        if self.documents.iter().any(|d| d.id == doc.id) {
            return Err(IndexError::DuplicateDocument(doc.id));
        }
        let ranges = chunk_text(&doc.body, config)?;
        let texts: Vec<String> = ranges.iter().map(|r| r.slice(&doc.body).to_owned()).collect();
        let vectors = embed_texts(&texts, embedder)?;
        let added = texts.len();
        for (ordinal, ((range, text), v)) in ranges.into_iter().zip(texts).zip(vectors).enumerate() {
            self.chunks.push(Chunk {
                doc_id: doc.id.clone(),
                ordinal,
                char_range: range,
                text,
                embedding: Some(v),
            });
        }
        self.documents.push(doc);
        Ok(added)
    }

    /// Adds a pre-embedded chunk. Intended for tests and snapshot loading.
    pub fn push_chunk(&mut self, chunk: Chunk) -> Result<(), IndexError> {
        if let Some(v) = &chunk.embedding {
            if v.dims() != self.dims {
                return Err(EmbedError::DimsMismatch {
                    expected: self.dims,
                    found: v.dims(),
                }
                .into());
            }
        }
        self.chunks.push(chunk);
        Ok(())
    }

    /// Top-`k` chunks by cosine similarity to `query`, exhaustive scan.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.chunks.is_empty() {
            return Err(IndexError::Empty);
        }
        if query.dims() != self.dims {
            return Err(EmbedError::DimsMismatch {
                expected: self.dims,
                found: query.dims(),
            }
            .into());
        }
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        for chunk in &self.chunks {
            let Some(v) = &chunk.embedding else { continue };
            // Zero vectors have no direction; they never match.
            let Ok(score) = cosine_similarity(query.values(), v.values()) else {
                continue;
            };
            let cand = Ranked { score, chunk };
            if heap.len() < k {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| RetrievalHit {
                doc_id: r.chunk.doc_id.clone(),
                ordinal: r.chunk.ordinal,
                score: r.score,
                text: r.chunk.text.clone(),
            })
            .collect())
    }

    /// Embeds `query_text` and returns its top-`k` chunks.
    pub fn retrieve(
        &self,
        query_text: &str,
        k: usize,
        embedder: &dyn Embedder,
    ) -> Result<Vec<RetrievalHit>, IndexError> {
        if self.chunks.is_empty() {
            return Err(IndexError::Empty);
        }
        self.check_embedder(embedder)?;
        let q = embed_texts(&[query_text.to_owned()], embedder)?
            .pop()
            .expect("one vector per input");
        self.search(&q, k)
    }

    /// Writes the snapshot atomically: a header line followed by one JSON line per chunk.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.into(),
            version: 1,
            embedder: self.embedder_id.clone(),
            dims: self.dims,
            documents: self.documents.clone(),
            chunks: self.chunks.len(),
        };
        fsutil::write_atomic_with(path, |w| {
            writeln!(w, "{}", crate::canonical::to_canonical_compact(&header)?)?;
            for c in &self.chunks {
                writeln!(w, "{}", crate::canonical::to_canonical_compact(c)?)?;
            }
            Ok(())
        })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CorpusIndex, IndexError> {
        let file = std::fs::File::open(path)?;
        let mut lines = io::BufReader::new(file).lines();
        let bad = |m: String| IndexError::Snapshot(m);
        let first = lines.next().ok_or_else(|| bad("empty snapshot".into()))??;
        let header: SnapshotHeader =
            serde_json::from_str(&first).map_err(|e| bad(format!("header: {e}")))?;
        if header.format != SNAPSHOT_FORMAT || header.version != 1 {
            return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
        }
        let mut index = CorpusIndex::new(header.embedder, header.dims);
        index.documents = header.documents;
        for (n, line) in lines.enumerate() {
            let line = line?;
            let chunk: Chunk =
                serde_json::from_str(&line).map_err(|e| bad(format!("chunk {n}: {e}")))?;
            index.push_chunk(chunk)?;
        }
        if index.chunks.len() != header.chunks {
            return Err(bad(format!(
                "header declares {} chunks, found {}",
                header.chunks,
                index.chunks.len()
            )));
        }
        Ok(index)
    }

    /// Distinct document ids, sorted.
    pub fn document_ids(&self) -> BTreeSet<&str> {
        self.documents.iter().map(|d| d.id.as_str()).collect()
    }
}

/// Anything that can ground a prompt with corpus excerpts.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RetrievalHit>, IndexError>;
}

/// Pairs an index with the embedder it was built with.
pub struct IndexRetriever<'a> {
    pub index: &'a CorpusIndex,
    pub embedder: &'a dyn Embedder,
}

impl Retriever for IndexRetriever<'_> {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        self.index.retrieve(query, k, self.embedder)
    }
}

/// Owning counterpart of [`IndexRetriever`], for long-lived services.
pub struct OwnedRetriever {
    pub index: CorpusIndex,
    pub embedder: Box<dyn Embedder>,
}

impl Retriever for OwnedRetriever {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        self.index.retrieve(query, k, self.embedder.as_ref())
    }
}
