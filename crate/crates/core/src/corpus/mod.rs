//! Research-article corpus: chunking, embeddings and top-k cosine retrieval.

mod chunk;
mod embed;
mod index;
mod manifest;

pub use chunk::{chunk_text, CharRange, ChunkConfig, ChunkError};
pub use embed::{
    cosine_similarity, embed_texts, EmbedError, Embedder, EmbeddingVector, HashEmbedder,
    SimilarityError, WireEmbedder,
};
pub use index::{
    BibEntry, Chunk, CorpusDocument, CorpusIndex, IndexError, IndexRetriever, OwnedRetriever, RetrievalHit,
    Retriever,
};
pub use manifest::{load_manifest, ManifestError};
