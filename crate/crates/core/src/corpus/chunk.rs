use thiserror::Error;

/// Half-open range of character (not byte) offsets into a document body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> CharRange {
        CharRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Slices `text` by character offsets.
    pub fn slice<'t>(&self, text: &'t str) -> &'t str {
        let mut idx = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let start = idx.nth(self.start).unwrap_or(text.len());
        let end = if self.end > self.start {
            idx.nth(self.end - self.start - 1).unwrap_or(text.len())
        } else {
            start
        };
        &text[start..end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub target_size: usize,
    pub overlap: usize,
    /// How far (in chars, either side) to look for a paragraph break near the nominal end.
    pub paragraph_window: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            target_size: 1000,
            overlap: 200,
            paragraph_window: 100,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("overlap ({overlap}) must be smaller than target size ({target_size})")]
    OverlapTooLarge { overlap: usize, target_size: usize },
}

/// Splits `text` into overlapping character ranges.
///
/// Each chunk nominally spans `target_size` chars and the next one starts
/// `overlap` chars before the previous end. When a paragraph break (blank
/// line) lies within `paragraph_window` of the nominal end, the chunk ends
/// there instead.
pub fn chunk_text(text: &str, config: &ChunkConfig) -> Result<Vec<CharRange>, ChunkError> {
    let ChunkConfig {
        target_size,
        overlap,
        paragraph_window,
    } = *config;
    if overlap >= target_size {
        return Err(ChunkError::OverlapTooLarge {
            overlap,
            target_size,
        });
    }
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let mut out = Vec::new();
    if len == 0 {
        return Ok(out);
    }
    let is_break = |p: usize| p >= 2 && p < len && chars[p - 2] == '\n' && chars[p - 1] == '\n';

    let mut start = 0;
    loop {
        if len - start <= target_size {
            out.push(CharRange::new(start, len));
            break;
        }
        let nominal = start + target_size;
        // The next chunk must start after this one does.
        let lo = nominal.saturating_sub(paragraph_window).max(start + overlap + 1);
        let hi = (nominal + paragraph_window).min(len - 1);
        let mut end = nominal;
        let mut best: Option<usize> = None;
        for p in lo..=hi {
            if is_break(p) {
                let d = p.abs_diff(nominal);
                if best.is_none_or(|b| d < b.abs_diff(nominal)) {
                    best = Some(p);
                }
            }
        }
        if let Some(p) = best {
            end = p;
        }
        out.push(CharRange::new(start, end));
        start = end - overlap;
    }
    Ok(out)
}
