use serde::{Deserialize, Serialize};

/// Character-based chunking parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            size: 1000,
            overlap: 200,
        }
    }
}

/// A chunk with its character span `[start, end)` in the source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits `text` into chunks of at most `cfg.size` characters whose
/// consecutive overlap is at most `cfg.overlap` characters.
///
/// Cuts land just after a whitespace character when one exists past the
/// overlap region; otherwise the chunk is cut at full size. Continuations start
/// at a word boundary inside the overlap window when possible. Dropping the
/// overlap prefix of every chunk after the first and concatenating reproduces
/// `text` exactly.
///
/// # Panics
///
/// If `cfg.size == 0` or `cfg.overlap >= cfg.size`.
pub fn chunk_text(text: &str, cfg: ChunkConfig) -> Vec<Chunk> {
    assert!(cfg.size > 0 && cfg.overlap < cfg.size, "invalid chunk config {cfg:?}");
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let hard_end = (start + cfg.size).min(n);
        let end = if hard_end == n {
            n
        } else {
            // Last whitespace strictly beyond the overlap region.
            (start + cfg.overlap + 1..hard_end)
                .rev()
                .find(|&i| chars[i - 1].is_whitespace())
                .unwrap_or(hard_end)
        };
        chunks.push(Chunk {
            text: chars[start..end].iter().collect(),
            start,
            end,
        });
        if end == n {
            break;
        }
        let mut next = end - cfg.overlap;
        while next < end && next > 0 && !chars[next - 1].is_whitespace() {
            next += 1;
        }
        start = next;
    }
    chunks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reconstruct(chunks: &[Chunk]) -> String {
        let mut out = String::new();
        let mut covered: usize = 0;
        for c in chunks {
            out.extend(c.text.chars().skip(covered.saturating_sub(c.start)));
            covered = c.end;
        }
        out
    }

    #[test]
    fn short_text_is_one_chunk() {
        let chunks = chunk_text("platinum-sensitive relapse", ChunkConfig::default());
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, "platinum-sensitive relapse");
    }

    #[test]
    fn two_and_a_half_sizes_without_overlap_is_three_chunks() {
        let text = "x".repeat(2500);
        let chunks = chunk_text(&text, ChunkConfig { size: 1000, overlap: 0 });
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[2].text.len(), 500);
    }

    #[test]
    fn empty_text_has_no_chunks() {
        assert!(chunk_text("", ChunkConfig::default()).is_empty());
    }

    #[test]
    fn cuts_prefer_whitespace() {
        let text = "alpha beta gamma delta epsilon";
        let chunks = chunk_text(text, ChunkConfig { size: 12, overlap: 0 });
        assert_eq!(chunks[0].text, "alpha beta ");
        assert_eq!(reconstruct(&chunks), text);
    }

    proptest! {
        #[test]
        fn chunks_reconstruct_text(
            words in proptest::collection::vec("[a-zé]{1,15}", 0..200),
            size in 5usize..120,
            overlap_frac in 0.0f64..0.9,
        ) {
            let text = words.join(" ");
            let overlap = ((size as f64) * overlap_frac) as usize;
            let cfg = ChunkConfig { size, overlap: overlap.min(size - 1) };
            let chunks = chunk_text(&text, cfg);
            for c in &chunks {
                prop_assert!(c.end - c.start <= cfg.size);
                prop_assert!(c.end > c.start);
            }
            for w in chunks.windows(2) {
                prop_assert!(w[1].start > w[0].start);
                prop_assert!(w[0].end >= w[1].start);
                prop_assert!(w[0].end - w[1].start <= cfg.overlap);
            }
            prop_assert_eq!(reconstruct(&chunks), text);
        }
    }
}
