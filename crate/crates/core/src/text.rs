//! Tokenization shared by BM25, keyword matching and the hashing embedder.

/// Identifies the tokenizer behavior in persisted manifests.
pub const TOKENIZER_VERSION: &str = "lower-alnum-v1";

/// Lowercases and splits on runs of non-alphanumeric characters. No
/// stemming and no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(tokenize("Cardiac-MRI, (3D) seg."), ["cardiac", "mri", "3d", "seg"]);
        assert!(tokenize("  ,;  ").is_empty());
        assert_eq!(tokenize("Ünïcode ÄBC"), ["ünïcode", "äbc"]);
    }
}
