//! Unicode text helpers shared by scoring and classification.

use icu_normalizer::ComposingNormalizer;

/// Normalizes text to Unicode NFC. Cache keys and classifier premises are
/// compared byte-for-byte after this normalization and nothing else.
pub fn nfc(text: &str) -> String {
    ComposingNormalizer::new_nfc().normalize(text).into_owned()
}

/// Lowercased whitespace-separated token set, the basis of the mock scorer's
/// Jaccard similarity.
pub fn token_set(text: &str) -> std::collections::BTreeSet<String> {
    text.split_whitespace()
        .map(|t| t.to_lowercase())
        .collect()
}
