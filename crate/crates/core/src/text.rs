//! Token normalization shared by the lexicon, the generator and both screeners.

/// Lowercases, strips punctuation and splits on whitespace.
///
/// Punctuation is removed rather than treated as a separator, so `"fp&a"`
/// becomes the single token `"fpa"`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let token = normalize_token(piece);
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

/// Normalizes one whitespace-free piece of text. May return an empty string.
pub fn normalize_token(piece: &str) -> String {
    piece
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// True if `token` is already in normalized form and non-empty.
pub fn is_normalized(token: &str) -> bool {
    !token.is_empty() && normalize_token(token) == token
}
