//! Tokenizer shared by indexing, search and the bigram queries.

/// Lowercases, splits on every non-alphanumeric character and drops tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

/// An ordered pair of adjacent tokens.
pub type Bigram = (String, String);

/// Adjacent token pairs of `text`, in order, repeats included.
pub fn bigrams(text: &str) -> Vec<Bigram> {
    let tokens = tokenize(text);
    tokens.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
}
