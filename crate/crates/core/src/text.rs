//! Word-level tokenization shared by training, prompting and scoring.

/// Lowercases, splits on whitespace, and emits every ASCII/Unicode
/// punctuation character as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch.is_ascii_punctuation() || (!ch.is_alphanumeric() && !ch.is_ascii()) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.extend(ch.to_lowercase().map(String::from));
            } else {
                cur.extend(ch.to_lowercase());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}
