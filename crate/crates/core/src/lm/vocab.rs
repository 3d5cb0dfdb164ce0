use std::collections::HashMap;

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const BOS_TOKEN: &str = "<s>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_ID: TokenId = 0;
pub const UNK_ID: TokenId = 1;

/// Dense token-id mapping. Ids follow insertion order; ids 0 and 1 are
/// always the begin-of-sequence and unknown tokens.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Builds a vocabulary from the non-reserved tokens, in order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        vocab.push(BOS_TOKEN.to_string())?;
        vocab.push(UNK_TOKEN.to_string())?;
        for t in tokens {
            vocab.push(t.into())?;
        }
        Ok(vocab)
    }

    fn push(&mut self, token: String) -> Result<()> {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "token {token:?} is empty or contains whitespace"
            )));
        }
        if self.index.contains_key(&token) {
            return Err(Error::InvalidArgument(format!("duplicate token {token:?}")));
        }
        let id = TokenId::try_from(self.tokens.len())
            .map_err(|_| Error::InvalidArgument("vocabulary too large".into()))?;
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        Ok(())
    }

    /// Keeps the `max_size - 2` most frequent tokens (ties broken
    /// lexicographically) after the two reserved ids.
    pub fn build<I, D, S>(corpus: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "max_size must be at least 2, got {max_size}"
            )));
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        let mut saw_token = false;
        for doc in corpus {
            for tok in doc {
                let tok = tok.as_ref();
                saw_token = true;
                if tok == BOS_TOKEN || tok == UNK_TOKEN {
                    continue;
                }
                *freq.entry(tok.to_string()).or_default() += 1;
            }
        }
        if !saw_token {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - 2);
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// All tokens in id order, reserved ones included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }

    /// Maps ids back to token strings; out-of-range ids render as the
    /// unknown token.
    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN))
            .collect()
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        (id as usize) < self.tokens.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frequency counts by brute force, then sorted by (-count, token).
    fn oracle(corpus: &[Vec<&str>], max_size: usize) -> Vec<String> {
        let mut distinct: Vec<&str> = corpus.iter().flatten().copied().collect();
        distinct.sort();
        distinct.dedup();
        let mut ranked: Vec<(usize, &str)> = distinct
            .iter()
            .map(|t| (corpus.iter().flatten().filter(|x| *x == t).count(), *t))
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        let mut out = vec![BOS_TOKEN.to_string(), UNK_TOKEN.to_string()];
        out.extend(ranked.into_iter().take(max_size - 2).map(|(_, t)| t.to_string()));
        out
    }

    #[test]
    fn frequency_order() {
        let corpus = vec![vec!["a", "b"], vec!["a"]];
        let v = Vocabulary::build(&corpus, 10).unwrap();
        assert_eq!(v.tokens(), &["<s>", "<unk>", "a", "b"]);
        assert_eq!(v.id("a"), Some(2));
        assert_eq!(v.id("b"), Some(3));
    }

    #[test]
    fn lexicographic_tie_break_and_unk() {
        let corpus = vec![vec!["y"], vec!["x"]];
        let v = Vocabulary::build(&corpus, 3).unwrap();
        assert_eq!(v.tokens().to_vec(), oracle(&corpus, 3));
        assert_eq!(v.tokens(), &["<s>", "<unk>", "x"]);
        assert_eq!(v.id_or_unk("y"), UNK_ID);
    }

    #[test]
    fn matches_brute_force_on_mixed_corpus() {
        let corpus = vec![
            vec!["the", "cat", "sat", "on", "the", "mat"],
            vec!["a", "cat", "and", "a", "dog"],
            vec!["zebra", "the"],
        ];
        for max in 2..12 {
            let v = Vocabulary::build(&corpus, max).unwrap();
            assert_eq!(v.tokens().to_vec(), oracle(&corpus, max), "max_size {max}");
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: Vec<Vec<&str>> = vec![];
        assert!(matches!(Vocabulary::build(&corpus, 10), Err(Error::EmptyCorpus)));
        let corpus: Vec<Vec<&str>> = vec![vec![], vec![]];
        assert!(matches!(Vocabulary::build(&corpus, 10), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn max_size_below_two_rejected() {
        let corpus = vec![vec!["a"]];
        assert!(Vocabulary::build(&corpus, 1).is_err());
    }

    #[test]
    fn rejects_duplicates() {
        assert!(Vocabulary::from_tokens(["a", "a"]).is_err());
        assert!(Vocabulary::from_tokens(["<s>"]).is_err());
        assert!(Vocabulary::from_tokens(["a b"]).is_err());
    }
}
