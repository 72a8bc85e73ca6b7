use std::collections::{BTreeMap, HashMap};

use super::{PAD_ID, UNK_ID};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Token table with `PAD` at 0 and `UNK` at 1; other ids ordered by
/// (frequency descending, token ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// `max_vocab` caps the total size including the two reserved entries.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
        max_vocab: Option<usize>,
    ) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for tok in tokenize(t) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_freq.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(cap) = max_vocab {
            ranked.truncate(cap.saturating_sub(2));
        }
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    /// Rebuilds a vocabulary from its regular tokens in id order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens);
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens: all, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Regular tokens (without the reserved pair), in id order.
    pub fn regular_tokens(&self) -> &[String] {
        &self.tokens[2..]
    }

    /// Token ids truncated to `max_len`; text without tokens encodes as `[PAD]`.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = tokenize(text).iter().map(|t| self.id(t)).collect();
        ids.truncate(max_len.max(1));
        if ids.is_empty() {
            ids.push(PAD_ID);
        }
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_lowercases_and_splits_punctuation() {
        assert_eq!(
            tokenize("Hello, World!  it's"),
            vec!["hello", "world", "it", "s"]
        );
        assert!(tokenize("  ...").is_empty());
    }

    #[test]
    fn small_corpus_ids() {
        let v = Vocab::build(["a b", "a"], 1, None);
        assert_eq!(v.len(), 4);
        assert_eq!((v.id("a"), v.id("b")), (2, 3));
        assert_eq!(v.encode("a b", 100), vec![2, 3]);
        let v2 = Vocab::build(["a b", "a"], 2, None);
        assert_eq!(v2.encode("a b", 100), vec![2, UNK_ID]);
        assert_eq!(v.encode("", 100), vec![PAD_ID]);
    }

    #[test]
    fn ordering_ties_and_caps() {
        let v = Vocab::build(["c b a", "b c", "d"], 1, None);
        assert_eq!(v.regular_tokens(), ["b", "c", "a", "d"]);
        let capped = Vocab::build(["c b a", "b c", "d"], 1, Some(4));
        assert_eq!(capped.regular_tokens(), ["b", "c"]);
        assert_eq!(capped.encode("a b c d", 3), vec![UNK_ID, 2, 3]);
        assert_eq!(Vocab::from_tokens(v.regular_tokens().to_vec()), v);
    }

    proptest! {
        #[test]
        fn encoding_is_deterministic_and_injective(words in proptest::collection::vec("[a-z]{1,4}", 1..12)) {
            let text = words.join(" ");
            let v = Vocab::build([text.as_str()], 1, None);
            let ids = v.encode(&text, 64);
            prop_assert_eq!(&ids, &v.encode(&text, 64));
            let back: Vec<&str> = ids.iter().map(|&i| v.token(i).unwrap()).collect();
            prop_assert_eq!(back, words.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }
}
