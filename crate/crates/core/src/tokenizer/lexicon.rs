//! Trie of canonical word segmentations.
//!
//! A generated token sequence only survives `encode(decode(tokens))` when each
//! word it spells is segmented the way the tokenizer itself would segment it.
//! The embedder restricts its choices to paths through this trie so every
//! finished word is canonical.

use std::collections::BTreeMap;

use super::{BpeModel, Granularity, TokenId};

pub type LexiconNode = usize;

#[derive(Clone, Debug, Default)]
struct Node {
    children: BTreeMap<TokenId, LexiconNode>,
    terminal: bool,
    /// Fewest further tokens needed to finish a word from here.
    min_finish: u32,
}

#[derive(Clone, Debug)]
pub struct Lexicon {
    nodes: Vec<Node>,
    words: usize,
}

impl Lexicon {
    pub const ROOT: LexiconNode = 0;

    /// Lexicon of the given words, keeping only those that encode without
    /// `<unk>` and decode back to themselves.
    pub fn from_words<'a, I>(model: &BpeModel, words: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut lexicon = Self {
            nodes: vec![Node::default()],
            words: 0,
        };
        for word in words {
            let Ok(pieces) = model.encode(word) else {
                continue;
            };
            if pieces.is_empty() || pieces.iter().any(|&id| model.is_special(id)) {
                continue;
            }
            if model.decode(&pieces).ok().as_deref() != Some(word) {
                continue;
            }
            lexicon.insert(&pieces);
        }
        lexicon.finish();
        lexicon
    }

    /// Every whitespace-separated word of the corpus.
    pub fn from_corpus<S: AsRef<str>>(model: &BpeModel, corpus: &[S]) -> Self {
        let mut words: Vec<&str> = corpus
            .iter()
            .flat_map(|l| l.as_ref().split_whitespace())
            .collect();
        words.sort_unstable();
        words.dedup();
        Self::from_words(model, words)
    }

    /// Words that are a single vocabulary token.
    pub fn from_vocab(model: &BpeModel) -> Self {
        let words = (0..model.vocab_size() as TokenId)
            .filter(|&id| !model.is_special(id) && !model.is_continuation(id))
            .filter_map(|id| model.token(id))
            .filter(|t| model.granularity() == Granularity::Word || !t.ends_with(model.marker()));
        Self::from_words(model, words)
    }

    fn insert(&mut self, pieces: &[TokenId]) {
        let mut node = Self::ROOT;
        for &piece in pieces {
            let next = self.nodes.len();
            node = *self.nodes[node].children.entry(piece).or_insert(next);
            if node == next {
                self.nodes.push(Node::default());
            }
        }
        if !self.nodes[node].terminal {
            self.nodes[node].terminal = true;
            self.words += 1;
        }
    }

    fn finish(&mut self) {
        // Children are always created after their parent, so a reverse sweep
        // sees every child before its parent.
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let min = if node.terminal {
                0
            } else {
                node.children
                    .values()
                    .map(|&c| self.nodes[c].min_finish.saturating_add(1))
                    .min()
                    .unwrap_or(u32::MAX)
            };
            self.nodes[i].min_finish = min;
        }
    }

    pub fn word_count(&self) -> usize {
        self.words
    }

    pub fn is_empty(&self) -> bool {
        self.words == 0
    }

    pub fn step(&self, node: LexiconNode, token: TokenId) -> Option<LexiconNode> {
        self.nodes[node].children.get(&token).copied()
    }

    pub fn children(&self, node: LexiconNode) -> impl Iterator<Item = (TokenId, LexiconNode)> + '_ {
        self.nodes[node].children.iter().map(|(&t, &n)| (t, n))
    }

    pub fn is_terminal(&self, node: LexiconNode) -> bool {
        self.nodes[node].terminal
    }

    pub fn min_finish(&self, node: LexiconNode) -> u32 {
        self.nodes[node].min_finish
    }

    /// True when `token` alone spells a lexicon word.
    pub fn is_single_token_word(&self, token: TokenId) -> bool {
        self.step(Self::ROOT, token)
            .is_some_and(|n| self.is_terminal(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trie_tracks_completion_depth() {
        let corpus = ["low lower newest widest"; 3];
        let model = BpeModel::train(&corpus, 6).unwrap();
        let lex = Lexicon::from_corpus(&model, &corpus);
        assert_eq!(lex.word_count(), 4);
        for word in ["low", "lower", "newest", "widest"] {
            let pieces = model.encode(word).unwrap();
            let mut node = Lexicon::ROOT;
            for (i, &p) in pieces.iter().enumerate() {
                assert!(lex.min_finish(node) as usize <= pieces.len() - i);
                node = lex.step(node, p).unwrap();
            }
            assert!(lex.is_terminal(node));
        }
    }

    #[test]
    fn vocab_lexicon_contains_only_self_encoding_tokens() {
        let corpus = ["low lower newest widest"; 3];
        let model = BpeModel::train(&corpus, 10).unwrap();
        let lex = Lexicon::from_vocab(&model);
        for (token, _) in lex.children(Lexicon::ROOT) {
            let surface = model.token(token).unwrap();
            assert_eq!(model.encode(surface).unwrap(), vec![token]);
        }
        assert!(!lex.is_empty());
    }
}
