//! Add-k smoothed n-gram model with backoff on unseen histories.
//!
//! For a history `h` of length `n - 1` (padded with a start symbol at the
//! beginning of a sequence) the estimate is
//! `P(w | h) = (c(h, w) + k) / (c(h) + k * m)`. If `h` was never observed the
//! model retries with the history shortened by one token, down to the
//! unigram estimate. Every sequence ends with an `<eos>` event.
//!
//! The model is unconditional: [`GenerationContext::source`] is ignored. It
//! exists so the codec can run end to end without an external translation
//! model.

use std::collections::HashMap;

use super::{Distribution, GenerationContext, LmError, Provider};
use crate::tokenizer::{BpeModel, TokenId, EOS_ID};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_SMOOTHING: f64 = 0.1;
const MAX_ORDER: usize = 5;
/// History padding before the first token. Never a real token id.
const START: TokenId = TokenId::MAX;

#[derive(Clone, Debug, Default, PartialEq)]
struct Successors {
    total: u64,
    counts: Vec<(TokenId, u64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    order: usize,
    smoothing: f64,
    vocab_size: usize,
    /// `tables[h]` maps histories of length `h` to successor counts.
    tables: Vec<HashMap<Vec<TokenId>, Successors>>,
}

impl NgramModel {
    /// Model with no counts: every distribution is uniform.
    pub fn untrained(vocab_size: usize, order: usize, smoothing: f64) -> Result<Self, LmError> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(LmError::InvalidOrder(order));
        }
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(LmError::InvalidSmoothing(smoothing));
        }
        Ok(Self {
            order,
            smoothing,
            vocab_size,
            tables: vec![HashMap::new(); order],
        })
    }

    /// Trains on token sequences; an `<eos>` event is appended to each.
    pub fn train(
        sequences: &[Vec<TokenId>],
        vocab_size: usize,
        order: usize,
        smoothing: f64,
    ) -> Result<Self, LmError> {
        let mut model = Self::untrained(vocab_size, order, smoothing)?;
        if sequences.iter().all(Vec::is_empty) {
            return Err(LmError::EmptyCorpus);
        }
        let mut raw: Vec<HashMap<Vec<TokenId>, HashMap<TokenId, u64>>> =
            vec![HashMap::new(); order];
        for seq in sequences.iter().filter(|s| !s.is_empty()) {
            let mut padded = vec![START; order - 1];
            padded.extend(seq.iter().copied());
            padded.push(EOS_ID);
            for i in order - 1..padded.len() {
                let token = padded[i];
                for h in 0..order {
                    let history = padded[i - h..i].to_vec();
                    *raw[h].entry(history).or_default().entry(token).or_default() += 1;
                }
            }
        }
        for (h, table) in raw.into_iter().enumerate() {
            for (history, successors) in table {
                let mut counts: Vec<(TokenId, u64)> = successors.into_iter().collect();
                counts.sort_unstable();
                let total = counts.iter().map(|&(_, c)| c).sum();
                model.tables[h].insert(history, Successors { total, counts });
            }
        }
        Ok(model)
    }

    /// Lossy-encodes each corpus line with `tokenizer` and trains on the result.
    pub fn train_text<S: AsRef<str>>(
        tokenizer: &BpeModel,
        corpus: &[S],
        order: usize,
        smoothing: f64,
    ) -> Result<Self, LmError> {
        let sequences: Vec<Vec<TokenId>> = corpus
            .iter()
            .map(|l| tokenizer.encode_lossy(l.as_ref()))
            .collect();
        Self::train(&sequences, tokenizer.vocab_size(), order, smoothing)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn successors_for(&self, prefix: &[TokenId]) -> Option<&Successors> {
        let mut padded = vec![START; (self.order - 1).saturating_sub(prefix.len())];
        let tail = prefix.len().saturating_sub(self.order - 1);
        padded.extend_from_slice(&prefix[tail..]);
        (0..self.order).rev().find_map(|h| {
            self.tables[h]
                .get(&padded[padded.len() - h..])
                .filter(|s| s.total > 0)
        })
    }

    pub fn distribution(&self, prefix: &[TokenId]) -> Distribution {
        let m = self.vocab_size;
        let Some(successors) = self.successors_for(prefix) else {
            return Distribution::uniform(m);
        };
        let denom = successors.total as f64 + self.smoothing * m as f64;
        let mut probs = vec![self.smoothing / denom; m];
        for &(token, count) in &successors.counts {
            probs[token as usize] = (count as f64 + self.smoothing) / denom;
        }
        Distribution::new(probs)
            .expect("add-k estimates are normalized")
            .renormalized()
    }

    /// `P(token | prefix)`, without building the whole distribution.
    pub fn prob(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        let m = self.vocab_size as f64;
        match self.successors_for(prefix) {
            None => 1.0 / m,
            Some(s) => {
                let count = s
                    .counts
                    .binary_search_by_key(&token, |&(t, _)| t)
                    .map(|i| s.counts[i].1)
                    .unwrap_or(0);
                (count as f64 + self.smoothing) / (s.total as f64 + self.smoothing * m)
            }
        }
    }
}

impl Provider for &NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        Ok(self.distribution(ctx.prefix))
    }
}

impl Provider for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        Ok(self.distribution(ctx.prefix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_is_uniform() {
        let model = NgramModel::untrained(7, 2, 1.0).unwrap();
        let d = model.distribution(&[3, 4]);
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn bigram_hand_count() {
        // "a b a b a" + <eos>: after `a` come b, b, <eos>, so c(a) = 3, c(a b) = 2.
        let (a, b) = (2, 3);
        let m = 6;
        let model = NgramModel::train(&[vec![a, b, a, b, a]], m, 2, 1.0).unwrap();
        let d = model.distribution(&[b, a]);
        assert!((d.prob(b) - 3.0 / (3.0 + m as f64)).abs() < 1e-12);
        assert!((d.prob(EOS_ID) - 2.0 / (3.0 + m as f64)).abs() < 1e-12);
        assert!((model.prob(&[a], b) - d.prob(b)).abs() < 1e-15);
    }

    #[test]
    fn unigram_ignores_context() {
        let model = NgramModel::train(&[vec![2, 3, 3], vec![4]], 5, 1, 0.5).unwrap();
        assert_eq!(model.distribution(&[]), model.distribution(&[2, 3]));
        // Counts: eos 2, 2:1, 3:2, 4:1; total 6.
        let d = model.distribution(&[]);
        assert!((d.prob(3) - 2.5 / 8.5).abs() < 1e-12);
    }

    #[test]
    fn unseen_history_backs_off() {
        let model = NgramModel::train(&[vec![2, 3]], 5, 3, 1.0).unwrap();
        // History (4, 4) never seen, nor (4): falls back to unigram.
        let uni = NgramModel::train(&[vec![2, 3]], 5, 1, 1.0).unwrap();
        assert_eq!(model.distribution(&[4, 4]), uni.distribution(&[]));
    }

    #[test]
    fn normalized_and_deterministic() {
        let seqs = vec![vec![2, 3, 4, 2, 3], vec![4, 4, 2]];
        let a = NgramModel::train(&seqs, 6, 3, 0.1).unwrap();
        let b = NgramModel::train(&seqs, 6, 3, 0.1).unwrap();
        assert_eq!(a, b);
        for prefix in [&[][..], &[2], &[2, 3], &[5, 5, 5]] {
            let sum: f64 = a.distribution(prefix).probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            NgramModel::untrained(5, 0, 1.0),
            Err(LmError::InvalidOrder(0))
        ));
        assert!(matches!(
            NgramModel::untrained(5, 6, 1.0),
            Err(LmError::InvalidOrder(6))
        ));
        assert!(matches!(
            NgramModel::untrained(5, 2, 0.0),
            Err(LmError::InvalidSmoothing(_))
        ));
        assert!(matches!(
            NgramModel::train(&[vec![]], 5, 2, 1.0),
            Err(LmError::EmptyCorpus)
        ));
    }
}
