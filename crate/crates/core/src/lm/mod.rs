//! Next-token distributions and token selection.
//!
//! A [`Provider`] turns a [`GenerationContext`] into a normalized
//! [`Distribution`] over the vocabulary. [`greedy_token`] takes the argmax;
//! [`constrained_token`] takes the argmax inside the bin that spells the
//! requested bits. Ties always go to the lowest token id and comparisons are
//! plain `>` on `f64`, so selection is identical on every platform.

mod ngram;
mod remote;

pub use ngram::{NgramModel, DEFAULT_ORDER, DEFAULT_SMOOTHING};
pub use remote::{RemoteProvider, RequestMode, PROTOCOL_VERSION, REMOTE_TOLERANCE};

use thiserror::Error;

use crate::bins::{bits_to_index, BinAssignment, Scheme};
use crate::tokenizer::{TokenId, UNK_ID};

/// Tolerance on `sum(probs) == 1` for locally computed distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be in 1..=5, got {0}")]
    InvalidOrder(usize),
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("context of {0} tokens is longer than the provider supports")]
    ContextTooLong(usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("provider vocabulary hash {got} does not match tokenizer hash {expected}")]
    VocabMismatch { expected: String, got: String },
    #[error("expected {expected} bits, got {got}")]
    BitsLength { expected: usize, got: usize },
    #[error("bin {0} has no selectable token")]
    EmptyBin(u32),
}

/// Probability vector over the whole vocabulary.
///
/// Distributions decoded from a sparse provider response keep track of which
/// entries were actually reported; the rest are a uniform share of the
/// reported remaining mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
    listed: Option<Vec<bool>>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, LmError> {
        Self::with_tolerance(probs, NORMALIZATION_TOLERANCE)
    }

    pub fn with_tolerance(probs: Vec<f64>, tolerance: f64) -> Result<Self, LmError> {
        if probs.is_empty() {
            return Err(LmError::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(LmError::InvalidDistribution(format!(
                "entry {i} is {}",
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(LmError::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self {
            probs,
            listed: None,
        })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
            listed: None,
        }
    }

    pub fn one_hot(m: usize, token: TokenId) -> Self {
        let mut probs = vec![0.0; m];
        probs[token as usize] = 1.0;
        Self {
            probs,
            listed: None,
        }
    }

    /// Dense view of a top-k response: listed entries as given, `rest_mass`
    /// shared equally by the unlisted tokens.
    pub fn from_sparse(
        m: usize,
        top: &[(TokenId, f64)],
        rest_mass: f64,
        tolerance: f64,
    ) -> Result<Self, LmError> {
        let mut probs = vec![0.0; m];
        let mut listed = vec![false; m];
        for &(id, p) in top {
            let slot = listed.get_mut(id as usize).ok_or_else(|| {
                LmError::InvalidDistribution(format!("token id {id} out of range"))
            })?;
            if std::mem::replace(slot, true) {
                return Err(LmError::InvalidDistribution(format!(
                    "token id {id} listed twice"
                )));
            }
            probs[id as usize] = p;
        }
        let unlisted = m - top.len();
        if unlisted > 0 && rest_mass > 0.0 {
            let share = rest_mass / unlisted as f64;
            for (p, &l) in probs.iter_mut().zip(&listed) {
                if !l {
                    *p = share;
                }
            }
        } else if rest_mass > tolerance {
            return Err(LmError::InvalidDistribution(
                "remaining mass with nothing unlisted".into(),
            ));
        }
        let mut dist = Self::with_tolerance(probs, tolerance)?;
        dist.listed = Some(listed);
        Ok(dist)
    }

    /// Rescales to sum exactly (to rounding) to one. Entries that are zero stay zero.
    pub fn renormalized(mut self) -> Self {
        let sum: f64 = self.probs.iter().sum();
        if sum > 0.0 {
            for p in &mut self.probs {
                *p /= sum;
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs.get(token as usize).copied().unwrap_or(0.0)
    }

    /// False for entries a sparse response did not report explicitly.
    pub fn is_exact(&self, token: TokenId) -> bool {
        self.listed
            .as_ref()
            .is_none_or(|l| l.get(token as usize).copied().unwrap_or(false))
    }

    pub fn is_partial(&self) -> bool {
        self.listed.is_some()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GenerationContext<'a> {
    /// Text the model conditions on (the cover). Unconditional providers ignore it.
    pub source: &'a str,
    /// Tokens generated so far.
    pub prefix: &'a [TokenId],
}

impl<'a> GenerationContext<'a> {
    pub fn new(source: &'a str, prefix: &'a [TokenId]) -> Self {
        Self { source, prefix }
    }
}

pub trait Provider {
    fn vocab_size(&self) -> usize;

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError>;

    /// Fully reported distribution. Providers that may answer with a partial
    /// (top-k) distribution override this to fetch the dense one.
    fn dense_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        self.next_distribution(ctx)
    }
}

impl<P: Provider + ?Sized> Provider for &mut P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        (**self).next_distribution(ctx)
    }

    fn dense_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        (**self).dense_distribution(ctx)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        (**self).next_distribution(ctx)
    }

    fn dense_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        (**self).dense_distribution(ctx)
    }
}

/// Uniform distribution over `m` tokens regardless of context.
#[derive(Clone, Copy, Debug)]
pub struct UniformProvider(pub usize);

impl Provider for UniformProvider {
    fn vocab_size(&self) -> usize {
        self.0
    }

    fn next_distribution(&mut self, _: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        Ok(Distribution::uniform(self.0))
    }
}

/// Replays a fixed list of distributions, one per generation step.
#[derive(Clone, Debug)]
pub struct ScriptedProvider {
    steps: Vec<Distribution>,
}

impl ScriptedProvider {
    pub fn new(steps: Vec<Distribution>) -> Self {
        assert!(!steps.is_empty(), "script needs at least one step");
        Self { steps }
    }

    /// One-hot steps spelling `tokens`.
    pub fn spelling(m: usize, tokens: &[TokenId]) -> Self {
        Self::new(
            tokens
                .iter()
                .map(|&t| Distribution::one_hot(m, t))
                .collect(),
        )
    }
}

impl Provider for ScriptedProvider {
    fn vocab_size(&self) -> usize {
        self.steps[0].len()
    }

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        self.steps
            .get(ctx.prefix.len())
            .cloned()
            .ok_or(LmError::ContextTooLong(ctx.prefix.len()))
    }
}

/// Argmax over the whole vocabulary; lowest id among equal maxima.
pub fn greedy_token(dist: &Distribution) -> TokenId {
    argmax(dist, 0..dist.len() as TokenId).expect("distributions are non-empty")
}

/// Argmax over `candidates`; lowest id among equal maxima. `None` when empty.
pub fn argmax(
    dist: &Distribution,
    candidates: impl IntoIterator<Item = TokenId>,
) -> Option<TokenId> {
    let mut best: Option<(TokenId, f64)> = None;
    for id in candidates {
        let p = dist.prob(id);
        best = match best {
            Some((b, bp)) if bp > p || (bp == p && b < id) => Some((b, bp)),
            _ => Some((id, p)),
        };
    }
    best.map(|(id, _)| id)
}

/// Tokens allowed when embedding `bits`: the members of the matching bin,
/// plus the bit-free common tokens for the common-token scheme. `<unk>` is
/// never a candidate.
pub fn bin_candidates<'f>(
    f: &'f BinAssignment,
    bits: &[bool],
) -> Result<impl Iterator<Item = TokenId> + 'f, LmError> {
    let l = f.bits() as usize;
    if bits.len() != l {
        return Err(LmError::BitsLength {
            expected: l,
            got: bits.len(),
        });
    }
    let common: &[TokenId] = if f.scheme() == Scheme::BinsCommon {
        f.none_tokens()
    } else {
        &[]
    };
    Ok(f.members(bits_to_index(bits))
        .iter()
        .chain(common)
        .copied()
        .filter(|&t| t != UNK_ID))
}

/// Argmax restricted to tokens whose bit string equals `bits`.
pub fn constrained_token(
    dist: &Distribution,
    f: &BinAssignment,
    bits: &[bool],
) -> Result<TokenId, LmError> {
    argmax(dist, bin_candidates(f, bits)?).ok_or(LmError::EmptyBin(bits_to_index(bits)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bins::Slot;
    use crate::tokenizer::EOS_ID;
    use proptest::prelude::*;

    /// V = {<eos>, <unk>, a, b, c, d}; f: {a, c} -> "0", {b, d} -> "1".
    fn toy_bins() -> BinAssignment {
        let tokens = ["<eos>", "<unk>", "a", "b", "c", "d"]
            .map(String::from)
            .to_vec();
        let slots = vec![
            Slot::Eos,
            Slot::None,
            Slot::Bin(0),
            Slot::Bin(1),
            Slot::Bin(0),
            Slot::Bin(1),
        ];
        BinAssignment::from_slots(Scheme::Bins, 1, "00", tokens, slots).unwrap()
    }

    fn toy_dist() -> Distribution {
        // eos .05, unk 0, a .4, b .3, c .2, d .05
        Distribution::new(vec![0.05, 0.0, 0.4, 0.3, 0.2, 0.05]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Distribution::new(vec![]).is_err());
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_token(&Distribution::one_hot(10, 7)), 7);
        assert_eq!(greedy_token(&Distribution::uniform(10)), 0);
    }

    #[test]
    fn constrained_hand_trace() {
        let f = toy_bins();
        assert_eq!(constrained_token(&toy_dist(), &f, &[true]).unwrap(), 3); // b
        assert_eq!(constrained_token(&toy_dist(), &f, &[false]).unwrap(), 2); // a
        assert!(matches!(
            constrained_token(&toy_dist(), &f, &[true, false]),
            Err(LmError::BitsLength {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn zero_mass_bin_picks_lowest_member() {
        let f = toy_bins();
        let dist = Distribution::new(vec![0.0, 0.0, 0.6, 0.0, 0.4, 0.0]).unwrap();
        assert_eq!(constrained_token(&dist, &f, &[true]).unwrap(), 3);
    }

    #[test]
    fn eos_is_never_constrained_choice() {
        let f = toy_bins();
        let dist = Distribution::one_hot(6, EOS_ID);
        let t = constrained_token(&dist, &f, &[false]).unwrap();
        assert_ne!(t, EOS_ID);
    }

    #[test]
    fn sparse_decoding() {
        let d = Distribution::from_sparse(4, &[(2, 0.5), (0, 0.3)], 0.2, 1e-6).unwrap();
        assert_eq!(d.probs(), &[0.3, 0.1, 0.5, 0.1]);
        assert!(d.is_exact(2) && !d.is_exact(1));
        assert!(Distribution::from_sparse(4, &[(2, 0.5), (2, 0.5)], 0.0, 1e-6).is_err());
        assert!(Distribution::from_sparse(4, &[(9, 1.0)], 0.0, 1e-6).is_err());
    }

    #[test]
    fn scripted_provider_runs_out() {
        let mut p = ScriptedProvider::spelling(3, &[2, 0]);
        assert_eq!(
            greedy_token(
                &p.next_distribution(&GenerationContext::new("", &[]))
                    .unwrap()
            ),
            2
        );
        assert!(matches!(
            p.next_distribution(&GenerationContext::new("", &[2, 0])),
            Err(LmError::ContextTooLong(2))
        ));
    }

    fn random_dist(weights: Vec<u32>) -> Distribution {
        let total: f64 = weights.iter().map(|&w| w as f64).sum();
        let probs = if total == 0.0 {
            vec![1.0 / weights.len() as f64; weights.len()]
        } else {
            weights.iter().map(|&w| w as f64 / total).collect()
        };
        Distribution::with_tolerance(probs, 1e-9).unwrap()
    }

    proptest! {
        #[test]
        fn greedy_matches_linear_scan(weights in prop::collection::vec(0u32..20, 1..40)) {
            let dist = random_dist(weights);
            let mut best = 0usize;
            for i in 1..dist.len() {
                if dist.probs()[i] > dist.probs()[best] {
                    best = i;
                }
            }
            prop_assert_eq!(greedy_token(&dist) as usize, best);
        }

        #[test]
        fn constraining_to_greedy_bin_is_noop(weights in prop::collection::vec(0u32..20, 6..=6)) {
            let f = toy_bins();
            let dist = random_dist(weights);
            let g = greedy_token(&dist);
            let bits = f.bits_of(g);
            prop_assume!(!bits.is_empty());
            prop_assert_eq!(constrained_token(&dist, &f, &bits).unwrap(), g);
        }

        #[test]
        fn chosen_token_spells_bits(weights in prop::collection::vec(0u32..20, 6..=6), bit: bool) {
            let f = toy_bins();
            let dist = random_dist(weights);
            let t = constrained_token(&dist, &f, &[bit]).unwrap();
            prop_assert_eq!(f.bits_of(t), vec![bit]);
        }
    }
}
