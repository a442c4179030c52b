//! Generation-based linguistic steganography with semantic-aware bins coding.
//!
//! The hider generates text token by token from a conditioning language model.
//! At every `s`-th generated token the choice is restricted to the vocabulary
//! bin whose index spells the next `l` secret bits; all other tokens are the
//! model's greedy choice. The receiver only needs the bin mapping and the
//! parameters `(s, l)`: re-tokenizing the text and reading the bin index of
//! each carrying token recovers the payload.
//!
//! * [`tokenizer`] - BPE subword model, frequency tables and the lexicon used
//!   to keep generated text re-tokenizable.
//! * [`synonyms`] - synonym sets and per-token substitution sets.
//! * [`bins`] - the token-to-bits mapping: SaBins, random bins, common-token bins.
//! * [`lm`] - distribution providers (n-gram, remote bridge, test doubles) and
//!   greedy / constrained token selection.
//! * [`codec`] - embedding and extraction.
//! * [`metrics`] - BPW, BLEU and perplexity.

pub mod bins;
pub mod codec;
pub mod key;
pub mod lm;
pub mod metrics;
pub mod synonyms;
pub mod tokenizer;
pub mod toy;

pub use bins::{BinAssignment, BinsError, Scheme, Slot};
pub use codec::{BitStream, CodecError, Framing, StegoParams, StegoText};
pub use key::SecretKey;
pub use lm::{Distribution, GenerationContext, LmError, NgramModel, Provider};
pub use synonyms::{SubstitutionSet, SynonymDb};
pub use tokenizer::{BpeModel, FrequencyTable, Lexicon, TokenId, TokenizerError, EOS_ID, UNK_ID};

use sha2::{Digest, Sha256};

/// SHA-256 (hex) of the vocabulary strings in id order, newline separated.
pub fn vocab_hash<S: AsRef<str>>(vocab: &[S]) -> String {
    let mut hasher = Sha256::new();
    for token in vocab {
        hasher.update(token.as_ref().as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}
