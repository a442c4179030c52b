#![allow(dead_code)]

use std::sync::OnceLock;

use stegopivot::key::KeyedRng;
use stegopivot::lm::{DEFAULT_ORDER, DEFAULT_SMOOTHING};
use stegopivot::{toy, BpeModel, FrequencyTable, Lexicon, NgramModel, SecretKey, SynonymDb};

pub const CORPUS_LINES: usize = 10_000;
pub const MERGES: usize = 300;

pub struct Fixture {
    pub corpus: Vec<String>,
    pub model: BpeModel,
    pub freqs: FrequencyTable,
    pub syndb: SynonymDb,
    pub lexicon: Lexicon,
    pub ngram: NgramModel,
}

pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let corpus = toy::corpus(CORPUS_LINES, 1);
        let model = BpeModel::train(&corpus, MERGES).unwrap();
        let freqs = model.count_frequencies(&corpus);
        let syndb = SynonymDb::parse(&toy::synsets_text()).unwrap();
        let lexicon = Lexicon::from_corpus(&model, &corpus);
        let ngram =
            NgramModel::train_text(&model, &corpus, DEFAULT_ORDER, DEFAULT_SMOOTHING).unwrap();
        Fixture {
            corpus,
            model,
            freqs,
            syndb,
            lexicon,
            ngram,
        }
    })
}

/// Deterministic randomness for test drivers.
pub fn rng(label: &str) -> KeyedRng {
    SecretKey::from_bytes(b"test-driver".to_vec()).stream(label)
}

pub fn random_bits(rng: &mut KeyedRng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.below(2) == 1).collect()
}

pub fn random_key(rng: &mut KeyedRng) -> SecretKey {
    SecretKey::from_bytes(rng.next_u64().to_be_bytes().to_vec())
}
