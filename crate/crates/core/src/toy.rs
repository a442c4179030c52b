//! Deterministic toy English corpus and matching synonym sets.
//!
//! Used by tests, benchmarks and the CLI demo. Sentences are built from a
//! small grammar over word groups; each group of interchangeable words is also
//! a synset, so the corpus exercises synonym spreading in the bins builder.

use crate::key::{KeyedRng, SecretKey};

const DETERMINERS: &[&str] = &["the", "a", "this", "that", "every", "one"];

const NOUNS: &[&[&str]] = &[
    &["cat", "feline"],
    &["dog", "hound", "pup"],
    &["car", "automobile", "motorcar"],
    &["house", "home", "dwelling"],
    &["child", "kid", "youngster"],
    &["man", "gentleman", "fellow"],
    &["woman", "lady"],
    &["road", "street", "lane"],
    &["city", "town"],
    &["river", "stream"],
    &["book", "volume"],
    &["teacher", "instructor", "tutor"],
    &["doctor", "physician"],
    &["garden", "yard"],
    &["forest", "wood", "woodland"],
    &["ship", "boat", "vessel"],
    &["letter", "note", "message"],
    &["meal", "dinner", "supper"],
    &["shop", "store"],
    &["friend", "companion", "pal"],
    &["table"],
    &["window"],
    &["mountain"],
    &["village"],
    &["student"],
    &["farmer"],
    &["bird"],
    &["horse"],
    &["market"],
    &["bridge"],
];

const VERBS: &[&[&str]] = &[
    &["saw", "noticed", "spotted", "observed"],
    &["liked", "enjoyed", "loved"],
    &["found", "discovered", "located"],
    &["helped", "assisted", "aided"],
    &["bought", "purchased", "acquired"],
    &["built", "constructed", "made"],
    &["visited", "toured"],
    &["painted", "coloured"],
    &["followed", "chased", "pursued"],
    &["cleaned", "washed"],
    &["watched"],
    &["carried"],
    &["opened"],
    &["repaired"],
];

const ADJECTIVES: &[&[&str]] = &[
    &["big", "large", "huge", "enormous"],
    &["small", "little", "tiny"],
    &["old", "ancient", "aged"],
    &["new", "fresh", "modern"],
    &["happy", "glad", "cheerful", "joyful"],
    &["quick", "fast", "rapid", "swift"],
    &["quiet", "silent", "calm"],
    &["beautiful", "pretty", "lovely"],
    &["red"],
    &["green"],
    &["wooden"],
    &["busy"],
];

const ADVERBS: &[&[&str]] = &[
    &["quickly", "rapidly", "swiftly"],
    &["slowly", "gradually"],
    &["often", "frequently"],
    &["happily", "gladly"],
    &["never"],
    &["finally"],
];

const PREPOSITIONS: &[&str] = &["near", "behind", "beside", "under", "across", "inside"];

/// Synsets that only exist as multiword expressions in a thesaurus.
const MULTIWORD: &[&[&str]] = &[
    &["car", "motor_car", "auto"],
    &["house", "dwelling_house"],
    &["quickly", "in_a_hurry"],
];

fn pick<'a>(rng: &mut KeyedRng, items: &[&'a str]) -> &'a str {
    items[rng.below(items.len())]
}

fn pick_group<'a>(rng: &mut KeyedRng, groups: &[&[&'a str]]) -> &'a str {
    // Head words are more frequent than their synonyms.
    let group = groups[rng.below(groups.len())];
    if rng.below(2) == 0 {
        group[0]
    } else {
        pick(rng, group)
    }
}

fn noun_phrase(rng: &mut KeyedRng, out: &mut Vec<&'static str>) {
    out.push(pick(rng, DETERMINERS));
    if rng.below(2) == 0 {
        out.push(pick_group(rng, ADJECTIVES));
    }
    out.push(pick_group(rng, NOUNS));
}

fn sentence(rng: &mut KeyedRng) -> String {
    let mut words = Vec::with_capacity(12);
    noun_phrase(rng, &mut words);
    if rng.below(4) == 0 {
        words.push(pick_group(rng, ADVERBS));
    }
    words.push(pick_group(rng, VERBS));
    noun_phrase(rng, &mut words);
    if rng.below(3) == 0 {
        words.push(pick(rng, PREPOSITIONS));
        noun_phrase(rng, &mut words);
    }
    words.push(".");
    words.join(" ")
}

/// `lines` lines of one to three sentences, drawn from a stream seeded with `seed`.
pub fn corpus(lines: usize, seed: u64) -> Vec<String> {
    let mut rng = SecretKey::from_bytes(seed.to_be_bytes()).stream("toy-corpus");
    (0..lines)
        .map(|_| {
            let n = 1 + rng.below(3);
            (0..n)
                .map(|_| sentence(&mut rng))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Synonym file text: one synset per line, members separated by spaces.
pub fn synsets_text() -> String {
    let mut out = String::new();
    for group in NOUNS
        .iter()
        .chain(VERBS)
        .chain(ADJECTIVES)
        .chain(ADVERBS)
        .chain(MULTIWORD)
    {
        if group.len() > 1 {
            out.push_str(&group.join(" "));
            out.push('\n');
        }
    }
    out
}
