//! Synonym sets and per-token substitution sets.
//!
//! File format: one synset per line, members separated by single spaces.
//! Members containing `_` are multiword expressions (WordNet convention,
//! e.g. `look_at`) and are dropped because a bin maps single tokens. Blank
//! lines and lines with no surviving member are skipped. Matching against
//! the vocabulary is case-sensitive.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use thiserror::Error;

use crate::tokenizer::{BpeModel, TokenId};

#[derive(Debug, Error)]
pub enum SynonymError {
    #[error("synonym file contains no synsets")]
    EmptyFile,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SynonymDb {
    synsets: Vec<Vec<String>>,
    index: HashMap<String, Vec<usize>>,
}

impl SynonymDb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a synset. Duplicates within the set and multiword members are
    /// removed; an empty result is ignored.
    pub fn add_synset<S: AsRef<str>>(&mut self, members: &[S]) {
        let mut set: Vec<String> = Vec::new();
        for m in members {
            let m = m.as_ref();
            if m.is_empty() || m.contains('_') || set.iter().any(|s| s == m) {
                continue;
            }
            set.push(m.to_owned());
        }
        if set.is_empty() {
            return;
        }
        let id = self.synsets.len();
        for m in &set {
            self.index.entry(m.clone()).or_default().push(id);
        }
        self.synsets.push(set);
    }

    pub fn parse(text: &str) -> Result<Self, SynonymError> {
        let mut db = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.contains(['\t', '\r']) {
                return Err(SynonymError::Parse {
                    line: i + 1,
                    msg: "members must be separated by single spaces".into(),
                });
            }
            let members: Vec<&str> = line.split(' ').filter(|m| !m.is_empty()).collect();
            db.add_synset(&members);
        }
        if db.synsets.is_empty() {
            return Err(SynonymError::EmptyFile);
        }
        Ok(db)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynonymError> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| {
            let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count();
            SynonymError::Parse {
                line,
                msg: "invalid UTF-8".into(),
            }
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for set in &self.synsets {
            out.push_str(&set.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn synsets(&self) -> &[Vec<String>] {
        &self.synsets
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    /// Indices of synsets containing `word`.
    pub fn synsets_of(&self, word: &str) -> &[usize] {
        self.index.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Union of all synsets containing the token's surface form, restricted to
    /// whole-word vocabulary tokens, plus the token itself. Subword pieces
    /// (tokens carrying the continuation marker) and reserved tokens get a
    /// singleton set.
    pub fn substitution_set(&self, model: &BpeModel, token: TokenId) -> SubstitutionSet {
        let mut members = BTreeSet::from([token]);
        if model.is_special(token) || model.is_continuation(token) {
            return SubstitutionSet {
                anchor: token,
                members,
            };
        }
        let Some(word) = model.token(token) else {
            return SubstitutionSet {
                anchor: token,
                members,
            };
        };
        for &set in self.synsets_of(word) {
            for member in &self.synsets[set] {
                if let Some(id) = model.id_of(member) {
                    if !model.is_special(id) && !model.is_continuation(id) {
                        members.insert(id);
                    }
                }
            }
        }
        SubstitutionSet {
            anchor: token,
            members,
        }
    }
}

/// Tokens that may replace `anchor` without changing meaning. Always contains `anchor`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionSet {
    pub anchor: TokenId,
    pub members: BTreeSet<TokenId>,
}

impl SubstitutionSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, token: TokenId) -> bool {
        self.members.contains(&token)
    }
}
