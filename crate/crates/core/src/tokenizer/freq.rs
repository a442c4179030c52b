use std::fmt::Write as _;
use std::path::Path;

use super::{TokenId, TokenizerError};

/// Per-token occurrence counts over an encoded corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
}

impl FrequencyTable {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Token ids ordered by descending count, ascending id among equal counts.
    pub fn sorted_desc(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.counts.len() as TokenId).collect();
        ids.sort_by(|&a, &b| self.count(b).cmp(&self.count(a)).then(a.cmp(&b)));
        ids
    }

    /// `<token-id>\t<count>` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, count) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{count}");
        }
        out
    }

    pub fn from_text(text: &str, vocab_size: usize) -> Result<Self, TokenizerError> {
        let mut counts = vec![0u64; vocab_size];
        let mut seen = vec![false; vocab_size];
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| TokenizerError::Parse {
                line: i + 1,
                msg: msg.to_owned(),
            };
            let (id, count) = line
                .split_once('\t')
                .ok_or_else(|| err("expected <id>\\t<count>"))?;
            let id: usize = id.parse().map_err(|_| err("bad token id"))?;
            let count: u64 = count.parse().map_err(|_| err("bad count"))?;
            if id >= vocab_size {
                return Err(err("token id out of range"));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(err("duplicate token id"));
            }
            counts[id] = count;
        }
        Ok(Self { counts })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, vocab_size: usize) -> Result<Self, TokenizerError> {
        Self::from_text(&std::fs::read_to_string(path)?, vocab_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_breaks_ties_by_id() {
        let table = FrequencyTable::from_counts(vec![0, 3, 5, 3, 0]);
        assert_eq!(table.sorted_desc(), vec![2, 1, 3, 0, 4]);
    }

    #[test]
    fn text_round_trip() {
        let table = FrequencyTable::from_counts(vec![4, 0, 9]);
        assert_eq!(
            FrequencyTable::from_text(&table.to_text(), 3).unwrap(),
            table
        );
        assert!(FrequencyTable::from_text("0\t1\n0\t2\n", 3).is_err());
        assert!(FrequencyTable::from_text("7\t1\n", 3).is_err());
    }
}
