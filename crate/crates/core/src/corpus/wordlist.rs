use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const JAVA_KEYWORDS: &str = include_str!("../../data/java_keywords.txt");

/// A lowercase word set read from a one-entry-per-line file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordList(BTreeSet<String>);

impl WordList {
    /// Parses one word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn english_stopwords() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    /// Java reserved words plus the `true`, `false` and `null` literals.
    pub fn java_keywords() -> Self {
        Self::parse(JAVA_KEYWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
