//! Identifier splitting.
//!
//! The rule-based splitter breaks a token on separators (anything that is not
//! alphanumeric), on letter/digit boundaries and on camel-case boundaries. A
//! run of capitals followed by a capitalised word is split before the last
//! capital, so `XMLParser` becomes `XML`, `Parser`.
//!
//! [`FrequencyLexicon`] adds an optional second pass for same-case pieces such
//! as `DECIMALTYPE`: the piece is segmented greedily by the longest known word
//! prefix, and left whole unless every segment is a known word.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Upper,
    Lower,
    Digit,
    Separator,
}

fn classify(c: char) -> CharClass {
    if c.is_uppercase() {
        CharClass::Upper
    } else if c.is_numeric() {
        CharClass::Digit
    } else if c.is_alphabetic() {
        // uncased letters behave like lowercase ones
        CharClass::Lower
    } else if c.is_alphanumeric() {
        CharClass::Digit
    } else {
        CharClass::Separator
    }
}

/// Splits one token into its pieces, preserving the original case and order.
///
/// Digits are kept as their own pieces; callers that want words only drop them
/// afterwards. Never returns empty pieces.
pub fn split_token(token: &str) -> Vec<String> {
    let chars: Vec<(usize, char, CharClass)> = token
        .char_indices()
        .map(|(i, c)| (i, c, classify(c)))
        .collect();

    let mut pieces = Vec::new();
    let mut start: Option<usize> = None; // index into `chars`

    let flush = |pieces: &mut Vec<String>, from: usize, to: usize| {
        if from < to {
            let begin = chars[from].0;
            let end = if to < chars.len() {
                chars[to].0
            } else {
                token.len()
            };
            pieces.push(token[begin..end].to_string());
        }
    };

    for i in 0..chars.len() {
        let class = chars[i].2;
        if class == CharClass::Separator {
            if let Some(s) = start.take() {
                flush(&mut pieces, s, i);
            }
            continue;
        }
        let Some(s) = start else {
            start = Some(i);
            continue;
        };
        let prev = chars[i - 1].2;
        let boundary_at = match (prev, class) {
            (CharClass::Digit, CharClass::Upper | CharClass::Lower) => Some(i),
            (CharClass::Upper | CharClass::Lower, CharClass::Digit) => Some(i),
            (CharClass::Lower, CharClass::Upper) => Some(i),
            // "XMLParser": split before the last capital of the run
            (CharClass::Upper, CharClass::Lower)
                if i >= 2 && i - 2 >= s && chars[i - 2].2 == CharClass::Upper =>
            {
                Some(i - 1)
            }
            _ => None,
        };
        if let Some(b) = boundary_at {
            flush(&mut pieces, s, b);
            start = Some(b);
        }
    }
    if let Some(s) = start {
        flush(&mut pieces, s, chars.len());
    }
    pieces
}

/// Word frequencies mined from the pieces of multi-piece identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyLexicon {
    counts: BTreeMap<String, u32>,
    min_count: u32,
    min_piece_len: usize,
}

impl FrequencyLexicon {
    pub const DEFAULT_MIN_COUNT: u32 = 2;
    pub const DEFAULT_MIN_PIECE_LEN: usize = 3;

    pub fn new(min_count: u32) -> Self {
        Self {
            counts: BTreeMap::new(),
            min_count: min_count.max(1),
            min_piece_len: Self::DEFAULT_MIN_PIECE_LEN,
        }
    }

    /// Records the pieces of `token` when the rule-based splitter already
    /// separates it into several words.
    pub fn observe(&mut self, token: &str) {
        let pieces = split_token(token);
        if pieces.len() < 2 {
            return;
        }
        for piece in pieces {
            if piece.chars().count() >= self.min_piece_len && piece.chars().all(char::is_alphabetic)
            {
                *self.counts.entry(piece.to_lowercase()).or_insert(0) += 1;
            }
        }
    }

    pub fn insert(&mut self, word: &str, count: u32) {
        *self.counts.entry(word.to_lowercase()).or_insert(0) += count;
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts
            .get(word)
            .is_some_and(|&count| count >= self.min_count)
    }

    pub fn len(&self) -> usize {
        self.counts
            .values()
            .filter(|&&c| c >= self.min_count)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Greedy longest-prefix segmentation of a same-case alphabetic piece.
    /// Returns `None` when the piece is a known word itself or cannot be fully
    /// covered by known words.
    fn segment<'a>(&self, piece: &'a str) -> Option<Vec<&'a str>> {
        if !piece.is_ascii() {
            return None;
        }
        let lower = piece.to_ascii_lowercase();
        if self.contains(&lower) {
            return None;
        }
        let boundaries: Vec<usize> = piece
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(piece.len()))
            .collect();
        let mut out = Vec::new();
        let mut at = 0; // index into boundaries
        while boundaries[at] < piece.len() {
            let begin = boundaries[at];
            let found = (at + self.min_piece_len..boundaries.len())
                .rev()
                .find(|&end| self.contains(&lower[begin..boundaries[end]]))?;
            out.push(&piece[begin..boundaries[found]]);
            at = found;
        }
        (out.len() >= 2).then_some(out)
    }
}

/// Rule-based splitter with an optional frequency lexicon pass.
#[derive(Debug, Clone, Default)]
pub struct Splitter {
    lexicon: Option<FrequencyLexicon>,
}

impl Splitter {
    pub fn new(lexicon: Option<FrequencyLexicon>) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> Option<&FrequencyLexicon> {
        self.lexicon.as_ref()
    }

    pub fn split(&self, token: &str) -> Vec<String> {
        let pieces = split_token(token);
        let Some(lexicon) = &self.lexicon else {
            return pieces;
        };
        let mut out = Vec::with_capacity(pieces.len());
        for piece in pieces {
            let same_case =
                piece.chars().all(char::is_lowercase) || piece.chars().all(char::is_uppercase);
            match lexicon.segment(&piece).filter(|_| same_case) {
                Some(parts) => out.extend(parts.into_iter().map(str::to_string)),
                None => out.push(piece),
            }
        }
        out
    }

    /// A token is structured when it splits into at least two alphabetic pieces.
    pub fn is_structured(&self, token: &str) -> bool {
        self.split(token)
            .iter()
            .filter(|p| p.chars().any(char::is_alphabetic))
            .count()
            >= 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(token: &str) -> Vec<String> {
        split_token(token)
    }

    #[test]
    fn camel_case() {
        assert_eq!(
            split("resolveRuntimeClasspathEntry"),
            ["resolve", "Runtime", "Classpath", "Entry"]
        );
        assert_eq!(split("getChatRoomBots"), ["get", "Chat", "Room", "Bots"]);
        assert_eq!(split("MessageType"), ["Message", "Type"]);
    }

    #[test]
    fn snake_case() {
        assert_eq!(split("reverse_traversal"), ["reverse", "traversal"]);
        assert_eq!(split("__init__"), ["init"]);
        assert_eq!(split("MAX_VALUE"), ["MAX", "VALUE"]);
    }

    #[test]
    fn acronym_runs() {
        assert_eq!(split("XMLParser"), ["XML", "Parser"]);
        assert_eq!(
            split("IRuntimeClasspathEntry"),
            ["I", "Runtime", "Classpath", "Entry"]
        );
        assert_eq!(split("parseHTTPResponse"), ["parse", "HTTP", "Response"]);
        assert_eq!(split("DECIMALTYPE"), ["DECIMALTYPE"]);
    }

    #[test]
    fn digits_and_punctuation() {
        assert_eq!(split("a3x"), ["a", "3", "x"]);
        assert_eq!(split("utf8Decoder"), ["utf", "8", "Decoder"]);
        assert_eq!(split("entry.getType()"), ["entry", "get", "Type"]);
        assert_eq!(split("42"), ["42"]);
        assert!(split("...").is_empty());
        assert!(split("").is_empty());
    }

    #[test]
    fn lexicon_splits_same_case_tokens() {
        let mut lexicon = FrequencyLexicon::new(1);
        lexicon.insert("decimal", 3);
        lexicon.insert("type", 5);
        let splitter = Splitter::new(Some(lexicon));
        assert_eq!(splitter.split("DECIMALTYPE"), ["DECIMAL", "TYPE"]);
        assert_eq!(splitter.split("decimaltype"), ["decimal", "type"]);
        // not fully covered: left whole
        assert_eq!(splitter.split("decimalxyz"), ["decimalxyz"]);
        // known word is never split
        assert_eq!(splitter.split("Decimal"), ["Decimal"]);
        assert!(splitter.is_structured("DECIMALTYPE"));
        assert!(!Splitter::default().is_structured("DECIMALTYPE"));
    }

    #[test]
    fn lexicon_prefers_longest_prefix() {
        let mut lexicon = FrequencyLexicon::new(1);
        for w in ["class", "classpath", "path", "entry"] {
            lexicon.insert(w, 1);
        }
        let splitter = Splitter::new(Some(lexicon));
        assert_eq!(splitter.split("classpathentry"), ["classpath", "entry"]);
    }

    #[test]
    fn lexicon_observes_multi_piece_tokens_only() {
        let mut lexicon = FrequencyLexicon::new(2);
        lexicon.observe("getChatRoom");
        lexicon.observe("chatRoom");
        lexicon.observe("chatroom");
        assert!(lexicon.contains("chat"));
        assert!(lexicon.contains("room"));
        assert!(!lexicon.contains("get"));
        assert!(!lexicon.contains("chatroom"));
    }

    #[test]
    fn structured_predicate() {
        let s = Splitter::default();
        assert!(s.is_structured("resolveRuntimeClasspathEntry"));
        assert!(s.is_structured("reverse_traversal"));
        assert!(s.is_structured("a3x"));
        assert!(!s.is_structured("entry"));
        assert!(!s.is_structured("String"));
        assert!(!s.is_structured("x2"));
    }
}
