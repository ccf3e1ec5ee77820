//! Corpus loading and text preprocessing.

mod split;
mod wordlist;

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

pub use split::{split_token, FrequencyLexicon, Splitter};
pub use wordlist::WordList;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    pub stemming: bool,
    pub min_term_length: usize,
    pub keep_original_tokens: bool,
    /// Enables the corpus-frequency pass that splits same-case identifiers.
    pub lexicon_split: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            stemming: false,
            min_term_length: 3,
            keep_original_tokens: true,
            lexicon_split: false,
        }
    }
}

/// Serializable description of a [`Preprocessor`], embedded in index files
/// so queries are processed exactly like the documents were.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorSpec {
    pub options: PreprocessOptions,
    pub stopwords: WordList,
    pub keywords: WordList,
    pub lexicon: Option<FrequencyLexicon>,
}

pub struct Preprocessor {
    spec: PreprocessorSpec,
    splitter: Splitter,
    stemmer: Option<Stemmer>,
}

impl std::fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preprocessor")
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

impl Clone for Preprocessor {
    fn clone(&self) -> Self {
        Self::from_spec(self.spec.clone())
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::new(PreprocessOptions::default())
    }
}

/// Iterates the raw tokens of a text: maximal runs of alphanumerics and `_`.
pub fn raw_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
}

impl Preprocessor {
    /// Preprocessor with the bundled English stopwords and Java keywords.
    pub fn new(options: PreprocessOptions) -> Self {
        Self::from_spec(PreprocessorSpec {
            options,
            stopwords: WordList::english_stopwords(),
            keywords: WordList::java_keywords(),
            lexicon: None,
        })
    }

    pub fn from_spec(mut spec: PreprocessorSpec) -> Self {
        spec.options.min_term_length = spec.options.min_term_length.max(1);
        let lexicon = if spec.options.lexicon_split {
            spec.lexicon.clone()
        } else {
            None
        };
        let stemmer = spec
            .options
            .stemming
            .then(|| Stemmer::create(Algorithm::English));
        Self {
            splitter: Splitter::new(lexicon),
            stemmer,
            spec,
        }
    }

    pub fn spec(&self) -> &PreprocessorSpec {
        &self.spec
    }

    pub fn options(&self) -> &PreprocessOptions {
        &self.spec.options
    }

    pub fn splitter(&self) -> &Splitter {
        &self.splitter
    }

    /// Stopword, keyword and length checks on a lowercase word.
    pub fn is_valid_term(&self, word: &str) -> bool {
        word.chars().count() >= self.spec.options.min_term_length
            && word.chars().any(char::is_alphabetic)
            && !self.spec.stopwords.contains(word)
            && !self.spec.keywords.contains(word)
    }

    /// Lowercases, filters and optionally stems one split piece.
    pub fn normalize_piece(&self, piece: &str) -> Option<String> {
        if !piece.chars().all(char::is_alphabetic) {
            return None;
        }
        let word = piece.to_lowercase();
        if !self.is_valid_term(&word) {
            return None;
        }
        match &self.stemmer {
            None => Some(word),
            Some(stemmer) => {
                let stemmed = stemmer.stem(&word).into_owned();
                self.is_valid_term(&stemmed).then_some(stemmed)
            }
        }
    }

    /// Splits a token and returns its surviving terms in order.
    pub fn token_terms(&self, token: &str) -> Vec<String> {
        self.splitter
            .split(token)
            .iter()
            .filter_map(|piece| self.normalize_piece(piece))
            .collect()
    }

    pub fn preprocess_text(&self, raw: &str) -> Vec<String> {
        raw_tokens(raw).flat_map(|t| self.token_terms(t)).collect()
    }

    /// Structured identifiers of `raw`, lowercased, in order of appearance.
    pub fn structured_tokens(&self, raw: &str) -> Vec<String> {
        raw_tokens(raw)
            .filter(|t| self.splitter.is_structured(t))
            .map(str::to_lowercase)
            .filter(|t| t.chars().count() >= self.spec.options.min_term_length)
            .collect()
    }

    /// Terms used for indexing and searching: split terms followed by the
    /// original structured tokens when `keep_original_tokens` is set.
    pub fn index_terms(&self, raw: &str) -> Vec<String> {
        let mut terms = self.preprocess_text(raw);
        if self.spec.options.keep_original_tokens {
            terms.extend(self.structured_tokens(raw));
        }
        terms
    }

    pub fn document(&self, id: String, raw: String) -> SourceDocument {
        let body_terms = self.preprocess_text(&raw);
        let original_tokens = if self.spec.options.keep_original_tokens {
            self.structured_tokens(&raw)
        } else {
            Vec::new()
        };
        SourceDocument {
            id,
            raw,
            body_terms,
            original_tokens,
        }
    }
}

/// Convenience wrapper using the bundled word lists.
pub fn preprocess_text(raw: &str, opts: &PreprocessOptions) -> Vec<String> {
    Preprocessor::new(opts.clone()).preprocess_text(raw)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
    pub raw: String,
    pub body_terms: Vec<String>,
    pub original_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub extensions: Vec<String>,
    pub options: PreprocessOptions,
    pub stopwords: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            extensions: vec!["java".to_string()],
            options: PreprocessOptions::default(),
            stopwords: None,
            keywords: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    /// (relative path, reason) for files that could not be read.
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<SourceDocument>,
    pub preprocessor: Preprocessor,
    pub report: LoadReport,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SourceDocument> {
        self.documents
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.documents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    /// Builds a corpus from in-memory `(id, text)` pairs.
    pub fn from_texts<I, S, T>(preprocessor: Preprocessor, texts: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut documents: Vec<SourceDocument> = texts
            .into_iter()
            .map(|(id, raw)| preprocessor.document(id.into(), raw.into()))
            .collect();
        documents.sort_by(|a, b| a.id.cmp(&b.id));
        documents.dedup_by(|a, b| a.id == b.id);
        let loaded = documents.len();
        Self {
            documents,
            preprocessor,
            report: LoadReport {
                loaded,
                skipped: Vec::new(),
            },
        }
    }
}

fn relative_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Loads every file under `root` whose extension is in the configured filter.
pub fn load_corpus(root: &Path, config: &CorpusConfig) -> Result<Corpus> {
    if !root.is_dir() {
        return Err(Error::BadCorpusRoot(root.to_path_buf()));
    }
    fs::read_dir(root).map_err(|e| Error::io(root, e))?;

    let stopwords = match &config.stopwords {
        Some(path) => WordList::from_file(path)?,
        None => WordList::english_stopwords(),
    };
    let keywords = match &config.keywords {
        Some(path) => WordList::from_file(path)?,
        None => WordList::java_keywords(),
    };

    let mut report = LoadReport::default();
    let mut paths = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        match entry {
            Ok(entry) if entry.file_type().is_file() => {
                let matches = entry
                    .path()
                    .extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|ext| config.extensions.iter().any(|want| want == ext));
                if matches {
                    paths.push(entry.into_path());
                }
            }
            Ok(_) => {}
            Err(e) => {
                let where_ = e.path().map(|p| relative_id(root, p)).unwrap_or_default();
                warn!("skipping {where_}: {e}");
                report.skipped.push((where_, e.to_string()));
            }
        }
    }
    paths.sort();

    let texts: Vec<(String, std::io::Result<Vec<u8>>)> = paths
        .par_iter()
        .map(|p| (relative_id(root, p), fs::read(p)))
        .collect();
    let mut raw_docs = Vec::with_capacity(texts.len());
    for (id, bytes) in texts {
        match bytes {
            Ok(bytes) => raw_docs.push((id, String::from_utf8_lossy(&bytes).into_owned())),
            Err(e) => {
                warn!("skipping {id}: {e}");
                report.skipped.push((id, e.to_string()));
            }
        }
    }

    let lexicon = config.options.lexicon_split.then(|| {
        let mut lexicon = FrequencyLexicon::new(FrequencyLexicon::DEFAULT_MIN_COUNT);
        for (_, raw) in &raw_docs {
            raw_tokens(raw).for_each(|t| lexicon.observe(t));
        }
        lexicon
    });
    let preprocessor = Preprocessor::from_spec(PreprocessorSpec {
        options: config.options.clone(),
        stopwords,
        keywords,
        lexicon,
    });

    let mut documents: Vec<SourceDocument> = raw_docs
        .into_par_iter()
        .map(|(id, raw)| preprocessor.document(id, raw))
        .collect();
    documents.sort_by(|a, b| a.id.cmp(&b.id));
    report.loaded = documents.len();

    Ok(Corpus {
        documents,
        preprocessor,
        report,
    })
}
