//! The searchable corpus: index, preprocessing setup and per-document
//! signatures, persisted together as one index file.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Preprocessor, PreprocessorSpec};
use crate::error::{Error, Result};
use crate::extract::DocSignatures;
use crate::index::{DocIdx, Index, IndexData};

const INDEX_MAGIC: &str = "QRIDX 1";

#[derive(Serialize, Deserialize)]
struct Stored {
    preprocessor: PreprocessorSpec,
    index: IndexData,
    signatures: Vec<DocSignatures>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    index: Index,
    preprocessor: Preprocessor,
    /// Aligned with the index's document order.
    signatures: Vec<DocSignatures>,
}

impl Engine {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        let index = Index::build(&corpus.documents)?;
        let signatures = index
            .doc_ids()
            .par_iter()
            .map(|id| DocSignatures::extract(corpus.get(id).expect("indexed document is loaded")))
            .collect();
        Ok(Engine {
            index,
            preprocessor: corpus.preprocessor.clone(),
            signatures,
        })
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    pub fn signatures(&self, doc: DocIdx) -> &DocSignatures {
        &self.signatures[doc as usize]
    }

    pub fn signatures_of(&self, id: &str) -> Option<&DocSignatures> {
        self.index.doc_index(id).map(|d| self.signatures(d))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let stored = Stored {
            preprocessor: self.preprocessor.spec().clone(),
            index: self.index.to_data(),
            signatures: self.signatures.clone(),
        };
        let mut out = format!("{INDEX_MAGIC}\n").into_bytes();
        serde_json::to_writer(&mut out, &stored).map_err(|e| Error::Serialize(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::format("index", e))?;
        let body = text
            .strip_prefix(INDEX_MAGIC)
            .and_then(|rest| rest.strip_prefix('\n'))
            .ok_or_else(|| Error::format("index", format!("missing `{INDEX_MAGIC}` header")))?;
        let stored: Stored = serde_json::from_str(body).map_err(|e| Error::format("index", e))?;
        let index = Index::from_data(stored.index)?;
        if stored.signatures.len() != index.doc_count()
            || stored
                .signatures
                .iter()
                .zip(index.doc_ids())
                .any(|(s, id)| &s.id != id)
        {
            return Err(Error::format("index", "signatures do not match documents"));
        }
        Ok(Engine {
            index,
            preprocessor: Preprocessor::from_spec(stored.preprocessor),
            signatures: stored.signatures,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
