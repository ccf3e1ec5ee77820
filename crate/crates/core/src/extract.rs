//! Method and field signature extraction.
//!
//! Extraction is regex based. Comments, literals, annotations and generic
//! arguments are blanked first, then the text is scanned while tracking brace
//! nesting so only declarations directly inside a type body are considered.
//! Method bodies, anonymous classes and initializer blocks are skipped.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{SourceDocument, Splitter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigKind {
    Msig,
    Fsig,
    Comb,
}

impl SigKind {
    pub const ALL: [SigKind; 3] = [SigKind::Msig, SigKind::Fsig, SigKind::Comb];

    pub fn as_str(self) -> &'static str {
        match self {
            SigKind::Msig => "msig",
            SigKind::Fsig => "fsig",
            SigKind::Comb => "comb",
        }
    }
}

impl fmt::Display for SigKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclKind {
    Method,
    Field,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub kind: DeclKind,
    pub text: String,
    /// Byte offset of the declaration in the source text.
    pub offset: usize,
}

const MODIFIERS: &str = r"(?:(?:public|protected|private|static|final|abstract|synchronized|native|strictfp|default|transient|volatile)\s+)*";
const TYPE: &str = r"[A-Za-z_$][\w$]*(?:\s*\.\s*[A-Za-z_$][\w$]*)*(?:\s*\[\s*\])*";

static METHOD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^{MODIFIERS}(?:(?P<ret>{TYPE})\s+)?(?P<name>[A-Za-z_$][\w$]*)\s*\((?P<params>[^()]*)\)\s*(?:\[\s*\]\s*)*(?:throws\s+[\w$.\s,]+)?$"
    ))
    .unwrap()
});

static FIELD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^{MODIFIERS}(?P<ty>{TYPE})\s+(?P<rest>[^\s].*)$")).unwrap()
});

static DECLARATOR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_$][\w$]*(?:\s*\[\s*\])*$").unwrap());

static TYPE_DECL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[^\w$.])(?:class|interface|enum|record)\s+[A-Za-z_$]").unwrap()
});

static GENERIC_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[\w$\s,.?&\[\]]*>").unwrap());

static IDENT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z_$][\w$]*").unwrap());

const NON_TYPE_WORDS: &[&str] = &[
    "return",
    "throw",
    "new",
    "else",
    "case",
    "package",
    "import",
    "assert",
    "goto",
    "break",
    "continue",
    "do",
    "try",
    "finally",
    "extends",
    "implements",
    "instanceof",
    "super",
    "this",
];
const NON_NAME_WORDS: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "catch",
    "synchronized",
    "return",
    "new",
    "throw",
    "super",
    "this",
    "assert",
];

/// Replaces comments, string and char literals and annotations with spaces,
/// keeping byte offsets and newlines intact.
fn blank_noise(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let blank = |out: &mut Vec<u8>, from: usize, to: usize| {
        for b in &mut out[from..to] {
            if *b != b'\n' {
                *b = b' ';
            }
        }
    };
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let end = text[i..].find('\n').map_or(bytes.len(), |e| i + e);
                blank(&mut out, i, end);
                i = end;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let end = text[i + 2..]
                    .find("*/")
                    .map_or(bytes.len(), |e| i + 2 + e + 2);
                blank(&mut out, i, end);
                i = end;
            }
            quote @ (b'"' | b'\'') => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j] != quote && bytes[j] != b'\n' {
                    j += if bytes[j] == b'\\' { 2 } else { 1 };
                }
                let end = (j + 1).min(bytes.len());
                blank(&mut out, i, end);
                i = end;
            }
            b'@' if !text[i + 1..].starts_with("interface") => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || matches!(bytes[j], b'_' | b'$' | b'.'))
                {
                    j += 1;
                }
                let mut k = j;
                while k < bytes.len() && bytes[k].is_ascii_whitespace() {
                    k += 1;
                }
                if bytes.get(k) == Some(&b'(') {
                    let mut depth = 0;
                    while k < bytes.len() {
                        match bytes[k] {
                            b'(' => depth += 1,
                            b')' => {
                                depth -= 1;
                                if depth == 0 {
                                    k += 1;
                                    break;
                                }
                            }
                            _ => {}
                        }
                        k += 1;
                    }
                    j = k;
                }
                blank(&mut out, i, j);
                i = j;
            }
            _ => i += 1,
        }
    }
    // blanked ranges always cover whole chars
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

/// Removes generic argument lists, innermost first.
fn strip_generics(text: &str) -> String {
    let mut current = text.to_string();
    loop {
        let next =
            GENERIC_RE.replace_all(&current, |caps: &regex::Captures| " ".repeat(caps[0].len()));
        if next == current {
            return current;
        }
        current = next.into_owned();
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Type,
    Block,
}

/// Splits on commas that are not nested in brackets.
fn top_level_split(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn has_top_level_assign(s: &str) -> bool {
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b'=' if depth == 0 => {
                let next_eq = bytes.get(i + 1) == Some(&b'=');
                let prev_op = i > 0 && matches!(bytes[i - 1], b'=' | b'!' | b'<' | b'>');
                if !next_eq && !prev_op {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

fn match_method(header: &str) -> Option<String> {
    let caps = METHOD_RE.captures(header)?;
    let name = caps.name("name")?.as_str();
    if NON_NAME_WORDS.contains(&name) {
        return None;
    }
    if let Some(ret) = caps.name("ret") {
        if NON_TYPE_WORDS.contains(&ret.as_str()) {
            return None;
        }
    }
    let end = caps.name("params")?.end() + 1;
    Some(header[..end].to_string())
}

fn match_field(header: &str) -> Option<String> {
    let caps = FIELD_RE.captures(header)?;
    let ty = caps.name("ty")?.as_str();
    if NON_TYPE_WORDS.contains(&ty) {
        return None;
    }
    let names: Vec<String> = top_level_split(caps.name("rest")?.as_str(), ',')
        .into_iter()
        .map(|decl| {
            let name = decl.split('=').next().unwrap_or("").trim();
            collapse_ws(name)
        })
        .collect();
    if names.is_empty() || !names.iter().all(|n| DECLARATOR_RE.is_match(n)) {
        return None;
    }
    Some(format!("{} {}", collapse_ws(ty), names.join(", ")))
}

/// Method and field declarations found at class-member level, in source order.
pub fn extract_signatures(raw: &str) -> Vec<Signature> {
    let text = strip_generics(&blank_noise(raw));
    let mut out = Vec::new();
    let mut stack: Vec<Scope> = Vec::new();
    let mut seg_start = 0;

    let mut classify =
        |segment: &str, seg_offset: usize, terminator: char, stack: &[Scope]| -> Option<Scope> {
            let member_level = stack.last() == Some(&Scope::Type);
            let header = collapse_ws(segment);
            let offset = seg_offset + (segment.len() - segment.trim_start().len());
            if terminator == '{' {
                if member_level && has_top_level_assign(&header) {
                    let decl = header.split('=').next().unwrap_or("").trim_end();
                    if let Some(sig) = match_field(decl) {
                        out.push(Signature {
                            kind: DeclKind::Field,
                            text: sig,
                            offset,
                        });
                    }
                    return Some(Scope::Block);
                }
                if stack.last() != Some(&Scope::Block)
                    && TYPE_DECL_RE.is_match(&format!(" {header}"))
                {
                    return Some(Scope::Type);
                }
                if member_level {
                    if let Some(sig) = match_method(&header) {
                        out.push(Signature {
                            kind: DeclKind::Method,
                            text: sig,
                            offset,
                        });
                    }
                }
                return Some(Scope::Block);
            }
            if member_level && terminator == ';' && !header.is_empty() {
                if let Some(sig) = match_method(&header) {
                    out.push(Signature {
                        kind: DeclKind::Method,
                        text: sig,
                        offset,
                    });
                } else if let Some(sig) = match_field(&header) {
                    out.push(Signature {
                        kind: DeclKind::Field,
                        text: sig,
                        offset,
                    });
                }
            }
            None
        };

    for (i, c) in text.char_indices() {
        match c {
            '{' | ';' => {
                if let Some(scope) = classify(&text[seg_start..i], seg_start, c, &stack) {
                    stack.push(scope);
                }
                seg_start = i + 1;
            }
            '}' => {
                stack.pop();
                seg_start = i + 1;
            }
            _ => {}
        }
    }
    out
}

pub fn extract_method_signatures(raw: &str) -> Vec<String> {
    extract_signatures(raw)
        .into_iter()
        .filter(|s| s.kind == DeclKind::Method)
        .map(|s| s.text)
        .collect()
}

pub fn extract_field_signatures(raw: &str) -> Vec<String> {
    extract_signatures(raw)
        .into_iter()
        .filter(|s| s.kind == DeclKind::Field)
        .map(|s| s.text)
        .collect()
}

/// Identifier tokens of a signature string.
pub fn signature_tokens(signature: &str) -> Vec<String> {
    IDENT_RE
        .find_iter(signature)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Signature tokens of one document, each with the offset of its declaration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSignatures {
    pub id: String,
    pub msig: Vec<(usize, String)>,
    pub fsig: Vec<(usize, String)>,
}

impl DocSignatures {
    pub fn extract(doc: &SourceDocument) -> Self {
        let mut sigs = Self {
            id: doc.id.clone(),
            ..Default::default()
        };
        for sig in extract_signatures(&doc.raw) {
            let target = match sig.kind {
                DeclKind::Method => &mut sigs.msig,
                DeclKind::Field => &mut sigs.fsig,
            };
            target.extend(
                signature_tokens(&sig.text)
                    .into_iter()
                    .map(|t| (sig.offset, t)),
            );
        }
        sigs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateToken {
    pub token: String,
    pub doc: String,
    pub offset: usize,
}

/// Structured tokens drawn from one signature context of the feedback set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureTokens {
    pub kind: SigKind,
    pub tokens: Vec<CandidateToken>,
}

impl SignatureTokens {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_strs(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.token.as_str())
    }
}

/// Collects the structured signature tokens of `kind` over all feedback
/// documents, ordered by (document id, source position).
pub fn collect_candidate_tokens(
    feedback: &[&DocSignatures],
    kind: SigKind,
    splitter: &Splitter,
) -> SignatureTokens {
    let mut tokens = Vec::new();
    for doc in feedback {
        let sources: &[&Vec<(usize, String)>] = match kind {
            SigKind::Msig => &[&doc.msig],
            SigKind::Fsig => &[&doc.fsig],
            SigKind::Comb => &[&doc.msig, &doc.fsig],
        };
        for source in sources {
            tokens.extend(
                source
                    .iter()
                    .filter(|(_, t)| splitter.is_structured(t))
                    .map(|(offset, t)| CandidateToken {
                        token: t.clone(),
                        doc: doc.id.clone(),
                        offset: *offset,
                    }),
            );
        }
    }
    tokens.sort_by(|a, b| (&a.doc, a.offset).cmp(&(&b.doc, b.offset)));
    SignatureTokens { kind, tokens }
}
