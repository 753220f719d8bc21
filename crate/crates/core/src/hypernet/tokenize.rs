use std::collections::HashMap;

use super::HypernetError;

pub const CLS: &str = "[CLS]";
pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS_ID: usize = 0;
pub const PAD_ID: usize = 1;
pub const UNK_ID: usize = 2;

pub const DEFAULT_VOCAB_SIZE: usize = 30_522;
/// Longest accepted sequence, counting the leading [CLS].
pub const MAX_TOKENS: usize = 512;

const OPERATORS: [&str; 25] = [
    ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "##", "<:", ":>",
];

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Length of the numeric literal starting at `i`.
fn number_len(b: &[u8], i: usize) -> usize {
    let mut j = i;
    if b[j] == b'0' && j + 1 < b.len() && (b[j + 1] == b'x' || b[j + 1] == b'X') {
        j += 2;
        while j < b.len() && (b[j].is_ascii_hexdigit() || b[j] == b'.') {
            j += 1;
        }
        if j < b.len() && (b[j] == b'p' || b[j] == b'P') {
            j += 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
        }
    }
    while j < b.len() {
        let c = b[j];
        if c.is_ascii_alphanumeric() || c == b'.' || c == b'_' {
            j += 1;
            // Exponent signs belong to the literal.
            if (c == b'e' || c == b'E' || c == b'p' || c == b'P')
                && j < b.len()
                && (b[j] == b'+' || b[j] == b'-')
                && !is_hex_prefix(b, i)
            {
                j += 1;
            }
        } else {
            break;
        }
    }
    j - i
}

fn is_hex_prefix(b: &[u8], i: usize) -> bool {
    b[i] == b'0' && i + 1 < b.len() && (b[i + 1] == b'x' || b[i + 1] == b'X')
}

fn quoted_len(b: &[u8], i: usize) -> usize {
    let q = b[i];
    let mut j = i + 1;
    while j < b.len() {
        match b[j] {
            b'\\' => j += 2,
            c if c == q => return j + 1 - i,
            b'\n' => return j - i,
            _ => j += 1,
        }
    }
    b.len() - i
}

/// Splits C source into identifier, literal, operator and punctuation
/// tokens. Whitespace only separates tokens.
pub fn tokenize(source: &str) -> Vec<String> {
    let b = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let len = if c.is_ascii_whitespace() {
            i += 1;
            continue;
        } else if is_ident_start(c) {
            b[i..].iter().take_while(|&&c| is_ident(c)).count()
        } else if c.is_ascii_digit() || (c == b'.' && i + 1 < b.len() && b[i + 1].is_ascii_digit()) {
            number_len(b, i)
        } else if c == b'"' || c == b'\'' {
            quoted_len(b, i)
        } else if let Some(op) = OPERATORS.iter().find(|op| b[i..].starts_with(op.as_bytes())) {
            op.len()
        } else if c.is_ascii() {
            1
        } else {
            // Whole UTF-8 scalar.
            source[i..].chars().next().map_or(1, char::len_utf8)
        };
        out.push(source[i..i + len].to_string());
        i += len;
    }
    out
}

/// Token-to-id table with reserved [CLS], [PAD] and [UNK] at ids 0, 1, 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Ranks tokens by corpus frequency (ties lexicographic) and keeps the
    /// first `max_size` entries including the reserved ones.
    pub fn build<S: AsRef<str>>(corpus: &[S], max_size: usize) -> Result<Self, HypernetError> {
        if corpus.is_empty() {
            return Err(HypernetError::EmptyCorpus);
        }
        let token_lists: Vec<Vec<String>> = corpus.iter().map(|s| tokenize(s.as_ref())).collect();
        Self::from_token_lists(&token_lists, max_size)
    }

    /// As [`Vocab::build`] over already tokenized programs.
    pub fn from_token_lists(lists: &[Vec<String>], max_size: usize) -> Result<Self, HypernetError> {
        if lists.is_empty() {
            return Err(HypernetError::EmptyCorpus);
        }
        if max_size < 3 {
            return Err(HypernetError::Config(format!("vocabulary size {max_size} leaves no room for reserved tokens")));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in lists.iter().flatten() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(t, _)| ![CLS, PAD, UNK].contains(t)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens: Vec<String> = [CLS, PAD, UNK].iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().take(max_size - 3).map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens)
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, HypernetError> {
        if tokens.len() < 3 || tokens[CLS_ID] != CLS || tokens[PAD_ID] != PAD || tokens[UNK_ID] != UNK {
            return Err(HypernetError::Config("vocabulary must start with [CLS], [PAD], [UNK]".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(HypernetError::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// `[CLS]` followed by the ids of `tokens`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>, HypernetError> {
        let len = tokens.len() + 1;
        if len > MAX_TOKENS {
            return Err(HypernetError::TooLong { len, max: MAX_TOKENS });
        }
        let mut ids = Vec::with_capacity(len);
        ids.push(CLS_ID);
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        Ok(ids)
    }

    pub fn encode_source(&self, source: &str) -> Result<Vec<usize>, HypernetError> {
        self.encode(&tokenize(source))
    }
}
