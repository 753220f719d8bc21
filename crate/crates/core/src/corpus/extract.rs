use super::text::non_empty_lines;

/// A top-level function definition found in a source file.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFunction {
    pub name: String,
    /// Definition text from the start of its declarator to the closing brace.
    pub source: String,
    pub return_type: String,
    pub params: Vec<Param>,
    pub provenance: String,
    pub variadic: bool,
    pub empty_body: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    /// Base type with qualifiers removed, e.g. `double` or `unsigned int`.
    pub ty: String,
    pub name: Option<String>,
    pub pointer: bool,
}

impl CandidateFunction {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn lines(&self) -> usize {
        non_empty_lines(&self.source)
    }
}

/// Why a definition-like region could not be used.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtractIssue {
    /// Braces do not balance; the whole file is unusable.
    Unbalanced,
    /// A braced region preceded by something that is not a recognizable
    /// function signature (K&R definitions, macro residue).
    Unrecognized { head: String },
}

const STORAGE: [&str; 9] = ["static", "inline", "extern", "__inline", "__inline__", "register", "const", "volatile", "restrict"];
const KEYWORDS: [&str; 8] = ["if", "while", "for", "switch", "return", "sizeof", "do", "else"];

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_') && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn normalize_type(words: &[&str]) -> String {
    words.iter().filter(|w| !STORAGE.contains(w)).copied().collect::<Vec<_>>().join(" ")
}

/// Splits `s` on top-level commas.
fn split_params(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_param(p: &str) -> Param {
    let pointer = p.contains('*') || p.contains('[') || p.contains('(');
    let cleaned: String = p.chars().map(|c| if c == '*' || c == '&' { ' ' } else { c }).collect();
    let cleaned = cleaned.split('[').next().unwrap_or("");
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    let type_words = [
        "float", "double", "int", "long", "short", "char", "unsigned", "signed", "void", "_Bool", "bool", "size_t",
    ];
    let (ty_words, name) = match words.last() {
        Some(last) if words.len() > 1 && !type_words.contains(last) && !STORAGE.contains(last) => {
            (&words[..words.len() - 1], Some(last.to_string()))
        }
        _ => (&words[..], None),
    };
    Param {
        ty: normalize_type(ty_words),
        name,
        pointer,
    }
}

/// Parses `<type> <name>(<params>)` from the text before a top-level `{`.
fn parse_head(head: &str) -> Option<(String, String, Vec<Param>, bool, usize)> {
    let trimmed = head.trim_end();
    if !trimmed.ends_with(')') || trimmed.contains('=') {
        return None;
    }
    // Matching parenthesis of the trailing parameter list.
    let bytes = trimmed.as_bytes();
    let mut depth = 0;
    let mut open = None;
    for i in (0..bytes.len()).rev() {
        match bytes[i] {
            b')' => depth += 1,
            b'(' => {
                depth -= 1;
                if depth == 0 {
                    open = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let open = open?;
    let before = trimmed[..open].trim_end();
    let name_start = before
        .char_indices()
        .rev()
        .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '_'))
        .map_or(0, |(i, c)| i + c.len_utf8());
    let name = &before[name_start..];
    if !is_ident(name) || KEYWORDS.contains(&name) {
        return None;
    }
    let ret_text = &before[..name_start];
    // Attributes or macro residue in the return position defeat the matcher.
    if ret_text.contains('(') || ret_text.contains(';') || ret_text.contains('}') {
        return None;
    }
    let ret_pointer = ret_text.contains('*');
    let ret_words: Vec<&str> = ret_text.split(|c: char| c.is_whitespace() || c == '*').filter(|w| !w.is_empty()).collect();
    if ret_words.is_empty() || !ret_words.iter().all(|w| is_ident(w)) {
        return None;
    }
    let mut return_type = normalize_type(&ret_words);
    if ret_pointer {
        return_type.push_str(" *");
    }
    let inner = trimmed[open + 1..trimmed.len() - 1].trim();
    let mut variadic = false;
    let params = if inner.is_empty() || inner == "void" {
        Vec::new()
    } else {
        let mut ps = Vec::new();
        for p in split_params(inner) {
            let p = p.trim();
            if p == "..." {
                variadic = true;
            } else {
                ps.push(parse_param(p));
            }
        }
        ps
    };
    // Offset of the declarator start within `head`: skip leading whitespace.
    let lead = head.len() - head.trim_start().len();
    Some((name.to_string(), return_type, params, variadic, lead))
}

/// Finds every top-level function definition by brace matching.
///
/// Returns the candidates in source order together with regions that
/// looked like definitions but could not be parsed. An unbalanced file
/// yields `Err(ExtractIssue::Unbalanced)`.
pub fn extract_functions(source: &str, provenance: &str) -> Result<(Vec<CandidateFunction>, Vec<ExtractIssue>), ExtractIssue> {
    let b = source.as_bytes();
    let mut funcs = Vec::new();
    let mut issues = Vec::new();
    let mut head_start = 0;
    let mut i = 0;
    let mut paren = 0i32;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'(' => paren += 1,
            b')' => paren -= 1,
            b';' if paren == 0 => head_start = i + 1,
            b'}' => return Err(ExtractIssue::Unbalanced),
            b'{' => {
                let close = matching_brace(b, i).ok_or(ExtractIssue::Unbalanced)?;
                let head = &source[head_start..i];
                let initializer = head.trim_end().ends_with('=');
                let aggregate = {
                    let h = head.trim();
                    h.starts_with("struct") || h.starts_with("union") || h.starts_with("enum") || h.starts_with("typedef")
                };
                if !initializer && !aggregate && paren == 0 {
                    match parse_head(head) {
                        Some((name, return_type, params, variadic, lead)) => {
                            let body = &source[i + 1..close];
                            funcs.push(CandidateFunction {
                                name,
                                source: source[head_start + lead..=close].to_string(),
                                return_type,
                                params,
                                provenance: provenance.to_string(),
                                variadic,
                                empty_body: body.trim().is_empty(),
                            });
                        }
                        None => issues.push(ExtractIssue::Unrecognized {
                            head: head.trim().chars().take(120).collect(),
                        }),
                    }
                }
                i = close;
                head_start = close + 1;
                // A trailing `;` after `struct {...} x;` is handled by the `;` arm.
            }
            _ => {}
        }
        i += 1;
    }
    Ok((funcs, issues))
}

fn matching_brace(b: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = open;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}
