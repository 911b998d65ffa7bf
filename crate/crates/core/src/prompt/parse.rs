use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedTags {
    pub tags: Vec<String>,
    /// The completion held a different number of tags than expected.
    pub mismatch: bool,
}

/// Text between the first pair of delimiters, trying `` … '', then
/// `…`, then "…".
fn first_quoted(text: &str) -> Option<&str> {
    for (open, close) in [("``", "''"), ("`", "`"), ("\"", "\"")] {
        if let Some(start) = text.find(open) {
            let rest = &text[start + open.len()..];
            if let Some(end) = rest.find(close) {
                return Some(rest[..end].trim());
            }
        }
    }
    None
}

fn is_quote_mark(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| matches!(c, '`' | '\'' | '"'))
}

/// Reads a tag sequence of exactly `expected_len` out of a completion.
/// Extra tags are dropped and missing ones become `O`.
pub fn parse_tags(completion: &str, expected_len: usize) -> ParsedTags {
    let run = first_quoted(completion).unwrap_or_else(|| completion.trim());
    let mut tags: Vec<String> = run.split_whitespace().filter(|t| !is_quote_mark(t)).map(str::to_string).collect();
    let mismatch = tags.len() != expected_len;
    tags.resize(expected_len, "O".to_string());
    ParsedTags { tags, mismatch }
}
