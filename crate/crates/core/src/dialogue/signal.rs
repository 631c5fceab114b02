use serde::{Deserialize, Serialize};

/// The Skeptic's parsed stage-5 reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionSignal {
    pub changed: bool,
    pub reasoning: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignalError {
    #[error("reply is empty")]
    Empty,
    #[error("reply does not begin with Yes or No: {0:?}")]
    AmbiguousSignal(String),
}

fn is_wrapper(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '"' | '\'' | '`' | '\u{201C}' | '\u{201D}' | '\u{2018}' | '\u{2019}' | '\u{00AB}'
                | '\u{00BB}' | '*' | '_'
        )
}

fn is_separator(c: char) -> bool {
    is_wrapper(c) || c.is_ascii_punctuation() || matches!(c, '\u{2013}' | '\u{2014}' | '\u{2026}')
}

/// Strips `token` (ASCII, lowercase) from the front of `text` when it appears
/// case-insensitively and is not followed by another letter.
fn strip_token<'a>(text: &'a str, token: &str) -> Option<&'a str> {
    let head = text.get(..token.len())?;
    if !head.eq_ignore_ascii_case(token) {
        return None;
    }
    let rest = &text[token.len()..];
    match rest.chars().next() {
        Some(c) if c.is_alphabetic() => None,
        _ => Some(rest),
    }
}

/// Reads a binary stance from a reply that should open with "Yes" or "No".
///
/// Leading whitespace, quotation marks and markdown emphasis are skipped.
/// Anything else in front of the token makes the reply ambiguous; it is never
/// coerced into a stance.
pub fn parse_opinion_signal(text: &str) -> Result<OpinionSignal, SignalError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SignalError::Empty);
    }
    let body = trimmed.trim_start_matches(is_wrapper);
    let (changed, rest) = if let Some(rest) = strip_token(body, "yes") {
        (true, rest)
    } else if let Some(rest) = strip_token(body, "no") {
        (false, rest)
    } else {
        return Err(SignalError::AmbiguousSignal(text.to_string()));
    };
    Ok(OpinionSignal {
        changed,
        reasoning: rest.trim_start_matches(is_separator).trim_end().to_string(),
        raw: text.to_string(),
    })
}
