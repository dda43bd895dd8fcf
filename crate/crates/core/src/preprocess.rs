//! Tweet normalization and tokenization.
//!
//! Normalization lowercases the text, replaces URLs with `HTTP`, user
//! mentions with `userID` and every digit with `D`, truncates elongated
//! character runs to two, and drops all punctuation except `.` `;` `?` `!`,
//! which become standalone tokens. The placeholders are written in their
//! canonical case and are left alone by the lowercasing and run-truncation
//! steps, so normalizing already-normalized text is a no-op.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;

pub const URL_TOKEN: &str = "HTTP";
pub const USER_TOKEN: &str = "userID";
pub const DIGIT_CHAR: char = 'D';

const KEPT_PUNCTUATION: [char; 4] = ['.', ';', '?', '!'];
const PLACEHOLDERS: [&str; 2] = [URL_TOKEN, USER_TOKEN];

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").expect("valid url regex"))
}

fn mention_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").expect("valid mention regex"))
}

/// Ordered sequence of tokens produced by [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Normalizes raw tweet text. Total on all strings; the input is not modified.
pub fn normalize(raw: &str) -> String {
    let lowered = lowercase_keeping_placeholders(raw);
    let urls = url_pattern().replace_all(&lowered, URL_TOKEN);
    let mentions = mention_pattern().replace_all(&urls, USER_TOKEN);
    let truncated = truncate_runs(&mentions);
    let digits: String = truncated
        .chars()
        .map(|c| if c.is_numeric() { DIGIT_CHAR } else { c })
        .collect();
    let spaced = strip_punctuation(&digits);
    // Removing punctuation can join runs across the removed characters.
    let spaced = truncate_runs(&spaced);
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits normalized text on whitespace runs.
pub fn tokenize(normalized: &str) -> TokenSequence {
    normalized.split_whitespace().collect()
}

/// `tokenize(normalize(raw))`.
pub fn preprocess(raw: &str) -> TokenSequence {
    tokenize(&normalize(raw))
}

fn lowercase_keeping_placeholders(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    'outer: while let Some(c) = rest.chars().next() {
        for placeholder in PLACEHOLDERS {
            if rest.starts_with(placeholder) {
                out.push_str(placeholder);
                rest = &rest[placeholder.len()..];
                continue 'outer;
            }
        }
        if c == DIGIT_CHAR {
            out.push(c);
        } else {
            out.extend(c.to_lowercase());
        }
        rest = &rest[c.len_utf8()..];
    }
    out
}

/// Truncates every maximal run of three or more identical characters to
/// two. Runs of the digit placeholder are kept at full length.
fn truncate_runs(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev = None;
    let mut run = 0usize;
    for c in s.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 || c == DIGIT_CHAR {
            out.push(c);
        }
    }
    out
}

fn strip_punctuation(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        if c.is_whitespace() {
            out.push(' ');
        } else if KEPT_PUNCTUATION.contains(&c) {
            out.push(' ');
            out.push(c);
            out.push(' ');
        } else if c.is_alphabetic() {
            out.push(c);
        }
    }
    out
}
