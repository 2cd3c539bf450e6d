//! Tokenization, stopword removal and suffix stemming.

use super::RedactedNarrative;
use crate::{Error, Result};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub crash_key: i64,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords::builtin()
    }
}

impl Stopwords {
    pub fn builtin() -> Self {
        Stopwords::parse(BUILTIN_STOPWORDS)
    }

    /// The shipped list, verbatim.
    pub fn builtin_text() -> &'static str {
        BUILTIN_STOPWORDS
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stopwords::parse(&text))
    }

    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Stopwords { words }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn placeholder_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<[a-z_]+>").expect("placeholder regex"))
}

/// Turns a redacted narrative into stemmed tokens.
///
/// Placeholders are dropped, apostrophes are deleted, everything that is
/// not an ASCII letter separates tokens, and tokens shorter than two
/// characters or in `stopwords` are discarded before stemming.
pub fn normalize(narrative: &RedactedNarrative, stopwords: &Stopwords) -> TokenizedDoc {
    let stripped = placeholder_pattern().replace_all(&narrative.text, " ");
    let lowered: String = stripped
        .chars()
        .filter(|&c| c != '\'' && c != '\u{2019}')
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let tokens = lowered
        .split(|c: char| !c.is_ascii_lowercase())
        .filter(|t| t.len() >= 2 && !stopwords.contains(t))
        .map(stem)
        .collect();
    TokenizedDoc { crash_key: narrative.crash_key, tokens }
}

fn is_vowel(b: u8) -> bool {
    matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y')
}

/// Light suffix stemmer for lowercase ASCII words.
///
/// Strips plural `s`, `ed`/`ing`, `ly` and a trailing `e`, so
/// `consumes`, `consumed` and `consuming` all become `consum`.
pub fn stem(word: &str) -> String {
    let mut s = word.to_string();
    if s.len() <= 3 {
        return s;
    }

    if s.ends_with("sses") {
        s.truncate(s.len() - 2);
    } else if s.ends_with("ies") {
        s.truncate(s.len() - 3);
        s.push('y');
    } else if s.ends_with("ss") || s.ends_with("us") || s.ends_with("is") {
    } else if s.ends_with('s') {
        s.pop();
    }

    if s.ends_with("eed") {
    } else if s.ends_with("ied") && s.len() > 4 {
        s.truncate(s.len() - 3);
        s.push('y');
    } else {
        for suffix in ["ing", "ed"] {
            if let Some(base) = s.strip_suffix(suffix) {
                if base.len() >= 3 && base.bytes().any(is_vowel) {
                    let b = base.as_bytes();
                    let n = b.len();
                    let undouble = b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z');
                    s.truncate(if undouble { n - 1 } else { n });
                }
                break;
            }
        }
    }

    if s.len() > 5 && s.ends_with("ly") {
        s.truncate(s.len() - 2);
    }
    if s.len() > 4 && s.ends_with('e') && !s.ends_with("ee") {
        s.pop();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::redact;

    fn toks(s: &str) -> Vec<String> {
        normalize(&redact(s), &Stopwords::builtin()).tokens
    }

    #[test]
    fn example_sentence() {
        assert_eq!(toks("Driver was IMPAIRED."), vec!["driver", "impair"]);
    }

    #[test]
    fn stemming_conflates_inflections() {
        for w in ["consuming", "consumed", "consumes"] {
            assert_eq!(stem(w), "consum", "{w}");
        }
        assert_eq!(stem("stopped"), "stop");
        assert_eq!(stem("rolled"), "roll");
        assert_eq!(stem("drinking"), "drink");
        assert_eq!(stem("drinks"), "drink");
        assert_eq!(stem("injuries"), "injury");
        assert_eq!(stem("speed"), "speed");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("sing"), "sing");
        assert_eq!(stem("quickly"), "quick");
        assert_eq!(stem("car"), "car");
    }

    #[test]
    fn placeholders_digits_and_apostrophes() {
        assert_eq!(toks("John's vehicle hit <PLATE> at 55 mph"), vec!["vehicl", "hit", "mph"]);
        assert_eq!(toks("driver's"), vec!["driver"]);
        assert!(toks("").is_empty());
        assert!(toks("<name> <Phone>").is_empty());
    }

    #[test]
    fn negations_survive() {
        let t = toks("driver was not impaired and had no odor");
        assert!(t.contains(&"not".to_string()));
        assert!(t.contains(&"no".to_string()));
    }

    #[test]
    fn custom_stopwords() {
        let sw = Stopwords::parse("# comment\ndriver\n\n");
        assert_eq!(sw.len(), 1);
        let r = redact("Driver fled");
        assert_eq!(normalize(&r, &sw).tokens, vec!["fled"]);
    }
}
