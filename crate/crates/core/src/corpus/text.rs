//! Tweet text normalization.

use std::sync::LazyLock;

use regex::Regex;

static HYPERLINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap());
static RETWEET_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bRT\s+@\w+:?").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());

/// Normalizes a tweet in five passes: hyperlinks, emoji, retweet markers
/// and mentions are removed, every character other than an ASCII letter,
/// digit or `#` becomes a separator, and the result is lowercased with
/// whitespace collapsed.
///
/// `#` survives so hashtag keywords stay matchable.
pub fn preprocess(raw: &str) -> String {
    let text = HYPERLINK.replace_all(raw, " ");
    let text: String = text
        .chars()
        .map(|c| if is_emoji(c) { ' ' } else { c })
        .collect();
    let text = RETWEET_MARKER.replace_all(&text, " ");
    let text = MENTION.replace_all(&text, " ");

    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            'a'..='z' | '0'..='9' | '#' => out.push(c),
            'A'..='Z' => out.push(c.to_ascii_lowercase()),
            // joined rather than split, so `#caa_nrc` and `don't` stay one token
            '_' | '\'' | '\u{2019}' => {}
            _ => out.push(' '),
        }
    }
    collapse_whitespace(&out)
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for token in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Emoji code points, including the joiners and selectors that glue
/// multi-code-point emoji together.
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF   // mahjong .. symbols & pictographs ext-A, incl. flags
        | 0x2300..=0x23FF   // misc technical (watch, hourglass, ...)
        | 0x2460..=0x24FF   // enclosed alphanumerics
        | 0x25A0..=0x27BF   // geometric shapes, misc symbols, dingbats
        | 0x2900..=0x297F
        | 0x2B00..=0x2BFF
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0x00A9 | 0x00AE | 0x203C | 0x2049 | 0x2122 | 0x2139
        | 0x2194..=0x21AA
        | 0x200D            // zero width joiner
        | 0x20E3            // combining keycap
        | 0xFE00..=0xFE0F   // variation selectors
        | 0xE0020..=0xE007F // tag sequences
    )
}

/// Whitespace tokens of an already-normalized text.
pub fn tokens(clean: &str) -> impl Iterator<Item = &str> {
    clean.split_whitespace()
}
