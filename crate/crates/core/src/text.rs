//! Word-level tokenization with byte offsets.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn is_word(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_alphanumeric)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '-' | '\u{2019}')
}

/// Splits into word tokens (alphanumeric runs, with internal `'` or `-`) and
/// single-character punctuation tokens. Whitespace is dropped.
pub fn tokenize(s: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if is_word_char(cj) {
                    j += 1;
                } else if is_joiner(cj) && j + 1 < chars.len() && is_word_char(chars[j + 1].1) {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(s.len(), |(b, _)| *b);
            out.push(Token { text: &s[start..end], start, end });
            i = j;
        } else {
            let end = chars.get(i + 1).map_or(s.len(), |(b, _)| *b);
            out.push(Token { text: &s[start..end], start, end });
            i += 1;
        }
    }
    out
}

/// Lower-cased word tokens only.
pub fn words_lower(s: &str) -> Vec<String> {
    tokenize(s).into_iter().filter(Token::is_word).map(|t| t.text.to_lowercase()).collect()
}

pub fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub const ARTICLES: &[&str] = &["a", "an", "the"];

pub const PREPOSITIONS: &[&str] = &[
    "on", "in", "at", "with", "by", "near", "under", "over", "inside", "into", "onto", "behind",
    "beside", "from", "of", "to", "for", "through", "across", "along", "around", "next",
];

pub fn is_article(word: &str) -> bool {
    ARTICLES.iter().any(|a| a.eq_ignore_ascii_case(word))
}

pub fn is_preposition(word: &str) -> bool {
    PREPOSITIONS.iter().any(|p| p.eq_ignore_ascii_case(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_words_and_punctuation() {
        let toks: Vec<&str> = tokenize("The dog's tire-swing, outside.").iter().map(|t| t.text).collect();
        assert_eq!(toks, vec!["The", "dog's", "tire-swing", ",", "outside", "."]);
    }

    #[test]
    fn offsets_slice_back() {
        let s = "  Två  hundar springer!";
        for t in tokenize(s) {
            assert_eq!(&s[t.start..t.end], t.text);
        }
    }

    #[test]
    fn trailing_joiner_is_punctuation() {
        let toks: Vec<&str> = tokenize("dogs' -x").iter().map(|t| t.text).collect();
        assert_eq!(toks, vec!["dogs", "'", "-", "x"]);
    }
}
