//! Splitting a line into tokens. A token is either bare (characters from a
//! fixed safe set) or a double-quoted string with backslash escapes.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub text: String,
    /// 1-based character column of the token's first character.
    pub column: usize,
}

pub(crate) fn is_bare_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | ':' | '/' | '@' | '+' | '-')
}

/// Renders `text` as a single token, quoting only when needed.
pub(crate) fn quote(text: &str) -> String {
    if !text.is_empty() && text.chars().all(is_bare_char) {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Tokenizes one line. Errors carry the 1-based column of the offending
/// character.
pub(crate) fn tokenize(line: &str) -> Result<Vec<Token>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' || c == '\t' {
            i += 1;
            continue;
        }
        let start = i;
        if c == '"' {
            i += 1;
            let mut text = String::new();
            loop {
                let Some(&c) = chars.get(i) else {
                    return Err((start + 1, "unterminated string".into()));
                };
                i += 1;
                match c {
                    '"' => break,
                    '\\' => {
                        let Some(&e) = chars.get(i) else {
                            return Err((i, "unterminated escape".into()));
                        };
                        i += 1;
                        match e {
                            '"' => text.push('"'),
                            '\\' => text.push('\\'),
                            'n' => text.push('\n'),
                            'r' => text.push('\r'),
                            't' => text.push('\t'),
                            'u' => {
                                let (ch, next) = unicode_escape(&chars, i)?;
                                text.push(ch);
                                i = next;
                            }
                            other => return Err((i, format!("unknown escape `\\{other}`"))),
                        }
                    }
                    c => text.push(c),
                }
            }
            if chars.get(i).is_some_and(|c| *c != ' ' && *c != '\t') {
                return Err((i + 1, "expected whitespace after string".into()));
            }
            tokens.push(Token {
                text,
                column: start + 1,
            });
        } else if is_bare_char(c) {
            while i < chars.len() && is_bare_char(chars[i]) {
                i += 1;
            }
            if chars.get(i).is_some_and(|c| *c != ' ' && *c != '\t') {
                return Err((i + 1, format!("unexpected character `{}`", chars[i])));
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                column: start + 1,
            });
        } else {
            return Err((i + 1, format!("unexpected character `{c}`")));
        }
    }
    Ok(tokens)
}

/// Parses `{hex}` after `\u`, starting at `at`; returns the character and
/// the index after the closing brace.
fn unicode_escape(chars: &[char], at: usize) -> Result<(char, usize), (usize, String)> {
    if chars.get(at) != Some(&'{') {
        return Err((at + 1, "expected `{` after `\\u`".into()));
    }
    let close = chars[at..]
        .iter()
        .position(|c| *c == '}')
        .map(|p| at + p)
        .ok_or((at + 1, "unterminated `\\u{...}` escape".to_owned()))?;
    let hex: String = chars[at + 1..close].iter().collect();
    let ch = u32::from_str_radix(&hex, 16)
        .ok()
        .filter(|_| !hex.is_empty() && hex.len() <= 6)
        .and_then(char::from_u32)
        .ok_or((at + 2, format!("invalid code point `{hex}`")))?;
    Ok((ch, close + 1))
}
