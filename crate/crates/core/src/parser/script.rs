//! Straight-line call scripts: one `name("input")` or `name()` per line.
//! Comments and blank lines are skipped; everything else is rejected.

use super::ParseError;
use crate::behavior::{Behavior, Step};

fn unsupported(line: usize, text: &str) -> ParseError {
    ParseError::UnsupportedConstruct {
        line,
        text: text.trim().to_string(),
    }
}

/// Parses a Python string literal at the start of `s`; returns it and the rest.
fn string_literal(s: &str) -> Option<(String, &str)> {
    let mut chars = s.char_indices();
    let (_, quote) = chars.next().filter(|(_, c)| *c == '"' || *c == '\'')?;
    let mut out = String::new();
    while let Some((i, c)) = chars.next() {
        match c {
            c if c == quote => return Some((out, &s[i + 1..])),
            '\n' => return None,
            '\\' => {
                let (_, e) = chars.next()?;
                match e {
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    '\\' | '"' | '\'' => out.push(e),
                    'x' => {
                        let hex: String = (0..2).filter_map(|_| chars.next().map(|(_, h)| h)).collect();
                        let code = u32::from_str_radix(&hex, 16).ok().filter(|_| hex.len() == 2)?;
                        out.push(char::from_u32(code)?);
                    }
                    _ => return None,
                }
            }
            c => out.push(c),
        }
    }
    None
}

fn parse_call(line: &str) -> Option<Step> {
    let name_len = line
        .find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
        .unwrap_or(line.len());
    if name_len == 0 {
        return None;
    }
    let (name, rest) = line.split_at(name_len);
    let rest = rest.trim_start().strip_prefix('(')?.trim_start();
    let (input, rest) = match rest.strip_prefix(')') {
        Some(after) => (String::new(), after),
        None => {
            let (lit, after) = string_literal(rest)?;
            (lit, after.trim_start().strip_prefix(')')?)
        }
    };
    let rest = rest.trim();
    if !(rest.is_empty() || rest.starts_with('#')) {
        return None;
    }
    Some(Step::new(name, input))
}

pub fn parse_script(payload: &str) -> Result<Behavior, ParseError> {
    let mut steps = Vec::new();
    for (i, raw) in payload.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        steps.push(parse_call(line).ok_or_else(|| unsupported(i + 1, raw))?);
    }
    Ok(Behavior::sequence(steps))
}
