use super::{FenceTag, FencedBlock, ParseError};

const FENCE: &str = "```";

enum State {
    Outside,
    /// Inside a block with a tag we do not handle; skipped wholesale.
    Foreign,
    Open { tag: FenceTag, start: usize, payload_start: usize, line: usize },
}

/// Splits into lines keeping byte offsets; the terminator is not part of the line.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').map(move |raw| {
        let start = offset;
        offset += raw.len();
        (start, raw.strip_suffix('\n').unwrap_or(raw))
    })
}

fn is_closing(line: &str) -> bool {
    line.strip_prefix(FENCE).is_some_and(|rest| rest.trim_end().is_empty())
}

/// Returns the first complete block tagged `python`, `json` or `xml`.
///
/// Fences count only at the very start of a line, and tags are matched
/// case-sensitively. Blocks with other tags are skipped together with
/// their content.
pub fn extract_fenced_block(text: &str) -> Result<FencedBlock, ParseError> {
    let mut state = State::Outside;
    for (lineno, (start, line)) in lines(text).enumerate() {
        state = match state {
            State::Outside => match line.strip_prefix(FENCE) {
                None => State::Outside,
                Some(info) => match FenceTag::from_info(info.trim_end()) {
                    Some(tag) => State::Open {
                        tag,
                        start,
                        payload_start: start + line.len() + 1,
                        line: lineno + 1,
                    },
                    None => State::Foreign,
                },
            },
            State::Foreign if is_closing(line) => State::Outside,
            State::Foreign => State::Foreign,
            State::Open {
                tag,
                start: block_start,
                payload_start,
                ..
            } if is_closing(line) => {
                // the newline before the closing fence belongs to the fence
                let payload_end = start.saturating_sub(1).max(payload_start);
                return Ok(FencedBlock {
                    tag,
                    payload: text[payload_start..payload_end].to_string(),
                    span: (block_start, start + line.len()),
                });
            }
            open => open,
        };
    }
    match state {
        State::Open { line, .. } => Err(ParseError::UnterminatedFence { line }),
        _ => Err(ParseError::NoFence),
    }
}
