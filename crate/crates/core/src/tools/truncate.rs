use std::sync::OnceLock;

use regex::Regex;

/// Head/tail character budget for tool output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputLimits {
    pub head: usize,
    pub tail: usize,
}

impl OutputLimits {
    /// Shell and script output: solver logs matter most at the end.
    pub const SHELL: OutputLimits = OutputLimits { head: 2048, tail: 6144 };
    /// Retrieved documents are meant to reach the model whole.
    pub const RETRIEVAL: OutputLimits = OutputLimits {
        head: 60 * 1024,
        tail: 4 * 1024,
    };
}

fn marker(elided: usize) -> String {
    format!("\n…[{elided} chars elided]…\n")
}

fn marker_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\n…\[\d+ chars elided\]…\n$").unwrap())
}

/// Keep the first `head` and last `tail` characters of `text`, replacing the
/// middle with an elision marker. Returns the text and whether it was cut.
/// Text that is already a truncation result for the same limits is returned
/// unchanged.
pub fn truncate_output(text: &str, head: usize, tail: usize) -> (String, bool) {
    let char_count = text.chars().count();
    if char_count <= head + tail {
        return (text.to_string(), false);
    }
    let head_end = text.char_indices().nth(head).map(|(i, _)| i).unwrap_or(text.len());
    let tail_start = if tail == 0 {
        text.len()
    } else {
        text.char_indices().nth(char_count - tail).map(|(i, _)| i).unwrap_or(text.len())
    };
    if marker_pattern().is_match(&text[head_end..tail_start]) {
        return (text.to_string(), true);
    }
    let elided = char_count - head - tail;
    let mut out = String::with_capacity(head_end + (text.len() - tail_start) + 32);
    out.push_str(&text[..head_end]);
    out.push_str(&marker(elided));
    out.push_str(&text[tail_start..]);
    (out, true)
}
