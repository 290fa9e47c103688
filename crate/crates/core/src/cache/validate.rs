//! Structural matching of a normalized log against a template.

use serde::{Deserialize, Serialize};

use crate::model::Template;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// The template must describe the whole log: leading constants match at
    /// the start, trailing constants at the end, and every wildcard covers at
    /// least one character. Equivalent to the regex `^seg0.+seg1...$`.
    #[default]
    Anchored,
    /// Segments only have to occur in order, anywhere in the log.
    Unanchored,
}

/// Byte offset reached by stepping `count` characters forward from `from`.
fn advance_chars(s: &str, from: usize, count: usize) -> Option<usize> {
    if count == 0 {
        return Some(from);
    }
    s[from..]
        .char_indices()
        .nth(count)
        .map(|(i, _)| from + i)
        .or_else(|| (s[from..].chars().count() == count).then_some(s.len()))
}

pub fn validate(log_norm: &str, pattern: &Template) -> bool {
    validate_with(log_norm, pattern, MatchMode::Anchored)
}

pub fn validate_with(log_norm: &str, pattern: &Template, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Anchored => validate_anchored(log_norm, pattern),
        MatchMode::Unanchored => validate_unanchored(log_norm, pattern),
    }
}

fn validate_unanchored(log: &str, pattern: &Template) -> bool {
    let mut pos = 0;
    for segment in pattern.segments() {
        match log[pos..].find(segment.as_str()) {
            Some(i) => pos += i + segment.len(),
            None => return false,
        }
    }
    true
}

fn validate_anchored(log: &str, pattern: &Template) -> bool {
    let segments = pattern.segments();
    let gaps = pattern.gaps();
    let trailing = gaps[segments.len()];

    if segments.is_empty() {
        return log.chars().count() >= trailing;
    }

    let last = segments.len() - 1;
    let mut pos = 0usize;
    for (j, segment) in segments.iter().enumerate() {
        let Some(start_min) = advance_chars(log, pos, gaps[j]) else {
            return false;
        };
        if j == last && trailing == 0 {
            // Pinned to the end of the log.
            if log.len() < segment.len() || !log.ends_with(segment.as_str()) {
                return false;
            }
            let at = log.len() - segment.len();
            if at < start_min || (gaps[j] == 0 && at != start_min) {
                return false;
            }
            pos = log.len();
            break;
        }
        if gaps[j] == 0 {
            // No wildcard before: the segment must start exactly here.
            if !log[pos..].starts_with(segment.as_str()) {
                return false;
            }
            pos += segment.len();
        } else {
            // Leftmost occurrence leaves the most room for what follows.
            match log[start_min..].find(segment.as_str()) {
                Some(i) => pos = start_min + i + segment.len(),
                None => return false,
            }
        }
    }
    log[pos..].chars().count() >= trailing && (trailing > 0 || pos == log.len())
}
