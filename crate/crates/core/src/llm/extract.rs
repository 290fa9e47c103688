use super::LlmError;
use crate::model::{normalize, Template};

const MARKER: &str = "Template:";

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\'', '`'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return s[1..s.len() - 1].trim();
        }
    }
    s
}

/// Pulls a template out of a free-form model response.
///
/// Code-fence lines are dropped; the text after the last `Template:` marker
/// (or, without a marker, the first non-empty line) is unquoted and
/// normalized. A result with no alphanumeric character is rejected.
pub fn extract_template(response: &str) -> Result<Template, LlmError> {
    let unfenced: Vec<&str> = response
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let body = unfenced.join("\n");
    let tail = match body.rfind(MARKER) {
        Some(i) => &body[i + MARKER.len()..],
        None => body.as_str(),
    };
    let line = tail.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let text = normalize(strip_quotes(line));
    if !text.chars().any(char::is_alphanumeric) {
        return Err(LlmError::UnparseableResponse(response.chars().take(200).collect()));
    }
    Template::new(text).map_err(|e| LlmError::UnparseableResponse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(r: &str) -> String {
        extract_template(r).unwrap().text().to_owned()
    }

    #[test]
    fn marker() {
        assert_eq!(
            text("Template: session closed for user <*>"),
            "session closed for user <*>"
        );
        assert_eq!(text("Log: x\nTemplate: a <*>\nLog: y\nTemplate:  b   <*>\n"), "b <*>");
    }

    #[test]
    fn fences() {
        assert_eq!(
            text("```\nsession closed for user <*>\n```"),
            "session closed for user <*>"
        );
        assert_eq!(text("```text\nTemplate: `a <*>`\n```"), "a <*>");
    }

    #[test]
    fn quotes_only_in_pairs() {
        assert_eq!(text("\"x = <*>\""), "x = <*>");
        assert_eq!(text("value=\"<*>\""), "value=\"<*>\"");
    }

    #[test]
    fn degenerate() {
        assert!(matches!(extract_template(""), Err(LlmError::UnparseableResponse(_))));
        assert!(extract_template("Template:").is_err());
        assert!(extract_template("<*> <*>").is_err());
        assert!(extract_template("```\n```").is_err());
    }

    #[test]
    fn plain_first_line() {
        assert_eq!(text("\n\n  job <*> done \nextra chatter"), "job <*> done");
    }
}
