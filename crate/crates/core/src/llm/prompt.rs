use serde::{Deserialize, Serialize};

pub const DEFAULT_INSTRUCTION: &str =
    "Abstract the variables of the log and output the static template, marking each variable as <*>.";

/// An in-context-learning prompt: instruction, `shot_count` demonstration
/// pairs in the order given, then the query log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub instruction: String,
    pub demonstrations: Vec<(String, String)>,
    pub query: String,
    pub shot_count: usize,
}

impl PromptSpec {
    pub fn new(
        instruction: impl Into<String>,
        demonstrations: Vec<(String, String)>,
        query: impl Into<String>,
    ) -> Self {
        Self {
            instruction: instruction.into(),
            shot_count: demonstrations.len(),
            demonstrations,
            query: query.into(),
        }
    }

    /// Prompt text:
    ///
    /// ```text
    /// <instruction>
    ///
    /// Log: <demo log>
    /// Template: <demo template>
    ///
    /// Log: <query>
    /// Template:
    /// ```
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(
            self.instruction.len()
                + self.query.len()
                + 32
                + self
                    .demonstrations
                    .iter()
                    .map(|(l, t)| l.len() + t.len() + 24)
                    .sum::<usize>(),
        );
        out.push_str(&self.instruction);
        out.push_str("\n\n");
        for (log, template) in &self.demonstrations {
            out.push_str("Log: ");
            out.push_str(log);
            out.push_str("\nTemplate: ");
            out.push_str(template);
            out.push_str("\n\n");
        }
        out.push_str("Log: ");
        out.push_str(&self.query);
        out.push_str("\nTemplate:");
        out
    }
}

/// Builds a prompt with the default instruction.
pub fn build_prompt(demos: Vec<(String, String)>, query: impl Into<String>) -> PromptSpec {
    PromptSpec::new(DEFAULT_INSTRUCTION, demos, query)
}
