use serde::{Deserialize, Serialize};

/// Heuristic token count: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    ToolObservation,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::ToolObservation => "tool_observation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    pub token_estimate: usize,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        let token_estimate = estimate_tokens(&content);
        Self {
            role,
            content,
            token_estimate,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }

    pub fn observation(content: impl Into<String>) -> Self {
        Self::new(Role::ToolObservation, content)
    }
}

/// Ordered conversation state. Always opens with a system message followed
/// by the user's request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    messages: Vec<Message>,
    total_token_estimate: usize,
}

impl Transcript {
    pub fn new(system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        let mut transcript = Self {
            messages: Vec::new(),
            total_token_estimate: 0,
        };
        transcript.push(Message::system(system_prompt));
        transcript.push(Message::user(user_prompt));
        transcript
    }

    pub fn push(&mut self, message: Message) {
        self.total_token_estimate += message.token_estimate;
        self.messages.push(message);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last(&self) -> Option<&Message> {
        self.messages.last()
    }

    pub fn total_token_estimate(&self) -> usize {
        self.total_token_estimate
    }

    pub fn count_role(&self, role: Role) -> usize {
        self.messages.iter().filter(|m| m.role == role).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_examples() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens(&"a".repeat(4000)), 1000);
        assert_eq!(estimate_tokens("abcde"), 2);
        // multi-byte characters count by bytes
        assert_eq!(estimate_tokens("é"), 1);
        assert_eq!(estimate_tokens("ééé"), 2);
    }

    #[test]
    fn transcript_tracks_total() {
        let mut t = Transcript::new("sys", "hello world");
        t.push(Message::assistant("abcde"));
        let sum: usize = t.messages().iter().map(|m| m.token_estimate).sum();
        assert_eq!(t.total_token_estimate(), sum);
        assert_eq!(t.messages()[0].role, Role::System);
        assert_eq!(t.messages()[1].role, Role::User);
    }

    proptest::proptest! {
        #[test]
        fn estimate_is_subadditive(a in ".{0,64}", b in ".{0,64}") {
            let joined = format!("{a}{b}");
            proptest::prop_assert!(estimate_tokens(&joined) <= estimate_tokens(&a) + estimate_tokens(&b) + 1);
            proptest::prop_assert!(estimate_tokens(&joined) >= estimate_tokens(&a));
        }
    }
}
