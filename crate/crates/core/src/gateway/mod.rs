//! Text-completion backends and prompt assembly for the four agent roles.

mod backend;
mod http;
mod prompts;

pub use backend::{
    normalize_prompt, prompt_sha256, BackendError, BackendHandle, CompletionParams, TranscriptEntry,
};
pub use http::HttpConfig;
pub use prompts::{
    build_feedback_prompt, build_planner_prompt, build_refiner_prompt, fill_in_order, pick_shots,
    PromptError, Shot, FEEDBACK_SHOTS, FEEDBACK_TEMPLATE, MAX_PLANNER_SHOTS, PLANNER_TEMPLATE, REFINER_TEMPLATE,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Planner,
    Feedback,
    Refiner,
    Scrubber,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::Feedback => "feedback",
            Role::Refiner => "refiner",
            Role::Scrubber => "scrubber",
        }
    }
}

/// A rendered prompt plus what went into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: Role,
    pub text: String,
    pub shot_count: usize,
    pub shot_ids: Vec<String>,
    /// Logical stream the request belongs to, usually `<role>/<query id>`.
    /// Scripted and replayed backends keep reply order per stream.
    #[serde(default)]
    pub stream: String,
}

impl PromptBundle {
    pub fn on_stream(mut self, stream: impl Into<String>) -> Self {
        self.stream = stream.into();
        self
    }
}
