//! Prompt assembly around retrieved events, the chat-completions client and
//! answer-list parsing.

pub mod client;

use serde::Serialize;
use thiserror::Error;

pub use client::{ChatClient, ChatModel, LlmClientConfig};

use crate::embedding::render_event_text;
use crate::tkg::{EventId, TemporalKg};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("retrieval returned no events")]
    EmptyRetrieval,
    #[error("model returned an empty response")]
    EmptyResponse,
    #[error("no answer candidates in response")]
    NoCandidates,
    #[error("LLM request failed: {0}")]
    Llm(String),
    #[error("LLM request timed out")]
    Timeout,
}

pub const SYSTEM_INSTRUCTION: &str = "As an advanced reading comprehension assistant, your task is to analyze multiple triple facts and corresponding questions with time constraints meticulously.\n\n\
Your response start after \"Thought: \", where you will methodically break down the reasoning process, illustrating how you arrive at conclusions.\n\n\
Keep subject/object orientation. Match the same base relation. Apply temporal operator precisely.\n\n\
Conclude with \"Answer: \" to present return 10 short answer candidates ranked best-to-worst, devoid of additional elaborations.";

pub const DEMONSTRATION: &str = "One-Shot Demonstration:\n\
Events:\n\
Event A: On 2010-08-30, European Central Bank criticized Romania.\n\
Event B: On 2011-02-14, European Central Bank criticized government of Germany.\n\
Question:\n\
Before Germany, who did the European Central Bank criticize last?\n\
Answer:\n\
Romania.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub demonstration: String,
    /// `"{n}. {event text}"` lines, numbered from 1 in retrieval order.
    pub events_block: String,
    pub question: String,
}

impl PromptBundle {
    pub fn user_message(&self) -> String {
        format!(
            "{}\n\nEvents:\n{}\nQuestion:\n{}\n",
            self.demonstration, self.events_block, self.question
        )
    }

    /// Whitespace-token count of system plus user text.
    pub fn token_count(&self) -> usize {
        count_tokens(&self.system_instruction) + count_tokens(&self.user_message())
    }
}

/// Token estimator used for all budget reporting.
pub const TOKEN_ESTIMATOR: &str = "whitespace";

pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn assemble_prompt(kg: &TemporalKg, events: &[EventId], question: &str) -> Result<PromptBundle, GenerationError> {
    if events.is_empty() {
        return Err(GenerationError::EmptyRetrieval);
    }
    let mut block = String::new();
    for (i, id) in events.iter().enumerate() {
        block.push_str(&format!("{}. {}\n", i + 1, render_event_text(kg, kg.event(*id))));
    }
    Ok(PromptBundle {
        system_instruction: SYSTEM_INSTRUCTION.to_string(),
        demonstration: DEMONSTRATION.to_string(),
        events_block: block,
        question: question.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerList {
    pub candidates: Vec<String>,
    pub raw_response: String,
    pub thought: Option<String>,
    /// No "Answer:" marker was found; the last non-empty line was used.
    pub lenient: bool,
}

pub const MAX_CANDIDATES: usize = 10;

fn clean_candidate(s: &str) -> String {
    let mut t = s.trim();
    // list markers: "1.", "1)", "-", "*", "•"
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if r.is_empty() || r.starts_with(char::is_whitespace) {
                t = r.trim_start();
            }
        }
    }
    for m in ["- ", "* ", "• "] {
        if let Some(r) = t.strip_prefix(m) {
            t = r.trim_start();
        }
    }
    t.trim_end_matches(['.', ',']).trim().to_string()
}

pub fn parse_answers(raw: &str) -> Result<AnswerList, GenerationError> {
    if raw.trim().is_empty() {
        return Err(GenerationError::EmptyResponse);
    }
    let Some(pos) = raw.rfind("Answer:") else {
        let last = raw.lines().rev().map(clean_candidate).find(|l| !l.is_empty());
        let candidate = last.ok_or(GenerationError::NoCandidates)?;
        return Ok(AnswerList {
            candidates: vec![candidate],
            raw_response: raw.to_string(),
            thought: None,
            lenient: true,
        });
    };
    let head = &raw[..pos];
    let thought = head.find("Thought").map(|t| {
        let after = &head[t..];
        let body = after.find(':').map_or("", |c| &after[c + 1..]);
        body.trim().to_string()
    });
    let candidates: Vec<String> = raw[pos + "Answer:".len()..]
        .split(['\n', ','])
        .map(clean_candidate)
        .filter(|c| !c.is_empty())
        .take(MAX_CANDIDATES)
        .collect();
    if candidates.is_empty() {
        return Err(GenerationError::NoCandidates);
    }
    Ok(AnswerList {
        candidates,
        raw_response: raw.to_string(),
        thought,
        lenient: false,
    })
}
