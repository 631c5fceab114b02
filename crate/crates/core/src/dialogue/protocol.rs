use std::collections::BTreeMap;

use super::chat_template::{render_chat_prompt, Direction, TemplateError};
use super::signal::{parse_opinion_signal, SignalError};
use super::{
    DialogueTranscript, Message, Outcome, PromptCatalog, SocialDimension, Speaker,
    StubbornnessLevel,
};
use crate::gateway::{ChatBackend, ChatMessage, CompletionRequest, GatewayError, RequestContext};

/// Identity and condition of a single dialogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueSpec {
    pub id: String,
    pub dimension: SocialDimension,
    pub stubbornness: StubbornnessLevel,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum DialogueError {
    #[error("backend failed at stage {stage}: {source}")]
    Backend {
        stage: u8,
        #[source]
        source: GatewayError,
    },
    #[error("backend returned an empty reply at stage {0}")]
    EmptyReply(u8),
    #[error("rendering prompt: {0}")]
    Template(#[from] TemplateError),
}

/// Builds the request for `speaker`, who sees its own messages as outgoing.
fn request_for(
    speaker: Speaker,
    system: &str,
    log: &[Message],
    spec: &DialogueSpec,
    stage: u8,
) -> Result<CompletionRequest, TemplateError> {
    let history: Vec<(Direction, &str)> = log
        .iter()
        .map(|m| {
            let dir = if m.speaker == speaker {
                Direction::Outgoing
            } else {
                Direction::Incoming
            };
            (dir, m.text.as_str())
        })
        .collect();
    let prompt = render_chat_prompt(system, &history)?;
    let mut messages = Vec::with_capacity(log.len() + 1);
    messages.push(ChatMessage::system(system));
    messages.extend(history.iter().map(|(dir, text)| match dir {
        Direction::Incoming => ChatMessage::user(*text),
        Direction::Outgoing => ChatMessage::assistant(*text),
    }));
    Ok(CompletionRequest {
        prompt,
        messages,
        seed: spec.seed,
        context: Some(RequestContext {
            stage,
            dimension: spec.dimension,
            stubbornness: spec.stubbornness,
        }),
    })
}

fn generate(
    backend: &dyn ChatBackend,
    speaker: Speaker,
    system: &str,
    log: &[Message],
    spec: &DialogueSpec,
    stage: u8,
) -> Result<Message, DialogueError> {
    let request = request_for(speaker, system, log, spec, stage)?;
    let response = backend
        .complete(&request)
        .map_err(|source| DialogueError::Backend { stage, source })?;
    let text = response.text.trim().to_string();
    if text.is_empty() {
        return Err(DialogueError::EmptyReply(stage));
    }
    Ok(Message {
        speaker,
        stage,
        text,
    })
}

/// Runs the five-stage protocol against `backend`.
///
/// Both agents keep the full cumulative log. A stage-5 reply without a
/// leading Yes/No still yields a transcript, with `outcome.valid == false`.
pub fn run_dialogue(
    backend: &dyn ChatBackend,
    catalog: &PromptCatalog,
    spec: &DialogueSpec,
) -> Result<DialogueTranscript, DialogueError> {
    let convincer_system = catalog.convincer_system_prompt(spec.dimension);
    let skeptic_system = catalog.skeptic_system_prompt(spec.stubbornness);

    let mut log = Vec::with_capacity(5);
    log.push(Message {
        speaker: Speaker::Skeptic,
        stage: 1,
        text: catalog.opening().to_string(),
    });
    let argument = generate(backend, Speaker::Convincer, &convincer_system, &log, spec, 2)?;
    log.push(argument);
    let response = generate(backend, Speaker::Skeptic, &skeptic_system, &log, spec, 3)?;
    log.push(response);
    log.push(Message {
        speaker: Speaker::Convincer,
        stage: 4,
        text: catalog.closing_question().to_string(),
    });
    let verdict = generate(backend, Speaker::Skeptic, &skeptic_system, &log, spec, 5)?;

    let outcome = match parse_opinion_signal(&verdict.text) {
        Ok(signal) => Outcome::from_signal(&signal),
        Err(SignalError::AmbiguousSignal(_)) | Err(SignalError::Empty) => {
            tracing::warn!(id = %spec.id, "ambiguous opinion signal; excluding from estimates");
            Outcome::invalid(&verdict.text)
        }
    };
    log.push(verdict);

    let mut backend_meta: BTreeMap<String, String> = backend.metadata();
    backend_meta.insert("prompt_catalog_version".into(), catalog.version().into());

    Ok(DialogueTranscript {
        id: spec.id.clone(),
        dimension: spec.dimension,
        stubbornness: spec.stubbornness,
        seed: spec.seed,
        messages: log,
        outcome,
        backend_meta,
    })
}
