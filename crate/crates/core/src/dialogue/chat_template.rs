//! Llama-2 style chat wire format.
//!
//! ```text
//! <s>[INST] <<SYS>>\n{system}\n<</SYS>>\n\n{user} [/INST] {assistant} </s><s>[INST] {user} [/INST]
//! ```
//!
//! Stateless backends see the whole conversation log on every call, so the
//! rendered prompt carries every prior message.

const FIRST_OPEN: &str = "<s>[INST] <<SYS>>\n";
const SYS_CLOSE: &str = "\n<</SYS>>\n\n";
const TURN_OPEN: &str = "<s>[INST] ";
const INST_CLOSE: &str = " [/INST]";
const TURN_CLOSE: &str = " </s>";

/// Direction of a message relative to the agent being prompted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Spoken by the other agent (the `user` slot).
    Incoming,
    /// Spoken by the prompted agent itself (the `assistant` slot).
    Outgoing,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("chat history is empty")]
    EmptyHistory,
    #[error("chat history does not alternate at position {0}")]
    NonAlternatingHistory(usize),
    #[error("chat history must end with an incoming message")]
    EndsWithOutgoing,
    #[error("malformed chat prompt: {0}")]
    Malformed(&'static str),
}

/// Renders `system` and `history` into the wire string.
///
/// A history that opens with the agent's own message is rendered with an
/// empty first user slot, so the agent still sees what it said first.
pub fn render_chat_prompt(
    system: &str,
    history: &[(Direction, &str)],
) -> Result<String, TemplateError> {
    let Some(last) = history.last() else {
        return Err(TemplateError::EmptyHistory);
    };
    for (i, pair) in history.windows(2).enumerate() {
        if pair[0].0 == pair[1].0 {
            return Err(TemplateError::NonAlternatingHistory(i + 1));
        }
    }
    if last.0 == Direction::Outgoing {
        return Err(TemplateError::EndsWithOutgoing);
    }

    let mut out = String::with_capacity(
        system.len() + history.iter().map(|(_, t)| t.len() + 24).sum::<usize>() + 32,
    );
    out.push_str(FIRST_OPEN);
    out.push_str(system);
    out.push_str(SYS_CLOSE);

    let mut first_turn = true;
    let mut rest = history;
    if let Some(((Direction::Outgoing, _), _)) = history.split_first() {
        // empty opening user slot
        out.push_str(INST_CLOSE);
        first_turn = false;
    }
    while let Some(((direction, text), tail)) = rest.split_first() {
        match direction {
            Direction::Incoming => {
                if !first_turn {
                    out.push_str(TURN_OPEN);
                }
                out.push_str(text);
                out.push_str(INST_CLOSE);
                first_turn = false;
            }
            Direction::Outgoing => {
                out.push(' ');
                out.push_str(text);
                out.push_str(TURN_CLOSE);
            }
        }
        rest = tail;
    }
    Ok(out)
}

/// Inverse of [`render_chat_prompt`] for messages free of the delimiters.
pub fn parse_chat_prompt(prompt: &str) -> Result<(String, Vec<(Direction, String)>), TemplateError> {
    let body = prompt
        .strip_prefix(FIRST_OPEN)
        .ok_or(TemplateError::Malformed("missing system header"))?;
    let sys_end = body
        .find(SYS_CLOSE)
        .ok_or(TemplateError::Malformed("unterminated system block"))?;
    let system = body[..sys_end].to_string();
    let mut rest = &body[sys_end + SYS_CLOSE.len()..];

    let mut history = Vec::new();
    let mut first_turn = true;
    loop {
        if !first_turn {
            rest = rest
                .strip_prefix(TURN_OPEN)
                .ok_or(TemplateError::Malformed("missing turn opener"))?;
        }
        let user_end = rest
            .find(INST_CLOSE)
            .ok_or(TemplateError::Malformed("unterminated user turn"))?;
        let user = &rest[..user_end];
        if !(first_turn && user.is_empty()) {
            history.push((Direction::Incoming, user.to_string()));
        }
        rest = &rest[user_end + INST_CLOSE.len()..];
        first_turn = false;
        if rest.is_empty() {
            break;
        }
        let after_space = rest
            .strip_prefix(' ')
            .ok_or(TemplateError::Malformed("missing assistant separator"))?;
        let assistant_end = after_space
            .find(TURN_CLOSE)
            .ok_or(TemplateError::Malformed("unterminated assistant turn"))?;
        history.push((
            Direction::Outgoing,
            after_space[..assistant_end].to_string(),
        ));
        rest = &after_space[assistant_end + TURN_CLOSE.len()..];
    }
    if history.is_empty() {
        return Err(TemplateError::EmptyHistory);
    }
    Ok((system, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Direction::{Incoming, Outgoing};

    #[test]
    fn single_turn() {
        assert_eq!(
            render_chat_prompt("S", &[(Incoming, "U")]).unwrap(),
            "<s>[INST] <<SYS>>\nS\n<</SYS>>\n\nU [/INST]"
        );
    }

    #[test]
    fn multi_turn() {
        assert_eq!(
            render_chat_prompt("S", &[(Incoming, "U1"), (Outgoing, "A1"), (Incoming, "U2")])
                .unwrap(),
            "<s>[INST] <<SYS>>\nS\n<</SYS>>\n\nU1 [/INST] A1 </s><s>[INST] U2 [/INST]"
        );
    }

    #[test]
    fn leading_outgoing_gets_empty_user_slot() {
        assert_eq!(
            render_chat_prompt("S", &[(Outgoing, "A0"), (Incoming, "U1")]).unwrap(),
            "<s>[INST] <<SYS>>\nS\n<</SYS>>\n\n [/INST] A0 </s><s>[INST] U1 [/INST]"
        );
    }

    #[test]
    fn invalid_histories() {
        assert_eq!(render_chat_prompt("S", &[]), Err(TemplateError::EmptyHistory));
        assert_eq!(
            render_chat_prompt("S", &[(Incoming, "a"), (Incoming, "b")]),
            Err(TemplateError::NonAlternatingHistory(1))
        );
        assert_eq!(
            render_chat_prompt("S", &[(Incoming, "a"), (Outgoing, "b")]),
            Err(TemplateError::EndsWithOutgoing)
        );
    }

    fn text() -> impl Strategy<Value = String> {
        // no delimiter substrings: drop brackets, angle brackets and newlines
        "[a-zA-Z0-9 ,.!?']{1,40}".prop_filter("no leading/trailing space", |s| {
            !s.starts_with(' ') && !s.ends_with(' ')
        })
    }

    fn history() -> impl Strategy<Value = Vec<(Direction, String)>> {
        prop::collection::vec(text(), 1..8).prop_map(|texts| {
            // the last message must be incoming, which fixes the first direction
            let first_in = texts.len() % 2 == 1;
            texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let incoming = (i % 2 == 0) == first_in;
                    (if incoming { Incoming } else { Outgoing }, t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(system in text(), hist in history()) {
            let borrowed: Vec<(Direction, &str)> =
                hist.iter().map(|(d, t)| (*d, t.as_str())).collect();
            let rendered = render_chat_prompt(&system, &borrowed).unwrap();
            let (sys2, hist2) = parse_chat_prompt(&rendered).unwrap();
            prop_assert_eq!(sys2, system);
            prop_assert_eq!(hist2, hist);
        }
    }
}
