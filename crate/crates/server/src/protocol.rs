//! Stream messages. Each message is one JSON object on one line; a client
//! text frame may carry several newline-separated messages.

use crate::error::{ApiError, ErrorBody};
use serde::Serialize;
use serde_json::Value;
use telewaypoint_core::session::{TrialResult, TrialSpec};
use telewaypoint_core::wire::{StateFrame, WireCommand};

/// Client to server.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Command(WireCommand),
    /// `{"kind":"start_trial"}`
    StartTrial,
    /// `{"kind":"add_bonus"}`
    AddBonus,
}

pub fn decode_line(line: &str) -> Result<ClientMessage, ApiError> {
    let value: Value = serde_json::from_str(line).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    match value.get("kind").and_then(Value::as_str) {
        Some("start_trial") => Ok(ClientMessage::StartTrial),
        Some("add_bonus") => Ok(ClientMessage::AddBonus),
        _ => serde_json::from_value(value)
            .map(ClientMessage::Command)
            .map_err(|e| ApiError::BadRequest(e.to_string())),
    }
}

/// Round-trips a command through its wire encoding, as a remote client would send it.
pub fn over_wire(cmd: &WireCommand) -> Result<WireCommand, ApiError> {
    let line = serde_json::to_string(cmd).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    match decode_line(&line)? {
        ClientMessage::Command(c) => Ok(c),
        other => Err(ApiError::BadRequest(format!("unexpected {other:?}"))),
    }
}

/// Server to client.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(StateFrame),
    TrialStarted { trial: usize, spec: TrialSpec },
    TrialComplete { trial: usize, result: TrialResult },
    SessionComplete,
    Error(ErrorBody),
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use telewaypoint_core::sim::DriveInput;
    use telewaypoint_core::wire::ControlMethod;

    #[test]
    fn decodes_session_and_operator_messages() {
        assert_eq!(decode_line(r#"{"kind":"start_trial"}"#).unwrap(), ClientMessage::StartTrial);
        assert_eq!(decode_line(r#"{"kind":"add_bonus"}"#).unwrap(), ClientMessage::AddBonus);
        assert_eq!(
            decode_line(r#"{"kind":"switch_method","method":"direct"}"#).unwrap(),
            ClientMessage::Command(WireCommand::SwitchMethod { method: ControlMethod::Direct })
        );
        assert!(matches!(decode_line(r#"{"kind":"warp"}"#), Err(ApiError::BadRequest(_))));
        assert!(matches!(decode_line("not json"), Err(ApiError::BadRequest(_))));
    }

    #[test]
    fn commands_survive_the_wire() {
        let cmd = WireCommand::Drive(DriveInput::new(0.1 + 0.2, -1.0 / 3.0));
        assert_eq!(over_wire(&cmd).unwrap(), cmd);
    }
}
