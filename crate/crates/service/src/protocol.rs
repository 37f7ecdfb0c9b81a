//! WebSocket message schema. Every frame is a JSON object with the protocol
//! version `v`, a sequence number `seq` and a `type` tag. See
//! `docs/protocol.md`.

use crate::control::{Command, CommandError, COMMAND_TYPES};
use crate::trace::TraceRecord;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Observer,
    Controller,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerBody {
    Snapshot {
        record: TraceRecord,
        paused: bool,
    },
    Graph {
        states: Vec<String>,
        edges: Vec<[usize; 2]>,
        dt: f64,
        publish_hz: f64,
        /// Accepted cue values; empty without a scenario.
        cues: Vec<String>,
    },
    Role {
        role: Role,
        controller_present: bool,
    },
    Ack {
        reply_to: u64,
        command: String,
        /// Tick of the last snapshot before the command; every snapshot with
        /// a larger tick reflects it.
        tick: u64,
    },
    Error {
        code: String,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reply_to: Option<u64>,
    },
}

impl ServerBody {
    pub fn error(e: &CommandError, reply_to: Option<u64>) -> Self {
        ServerBody::Error { code: e.code.to_string(), detail: e.detail.clone(), reply_to }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub body: ServerBody,
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// A decoded client frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientMessage {
    pub seq: u64,
    pub command: Command,
}

impl ClientMessage {
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(&self.command).expect("commands always serialize");
        let obj = v.as_object_mut().expect("commands are objects");
        obj.insert("v".into(), PROTOCOL_VERSION.into());
        obj.insert("seq".into(), self.seq.into());
        v.to_string()
    }
}

/// Decodes a client text frame. On failure returns the error together with
/// the frame's `seq`, if one could be read.
pub fn parse_client(text: &str) -> Result<ClientMessage, (Option<u64>, CommandError)> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| (None, CommandError::new("malformed", e.to_string())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| (None, CommandError::new("malformed", "expected a JSON object")))?;
    let seq = obj.remove("seq").and_then(|s| s.as_u64());
    let Some(seq) = seq else {
        return Err((None, CommandError::new("malformed", "missing or non-integer `seq`")));
    };
    match obj.remove("v").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
        Some(v) => return Err((Some(seq), CommandError::new("version", format!("unsupported version {v}")))),
        None => return Err((Some(seq), CommandError::new("malformed", "missing `v`"))),
    }
    match obj.get("type").and_then(Value::as_str) {
        Some(t) if COMMAND_TYPES.contains(&t) => {}
        Some(t) => return Err((Some(seq), CommandError::new("unknown_type", format!("unknown message type `{t}`")))),
        None => return Err((Some(seq), CommandError::new("malformed", "missing `type`"))),
    }
    let keys: Vec<String> = obj.keys().cloned().collect();
    let command: Command =
        serde_json::from_value(value).map_err(|e| (Some(seq), CommandError::new("invalid", e.to_string())))?;
    // Unit variants of an internally tagged enum accept any extra field.
    let known = serde_json::to_value(&command).expect("commands always serialize");
    if let Some(k) = keys.iter().find(|k| known.get(k.as_str()).is_none()) {
        return Err((Some(seq), CommandError::new("invalid", format!("unknown field `{k}` for `{}`", command.name()))));
    }
    Ok(ClientMessage { seq, command })
}
