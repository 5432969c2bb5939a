//! JSON text frames exchanged with live-session clients.
//!
//! Server to client: `{"type":"state", ...}` and `{"type":"error","msg":...}`.
//! Client to server: `{"type":"cmd","cmd":"Forward|Right|Left|Stop"}`,
//! `{"type":"release"}`, `{"type":"control","op":"start|pause|abort"}` and
//! `{"type":"mode","mode":"hand|neural"}` (idle only).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::task::{Command, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetView {
    pub x: f64,
    pub y: f64,
    pub side: f64,
}

/// Snapshot of the live session after one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub session: String,
    pub mode: String,
    pub trial: u32,
    pub tick: u32,
    pub avatar: Point,
    pub target: TargetView,
    pub phase: Phase,
    pub hold_ticks: u32,
    pub cmd_exec: Command,
    pub cmd_dec: Option<Command>,
    pub cmd_oracle: Command,
    pub successes: u32,
    pub completed: u32,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    #[serde(rename = "type")]
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl StateFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Tagged {
            kind: "state",
            body: self,
        })
        .expect("frame serializes")
    }
}

pub fn error_frame(msg: &str) -> String {
    serde_json::json!({ "type": "error", "msg": msg }).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlOp {
    Start,
    Pause,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiveMode {
    Hand,
    Neural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Cmd { cmd: Command },
    Release,
    Control { op: ControlOp },
    Mode { mode: LiveMode },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad client message: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client message serializes")
    }
}

fn expect(obj: &serde_json::Map<String, Value>, key: &str, ok: fn(&Value) -> bool) -> std::result::Result<(), String> {
    match obj.get(key) {
        None => Err(format!("missing field `{key}`")),
        Some(v) if ok(v) => Ok(()),
        Some(v) => Err(format!("field `{key}` has wrong type: {v}")),
    }
}

fn is_command(v: &Value) -> bool {
    v.as_str().is_some_and(|s| s.parse::<Command>().is_ok())
}

fn is_uint(v: &Value) -> bool {
    v.as_u64().is_some()
}

fn is_num(v: &Value) -> bool {
    v.is_number()
}

/// Validates a server state frame. Unknown extra fields are accepted.
pub fn frame_schema_check(text: &str) -> std::result::Result<(), String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let obj = v.as_object().ok_or("frame is not an object")?;
    expect(obj, "type", |v| v.as_str() == Some("state"))?;
    expect(obj, "session", Value::is_string)?;
    expect(obj, "mode", Value::is_string)?;
    expect(obj, "trial", is_uint)?;
    expect(obj, "tick", is_uint)?;
    expect(obj, "hold_ticks", is_uint)?;
    expect(obj, "successes", is_uint)?;
    expect(obj, "completed", is_uint)?;
    expect(obj, "phase", |v| {
        matches!(v.as_str(), Some("Running" | "Succeeded" | "Failed"))
    })?;
    expect(obj, "cmd_exec", is_command)?;
    expect(obj, "cmd_oracle", is_command)?;
    expect(obj, "cmd_dec", |v| v.is_null() || is_command(v))?;
    expect(obj, "avatar", |v| {
        v.get("x").is_some_and(is_num) && v.get("y").is_some_and(is_num)
    })?;
    expect(obj, "target", |v| {
        v.get("x").is_some_and(is_num) && v.get("y").is_some_and(is_num) && v.get("side").is_some_and(is_num)
    })?;
    Ok(())
}
