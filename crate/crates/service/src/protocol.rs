//! JSON messages exchanged over the WebSocket, one object per text frame.

use std::collections::BTreeMap;

use arbiter_core::env::{CellKind, GridMap};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Paused,
    Finished,
}

/// Trainer state at one moment. `state_key` names the state the trainer
/// will decide in next; advice for it must quote this key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub t: u64,
    pub step: u64,
    pub state_key: String,
    pub x: usize,
    pub z: usize,
    pub facing: char,
    pub map_name: String,
    /// `explore`, `exploit` or `listen`; `None` before the first step.
    pub last_source: Option<String>,
    pub last_action: Option<String>,
    /// Key of the state the last decision was taken in.
    pub last_key: Option<String>,
    pub last_reward: Option<f64>,
    pub episode_return: f64,
    pub p_explore: f64,
    pub p_conf: f64,
    pub p_cons: f64,
    pub status: RunStatus,
    /// Set while the trainer waits for human advice.
    pub awaiting_advice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(SessionSnapshot),
    Map {
        cells: Vec<Vec<char>>,
        legend: BTreeMap<char, String>,
    },
    EpisodeEnd {
        t: u64,
        eval_return: f64,
    },
}

impl ServerMessage {
    pub fn map(map: &GridMap) -> Self {
        let cells = map.rows().iter().map(|r| r.iter().map(|k| k.glyph()).collect()).collect();
        let legend = [
            (CellKind::Floor, "floor"),
            (CellKind::Wall, "wall"),
            (CellKind::Pillar, "pillar"),
            (CellKind::Goal, "goal"),
            (CellKind::Start, "start"),
        ]
        .into_iter()
        .map(|(k, name)| (k.glyph(), name.to_string()))
        .collect();
        ServerMessage::Map { cells, legend }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialise")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Pause,
    Resume,
    Stop,
    SetSpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Per-action labels in `MoveN, MoveE, MoveS, MoveW` order.
    Advice { state_key: String, good: [bool; 4] },
    Control {
        kind: ControlKind,
        #[serde(default)]
        speed: Option<f64>,
    },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialise")
    }
}

/// Validated run-control command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlCommand {
    Pause,
    Resume,
    Stop,
    SetSpeed(f64),
}

impl ControlCommand {
    pub fn from_message(kind: ControlKind, speed: Option<f64>) -> Result<Self, String> {
        Ok(match kind {
            ControlKind::Pause => ControlCommand::Pause,
            ControlKind::Resume => ControlCommand::Resume,
            ControlKind::Stop => ControlCommand::Stop,
            ControlKind::SetSpeed => match speed {
                Some(s) if s.is_finite() && s > 0.0 => ControlCommand::SetSpeed(s),
                other => return Err(format!("set_speed needs a positive speed, got {other:?}")),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advice_wire_format() {
        let m = ClientMessage::parse(r#"{"type":"advice","state_key":"3:14","good":[false,true,false,false],"extra":1}"#)
            .unwrap();
        assert_eq!(
            m,
            ClientMessage::Advice {
                state_key: "3:14".into(),
                good: [false, true, false, false]
            }
        );
        assert_eq!(
            m.to_json(),
            r#"{"type":"advice","state_key":"3:14","good":[false,true,false,false]}"#
        );
    }

    #[test]
    fn control_wire_format() {
        let m = ClientMessage::parse(r#"{"type":"control","kind":"set_speed","speed":2.5}"#).unwrap();
        assert_eq!(
            m,
            ClientMessage::Control {
                kind: ControlKind::SetSpeed,
                speed: Some(2.5)
            }
        );
        let p = ClientMessage::parse(r#"{"type":"control","kind":"pause"}"#).unwrap();
        assert_eq!(
            p,
            ClientMessage::Control {
                kind: ControlKind::Pause,
                speed: None
            }
        );
        assert!(ControlCommand::from_message(ControlKind::SetSpeed, Some(0.0)).is_err());
        assert!(ControlCommand::from_message(ControlKind::SetSpeed, None).is_err());
    }

    #[test]
    fn malformed_messages_are_rejected() {
        for bad in [
            "not json",
            r#"{"type":"advice","state_key":"1:2","good":[true]}"#,
            r#"{"type":"dance"}"#,
            r#"{"type":"control","kind":"jump"}"#,
        ] {
            assert!(ClientMessage::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn server_messages_are_tagged() {
        let m = ServerMessage::EpisodeEnd { t: 4, eval_return: 92.0 };
        assert_eq!(m.to_json(), r#"{"type":"episode_end","t":4,"eval_return":92.0}"#);
        let map = GridMap::parse("t", "S.G\n").unwrap();
        let json: serde_json::Value = serde_json::from_str(&ServerMessage::map(&map).to_json()).unwrap();
        assert_eq!(json["type"], "map");
        assert_eq!(json["cells"], serde_json::json!([["S", ".", "G"]]));
        assert_eq!(json["legend"]["#"], "wall");
    }
}
