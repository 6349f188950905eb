//! JSON message schema shared by the session stream, trace files and the CLI.
//!
//! Every message is an object tagged by `"type"`. A trace file is one inbound
//! `frame` message per line, optionally preceded by a provenance header.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::composer::{ComposeEvent, EventKind, Mode};
use crate::confirmer::{ConfirmConfig, ConfirmedSymbol, Detection, DetectionFrame, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Frame {
        t: f64,
        #[serde(default)]
        detections: Vec<Detection>,
    },
    SetConfig {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(
            default,
            skip_serializing_if = "Option::is_none",
            deserialize_with = "strategy_alias"
        )]
        strategy: Option<Strategy>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decay: Option<f64>,
    },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    Confirmed {
        label: String,
        score: f64,
        frames: u32,
        t: f64,
    },
    ComposeEvent {
        kind: EventKind,
        detail: String,
        buffer_text: String,
        mode: Mode,
    },
    Accumulators {
        scores: BTreeMap<String, f64>,
    },
    /// First message on a stream: the id to use with the snapshot endpoint.
    Session {
        id: String,
        config: ConfirmConfig,
    },
    Ack {
        detail: String,
    },
    Error {
        reason: String,
    },
}

/// Accepts the long strategy names plus the CLI short forms.
fn strategy_alias<'de, D>(de: D) -> Result<Option<Strategy>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let name: Option<String> = Option::deserialize(de)?;
    name.map(|n| parse_strategy(&n).map_err(serde::de::Error::custom))
        .transpose()
}

/// Parses `cumulative_confidence` / `confidence` / `detection_count` / `count`.
pub fn parse_strategy(name: &str) -> Result<Strategy, String> {
    match name {
        "cumulative_confidence" | "confidence" => Ok(Strategy::CumulativeConfidence),
        "detection_count" | "count" => Ok(Strategy::DetectionCount),
        other => Err(format!("unknown strategy {other:?}")),
    }
}

impl From<DetectionFrame> for Inbound {
    fn from(frame: DetectionFrame) -> Self {
        Inbound::Frame {
            t: frame.t,
            detections: frame.detections,
        }
    }
}

impl From<&ConfirmedSymbol> for Outbound {
    fn from(sym: &ConfirmedSymbol) -> Self {
        Outbound::Confirmed {
            label: sym.label.clone(),
            score: sym.score,
            frames: sym.frames_to_confirm,
            t: sym.t,
        }
    }
}

impl From<ComposeEvent> for Outbound {
    fn from(ev: ComposeEvent) -> Self {
        Outbound::ComposeEvent {
            kind: ev.kind,
            detail: ev.detail,
            buffer_text: ev.buffer_text,
            mode: ev.mode,
        }
    }
}

impl Inbound {
    pub fn frame(frame: &DetectionFrame) -> Self {
        Inbound::from(frame.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("inbound message serializes")
    }
}

impl Outbound {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outbound message serializes")
    }
}
