//! Live sessions: one confirmer and one composer per client, driven by
//! [`Inbound`] messages and answering with [`Outbound`] ones.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::RuleSet;
use crate::composer::{Composer, Mode};
use crate::confirmer::{ConfigError, ConfirmConfig, ConfirmState, DetectionFrame};
use crate::wire::{Inbound, Outbound};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(flatten)]
    pub confirm: ConfirmConfig,
    /// An accumulator snapshot goes out at most once per this many frames;
    /// 1 means every frame.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u32,
}

fn default_snapshot_every() -> u32 {
    5
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            confirm: ConfirmConfig::default(),
            snapshot_every: default_snapshot_every(),
        }
    }
}

impl SessionConfig {
    pub fn full_rate(mut self) -> Self {
        self.snapshot_every = 1;
        self
    }
}

/// Rendered view of a session at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub buffer_text: String,
    pub mode: Mode,
    pub config: ConfirmConfig,
    pub staged_config: Option<ConfirmConfig>,
    pub scores: std::collections::BTreeMap<String, f64>,
}

pub struct Session {
    id: String,
    confirm: ConfirmState,
    composer: Composer,
    snapshot_every: u32,
    until_snapshot: u32,
    created_at: Instant,
    last_active: Instant,
    trace_sink: Option<Box<dyn Write + Send>>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("confirm", &self.confirm)
            .field("composer", &self.composer)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        config: SessionConfig,
        rules: Arc<RuleSet>,
    ) -> Result<Self, ConfigError> {
        let now = Instant::now();
        Ok(Session {
            id: id.into(),
            confirm: ConfirmState::new(config.confirm)?,
            composer: Composer::new(rules),
            snapshot_every: config.snapshot_every.max(1),
            until_snapshot: 0,
            created_at: now,
            last_active: now,
            trace_sink: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn created_at(&self) -> Instant {
        self.created_at
    }

    pub fn last_active(&self) -> Instant {
        self.last_active
    }

    pub fn confirm_state(&self) -> &ConfirmState {
        &self.confirm
    }

    pub fn composer(&self) -> &Composer {
        &self.composer
    }

    pub fn buffer_text(&self) -> String {
        self.composer.render()
    }

    /// Every accepted frame is also written to `sink` as a JSONL trace line.
    pub fn record_to(&mut self, sink: Box<dyn Write + Send>) {
        self.trace_sink = Some(sink);
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            buffer_text: self.composer.render(),
            mode: self.composer.mode(),
            config: *self.confirm.config(),
            staged_config: self.confirm.staged_config().copied(),
            scores: self.confirm.scores(),
        }
    }

    fn accumulators(&self) -> Outbound {
        Outbound::Accumulators {
            scores: self.confirm.scores(),
        }
    }

    pub fn handle(&mut self, message: Inbound) -> Vec<Outbound> {
        match message {
            Inbound::Frame { t, detections } => self.feed(&DetectionFrame::new(t, detections)),
            Inbound::SetConfig {
                delta,
                strategy,
                decay,
            } => {
                let current = self.confirm.staged_config().unwrap_or(self.confirm.config());
                let next = ConfirmConfig {
                    strategy: strategy.unwrap_or(current.strategy),
                    delta: delta.unwrap_or(current.delta),
                    decay: decay.unwrap_or(current.decay),
                };
                vec![match self.set_config(next) {
                    Ok(()) => Outbound::Ack {
                        detail: format!(
                            "staged {} delta={} decay={}; applies after the next confirmation or reset",
                            next.strategy.name(),
                            next.delta,
                            next.decay
                        ),
                    },
                    Err(e) => Outbound::Error {
                        reason: e.to_string(),
                    },
                }]
            }
            Inbound::Reset => {
                self.reset();
                vec![
                    Outbound::Ack {
                        detail: "session reset".into(),
                    },
                    self.accumulators(),
                ]
            }
        }
    }

    /// Stages a new confirmation config; it takes effect at the next
    /// accumulator reset, never mid-accumulation.
    pub fn set_config(&mut self, config: ConfirmConfig) -> Result<(), ConfigError> {
        self.last_active = Instant::now();
        self.confirm.stage_config(config)
    }

    pub fn reset(&mut self) {
        self.last_active = Instant::now();
        self.confirm.reset();
        self.composer.reset();
        self.until_snapshot = 0;
    }

    pub fn feed(&mut self, frame: &DetectionFrame) -> Vec<Outbound> {
        self.last_active = Instant::now();
        let rules = self.composer.rules();
        if let Some(d) = frame.detections.iter().find(|d| !rules.contains(&d.label)) {
            return vec![Outbound::Error {
                reason: format!("unknown label {:?}", d.label),
            }];
        }
        let confirmed = match self.confirm.ingest_frame(frame) {
            Ok(c) => c,
            Err(e) => {
                return vec![Outbound::Error {
                    reason: e.to_string(),
                }]
            }
        };
        if let Some(sink) = self.trace_sink.as_mut() {
            let line = Inbound::frame(frame).to_json();
            if writeln!(sink, "{line}").is_err() {
                self.trace_sink = None;
            }
        }

        let mut out = Vec::new();
        match confirmed {
            Some(sym) => {
                out.push(Outbound::from(&sym));
                let events = self
                    .composer
                    .apply_symbol(&sym)
                    .expect("labels checked against the ruleset");
                out.extend(events.into_iter().map(Outbound::from));
                out.push(self.accumulators());
                self.until_snapshot = self.snapshot_every - 1;
            }
            None => {
                if self.until_snapshot == 0 {
                    out.push(self.accumulators());
                    self.until_snapshot = self.snapshot_every - 1;
                } else {
                    self.until_snapshot -= 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("unknown ruleset {0:?}")]
    UnknownRuleset(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Owns every open session plus the rulesets they can be opened against.
#[derive(Debug)]
pub struct SessionManager {
    rulesets: HashMap<String, Arc<RuleSet>>,
    sessions: HashMap<String, Session>,
    idle_timeout: Duration,
    next_id: u64,
    salt: u64,
}

pub const DEFAULT_RULESET_ID: &str = "default";

impl SessionManager {
    /// Manager with the shipped ruleset registered as `"default"` and a
    /// 10 minute idle timeout.
    pub fn new() -> Self {
        SessionManager::with_ruleset(DEFAULT_RULESET_ID, Arc::new(RuleSet::default_bengali()))
    }

    pub fn with_ruleset(id: impl Into<String>, rules: Arc<RuleSet>) -> Self {
        SessionManager {
            rulesets: HashMap::from([(id.into(), rules)]),
            sessions: HashMap::new(),
            idle_timeout: Duration::from_secs(600),
            next_id: 0,
            salt: rand::random(),
        }
    }

    pub fn idle_timeout(mut self, timeout: Duration) -> Self {
        self.idle_timeout = timeout;
        self
    }

    pub fn add_ruleset(&mut self, id: impl Into<String>, rules: Arc<RuleSet>) {
        self.rulesets.insert(id.into(), rules);
    }

    pub fn ruleset(&self, id: &str) -> Option<&Arc<RuleSet>> {
        self.rulesets.get(id)
    }

    pub fn open_session(&mut self, config: SessionConfig, ruleset_id: &str) -> Result<String, SessionError> {
        let rules = self
            .rulesets
            .get(ruleset_id)
            .ok_or_else(|| SessionError::UnknownRuleset(ruleset_id.to_string()))?;
        self.next_id += 1;
        let id = format!("{:016x}{:04x}", self.salt, self.next_id);
        let session = Session::new(id.clone(), config, Arc::clone(rules))?;
        self.sessions.insert(id.clone(), session);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Session> {
        self.sessions.get_mut(id)
    }

    pub fn handle(&mut self, id: &str, message: Inbound) -> Result<Vec<Outbound>, SessionError> {
        self.sessions
            .get_mut(id)
            .map(|s| s.handle(message))
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn close(&mut self, id: &str) -> Option<Session> {
        self.sessions.remove(id)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Drops sessions idle for longer than the timeout; returns their ids.
    pub fn expire_idle(&mut self, now: Instant) -> Vec<String> {
        let timeout = self.idle_timeout;
        let expired: Vec<String> = self
            .sessions
            .iter()
            .filter(|(_, s)| now.saturating_duration_since(s.last_active) > timeout)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            self.sessions.remove(id);
        }
        expired
    }
}

impl Default for SessionManager {
    fn default() -> Self {
        SessionManager::new()
    }
}
