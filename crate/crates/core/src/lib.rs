//! Fingerspelling composition for Bengali sign language.
//!
//! Per-frame sign detections are confirmed over time ([`confirmer`]), turned
//! into text by a trigger-driven state machine ([`composer`]), and can be
//! produced from target text ([`planner`]) and simulated sensor noise
//! ([`simulator`]). [`metrics`] evaluates the detector side; [`session`] ties
//! the live pieces together behind the [`wire`] message schema.

pub mod alphabet;
pub mod composer;
pub mod confirmer;
pub mod corpus;
pub mod metrics;
pub mod planner;
pub mod session;
pub mod simulator;
pub mod wire;

pub use alphabet::{load_ruleset, Role, RuleSet, SignClass, Trigger};
pub use composer::{ComposeEvent, Composer, EventKind, Grapheme, GraphemeKind, Mode};
pub use confirmer::{ConfirmConfig, ConfirmState, ConfirmedSymbol, Detection, DetectionFrame, Strategy};
pub use planner::{plan, Planner, SpellingPlan};
pub use session::{Session, SessionConfig, SessionManager};
pub use simulator::{SensorProfile, Trace};
