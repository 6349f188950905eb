//! Drive a session with wire messages, as a live client would: stream
//! frames, change δ mid-word and see it staged until the next confirmation.
//!
//!     cargo run -p bdspell --example live_session

use bdspell::session::{SessionConfig, SessionManager, DEFAULT_RULESET_ID};
use bdspell::wire::{Inbound, Outbound};
use bdspell::Detection;

fn frame(k: u32, label: &str) -> Inbound {
    Inbound::Frame {
        t: k as f64 / 45.0,
        detections: vec![Detection::new(label, 0.8333, [0.31, 0.22, 0.18, 0.24])],
    }
}

fn send(manager: &mut SessionManager, id: &str, msg: Inbound) {
    for out in manager.handle(id, msg).unwrap() {
        if !matches!(out, Outbound::Accumulators { .. }) {
            println!("{}", out.to_json());
        }
    }
}

pub fn run() -> String {
    let mut manager = SessionManager::new();
    let id = manager.open_session(SessionConfig::default(), DEFAULT_RULESET_ID).unwrap();

    for k in 0..70 {
        if k == 30 {
            let smaller = Inbound::SetConfig { delta: Some(10.0), strategy: None, decay: None };
            send(&mut manager, &id, smaller);
        }
        send(&mut manager, &id, frame(k, "ka"));
    }
    // δ = 10 now applies: ⌊10 / 0.8333⌋ + 1 = 13 frames
    for k in 70..85 {
        send(&mut manager, &id, frame(k, "ma"));
    }
    let text = manager.get(&id).unwrap().buffer_text();
    println!("buffer: {text}");
    text
}

#[allow(dead_code)]
fn main() {
    run();
}
