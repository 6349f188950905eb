//! Record a simulated trace to JSONL, then replay the file through a fresh
//! session.
//!
//!     cargo run -p bdspell --example replay_trace -- [--paced]

use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use bdspell::session::{Session, SessionConfig};
use bdspell::simulator::{replay, simulate};
use bdspell::wire::{Inbound, Outbound};
use bdspell::{Planner, RuleSet, SensorProfile};

pub fn run(paced: bool) -> String {
    let rules = Arc::new(RuleSet::default_bengali());
    let plan = Planner::new(Arc::clone(&rules)).plan("নদী").unwrap();
    let trace = simulate(&plan, &rules, &SensorProfile::default().with_seed(3)).unwrap();

    let path = std::env::temp_dir().join(format!("bdspell-replay-{}.jsonl", std::process::id()));
    trace.write_jsonl(BufWriter::new(File::create(&path).unwrap())).unwrap();
    println!("wrote {} frames to {}", trace.frames.len(), path.display());

    let mut session = Session::new("replay", SessionConfig::default(), rules).unwrap();
    for frame in replay(&path).unwrap().paced(paced) {
        for out in session.handle(Inbound::frame(&frame.unwrap())) {
            if let Outbound::ComposeEvent { kind, buffer_text, .. } = out {
                println!("  {kind:?} -> {buffer_text}");
            }
        }
    }
    std::fs::remove_file(&path).ok();
    session.buffer_text()
}

#[allow(dead_code)]
fn main() {
    let paced = std::env::args().any(|a| a == "--paced");
    println!("{}", run(paced));
}
