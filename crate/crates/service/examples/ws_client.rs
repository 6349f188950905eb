//! Start the service on a free port, open a websocket session and stream a
//! simulated noisy trace through it.
//!
//!     cargo run -p bdspell-service --example ws_client -- "আম ১২"

use std::sync::Arc;

use bdspell::simulator::simulate;
use bdspell::wire::{Inbound, Outbound};
use bdspell::{Planner, RuleSet, SensorProfile};
use bdspell_service::{router, AppState};
use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::tungstenite::Message;

pub async fn run(text: &str) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::default())).await });

    let rules = Arc::new(RuleSet::default_bengali());
    let plan = Planner::new(Arc::clone(&rules)).plan(text).expect("spellable");
    let trace = simulate(&plan, &rules, &SensorProfile::default().with_seed(9)).unwrap();

    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/v1/session?delta=30"))
        .await
        .unwrap();
    let (mut tx, mut rx) = ws.split();
    let frames = trace.frames.clone();
    let sender = tokio::spawn(async move {
        for frame in &frames {
            tx.send(Message::Text(Inbound::frame(frame).to_json().into())).await.unwrap();
        }
        tx.send(Message::Text(r#"{"type":"reset"}"#.into())).await.unwrap();
        tx
    });

    let mut text = String::new();
    while let Some(Ok(message)) = rx.next().await {
        let Message::Text(body) = message else { continue };
        match serde_json::from_str::<Outbound>(&body).unwrap() {
            Outbound::Session { id, config } => println!("session {id} at δ={}", config.delta),
            Outbound::Confirmed { label, frames, t, .. } => println!("  {t:>6.2}s  {label:<6} ({frames} frames)"),
            Outbound::ComposeEvent { buffer_text, .. } => text = buffer_text,
            Outbound::Ack { .. } => break,
            Outbound::Error { reason } => panic!("{reason}"),
            Outbound::Accumulators { .. } => {}
        }
    }
    let mut tx = sender.await.unwrap();
    tx.close().await.ok();
    text
}

#[allow(dead_code)]
#[tokio::main]
async fn main() {
    let text = std::env::args().nth(1).unwrap_or_else(|| "আম ১২".into());
    println!("{}", run(&text).await);
}
