//! The `tenure` command: synth → ingest → stats → brackets → value → report,
//! each stage a subcommand with file handoffs, plus `all` to chain them.

pub mod args;
pub mod manifest;
pub mod stages;

use serde_json::json;

pub use args::{Cli, Command};
pub use manifest::RunManifest;

/// A failed run, tagged with the stage that failed.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn at(stage: &'static str) -> impl Fn(anyhow::Error) -> Failure {
        move |error| Failure { stage, error }
    }

    /// `{"error": {"stage", "message", "causes"}}`
    pub fn to_json(&self) -> serde_json::Value {
        let causes: Vec<String> = self.error.chain().skip(1).map(ToString::to_string).collect();
        json!({ "error": { "stage": self.stage, "message": self.error.to_string(), "causes": causes } })
    }
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    match command {
        Command::Synth(a) => stages::synth(a).map(drop).map_err(Failure::at("synth")),
        Command::Ingest(a) => stages::ingest(a).map(drop).map_err(Failure::at("ingest")),
        Command::Stats(a) => stages::stats(a).map(drop).map_err(Failure::at("stats")),
        Command::Brackets(a) => stages::brackets(a).map(drop).map_err(Failure::at("brackets")),
        Command::Value(a) => stages::value(a).map(drop).map_err(Failure::at("value")),
        Command::Report(a) => stages::report(a).map(drop).map_err(Failure::at("report")),
        Command::All(a) => stages::all(a),
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure { stage: "setup", error: e.into() })?;
    pool.install(|| dispatch(&cli.command))
}
