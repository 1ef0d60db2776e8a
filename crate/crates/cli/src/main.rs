mod args;
mod commands;
mod files;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use files::Failure;
use tcmra::pipeline::PipelineConfig;

type Overrides = Vec<(String, String)>;

/// Pulls `--section.field value` and `--section.field=value` pairs out of the
/// argument list; everything else goes to clap.
fn split_overrides(raw: Vec<String>) -> Result<(Vec<String>, Overrides), Failure> {
    let mut rest = Vec::with_capacity(raw.len());
    let mut overrides = Vec::new();
    let mut it = raw.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Failure::Usage(format!("--{name} needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn load_config(cli: &Cli, overrides: &[(String, String)]) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_json(&files::read_text(path)?).map_err(|e| Failure::Usage(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run() -> Result<serde_json::Value, Failure> {
    let (rest, overrides) = split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            return Err(Failure::Reported);
        }
    };
    let cfg = load_config(&cli, &overrides)?;
    commands::dispatch(cli.command, cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Some(json) = f.to_json() {
                eprintln!("{json}");
            }
            ExitCode::from(f.exit_code())
        }
    }
}
