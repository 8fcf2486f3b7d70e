use std::path::PathBuf;
use std::process::ExitCode;

use consent_server::{serve, ServerConfig};

const USAGE: &str = "usage: consent-server [--config FILE]

Settings come from FILE (TOML) and are overridden by CONSENT_* environment
variables: CONSENT_LISTEN, CONSENT_DATA_DIR, CONSENT_DOMAIN_ALLOWLIST,
CONSENT_ALLOWED_DOMAINS, CONSENT_VOCAB_PROGRAMS, CONSENT_VOCAB_FACULTY,
CONSENT_VOCAB_CHALLENGES, CONSENT_MODERATOR_EMAIL, CONSENT_OUTBOX,
CONSENT_AUDIT_LOG, CONSENT_SESSION_REQUEST_CAP, CONSENT_PURGE_DELETED.";

fn parse_args() -> Result<Option<PathBuf>, String> {
    let mut args = std::env::args().skip(1);
    let mut config = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" | "-c" => config = Some(args.next().ok_or("--config needs a path")?.into()),
            "--help" | "-h" => return Err(String::new()),
            other => return Err(format!("unexpected argument {other:?}")),
        }
    }
    Ok(config)
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let file = match parse_args() {
        Ok(f) => f,
        Err(msg) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            eprintln!("{USAGE}");
            return ExitCode::from(2);
        }
    };
    let config = match ServerConfig::from_env_and_file(file.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = serve(config).await {
        eprintln!("{e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
