use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use ticketsim::cli::{self, Cli, Command, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
use ticketsim::service::{http, Service, ServiceConfig};

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn serve(config: Option<&std::path::Path>) -> anyhow::Result<()> {
    let path = config.context("serve needs --config")?;
    let cfg = ServiceConfig::load(path)?;
    let service = Service::open(&cfg)?;
    let report = service.report();
    if !report.failures.is_empty() {
        eprintln!("bootstrap skipped {} tickets:", report.failures.len());
        for (id, err) in &report.failures {
            eprintln!("  {id}: {err}");
        }
    }
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .with_context(|| format!("binding {}", cfg.listen))?;
        eprintln!(
            "serving {} ({} tickets) on {}",
            service.technique_name(),
            service.index_size(),
            listener.local_addr()?
        );
        http::serve(listener, Arc::new(service), http::shutdown_signal())
            .await
            .context("server error")
    })
}

fn exit_code_of(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<ticketsim::Error>() {
        Some(err) => cli::exit_code(err),
        None if e.to_string() == "serve needs --config" => EXIT_USAGE,
        None => EXIT_RUNTIME,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match &cli.command {
        Command::Ingest(args) => cli::ingest(args, &mut out).map(|_| EXIT_OK)?,
        Command::Fit(args) => cli::fit(args, cli.seed, &mut out).map(|_| EXIT_OK)?,
        Command::Compare(args) => cli::compare(args, &mut out)?,
        Command::EmbedCache(args) => cli::embed_cache(args, &mut out).map(|_| EXIT_OK)?,
        Command::Serve => serve(cli.config.as_deref()).map(|_| EXIT_OK)?,
    };
    out.flush().ok();
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = exit_code_of(&e);
            ExitCode::from(if code == EXIT_OK { EXIT_DATA } else { code })
        }
    }
}
