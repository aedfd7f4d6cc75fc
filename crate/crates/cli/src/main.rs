use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use tractvar_cli::{build_service, run, server, Cli, CliError, Command, PipelineConfig};

fn fail(e: &CliError, command: Option<&str>) -> ExitCode {
    let rec = serde_json::to_string(&e.record(command)).expect("error record serializes");
    eprintln!("{rec}");
    ExitCode::from(e.exit_code() as u8)
}

fn serve(cfg: &PipelineConfig) -> Result<(), CliError> {
    let svc = build_service(cfg)?;
    let app = server::router(svc, cfg.paths.audio_dir.clone());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Compute(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.serve.bind)
            .await
            .map_err(|e| CliError::Config(format!("bind {}: {e}", cfg.serve.bind)))?;
        eprintln!(
            "{}",
            serde_json::json!({ "status": "listening", "bind": cfg.serve.bind })
        );
        axum::serve(listener, app)
            .await
            .map_err(|e| CliError::Compute(e.to_string()))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return fail(&CliError::Usage(first.to_string()), None);
        }
    };
    let name = cli.command.name();
    let cfg = match PipelineConfig::load(cli.config.as_deref(), &cli.overrides()) {
        Ok(c) => c,
        Err(e) => return fail(&e, Some(name)),
    };
    if cli.command == Command::Serve {
        return match serve(&cfg) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e, Some(name)),
        };
    }
    match run(cli.command, &cfg) {
        Ok(outputs) => {
            println!(
                "{}",
                serde_json::json!({ "status": "ok", "command": name, "outputs": outputs })
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(name)),
    }
}
