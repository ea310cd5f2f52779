use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use weilkit::{run, CliError, Inputs, RunManifest};

#[derive(Parser)]
#[command(name = "weilkit", version, about = "Weil bundles over chart-described manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Algebra, expression or complex specification.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    #[arg(long, global = true)]
    manifold: Option<PathBuf>,
    #[arg(long, global = true)]
    algebra: Option<PathBuf>,
    /// A-point file; repeat for commands taking several points.
    #[arg(long, global = true)]
    point: Vec<PathBuf>,
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the full run manifest, wall time included, to this file.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Canonical basis and order of a Weil algebra.
    Algebra,
    /// Partial derivatives of an expression, or its value at an A-point.
    Eval {
        #[arg(long)]
        expr: Option<String>,
    },
    /// Moves an A-point across a chart transition.
    Transition {
        #[arg(long)]
        to: Option<String>,
    },
    /// Weighted distance between two A-points.
    Dist,
    /// Lifts a base curve to a path of A-points.
    LiftPath,
    /// Applies the Weil lift of a map.
    LiftMap,
    /// Iterates a lifted diffeomorphism.
    Orbit,
    /// Grid scan for fixed A-points.
    Fix,
    /// C^0 distance between two diffeomorphisms.
    C0,
    /// Pointwise gap between two lifted diffeomorphisms.
    Pwt,
    /// Betti numbers of a simplicial complex.
    Betti,
    /// Cohomology of a Weil bundle against its base.
    BundleCheck,
    /// Runs the acceptance suite.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Algebra => "algebra",
            Command::Eval { .. } => "eval",
            Command::Transition { .. } => "transition",
            Command::Dist => "dist",
            Command::LiftPath => "lift-path",
            Command::LiftMap => "lift-map",
            Command::Orbit => "orbit",
            Command::Fix => "fix",
            Command::C0 => "c0",
            Command::Pwt => "pwt",
            Command::Betti => "betti",
            Command::BundleCheck => "bundle-check",
            Command::Verify => "verify",
        }
    }
}

fn fail(err: &CliError) -> ExitCode {
    let doc = json!({"error": {"code": err.code(), "message": err.to_string()}});
    eprintln!("{}", serde_json::to_string_pretty(&doc).expect("error document serializes"));
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let started = Instant::now();
    let command = cli.command.name();
    let inputs = Inputs {
        spec: cli.spec,
        manifold: cli.manifold,
        algebra: cli.algebra,
        points: cli.point,
        scenario: cli.scenario,
        tol: cli.tol,
        to: match &cli.command {
            Command::Transition { to } => to.clone(),
            _ => None,
        },
        expr: match &cli.command {
            Command::Eval { expr } => expr.clone(),
            _ => None,
        },
    };
    let mut manifest = RunManifest::new(command, cli.seed);
    let outcome = match run(command, &inputs, &mut manifest) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let doc = json!({"command": command, "result": outcome.result, "run": manifest.deterministic()});
    let mut text = serde_json::to_string_pretty(&doc).expect("result document serializes");
    text.push('\n');
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text).map_err(|source| CliError::Io { path: path.clone(), source }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    };
    if let Err(e) = written {
        return fail(&e);
    }
    if let Some(path) = &cli.manifest {
        manifest.wall_time_ms = Some(started.elapsed().as_millis() as u64);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        if let Err(source) = std::fs::write(path, text + "\n") {
            return fail(&CliError::Io { path: path.clone(), source });
        }
    }
    match outcome.violation {
        Some(msg) => fail(&CliError::Invariant(msg)),
        None => ExitCode::SUCCESS,
    }
}
