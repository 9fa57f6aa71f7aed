//! Thin command-line front end over the study drivers.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyvem::mesh::{write_mesh, MeshKind};
use polyvem::study::{
    self, convergence_csv, mesh_stats_line, rate_assertion_report, validate_csv, LevelSetKind,
    Method, StudyConfig,
};

#[derive(Parser)]
#[command(name = "polyvem", about = "VEM/IVEM studies on anisotropic polyhedral meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a mesh, print its stats line, and optionally export it.
    Mesh(CommonArgs),
    /// Per-element quality checks: angles, path conditions, Poincaré bound.
    Validate(CommonArgs),
    /// Level sweep with error norms and convergence rates.
    Convergence(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Single level (shorthand for a one-entry --n-list)
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated doubling levels, e.g. 8,16,32
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Interface offset: the benchmark radius is 0.75 - eps
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_parser = parse_levelset)]
    levelset: Option<LevelSetKind>,
    #[arg(long, value_parser = parse_kind)]
    kind: Option<MeshKind>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    beta_minus: Option<f64>,
    #[arg(long)]
    beta_plus: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Epsilon of the path-condition check
    #[arg(long)]
    a2_eps: Option<f64>,
    /// Exit nonzero unless the last-pair rates sit in the acceptance windows
    #[arg(long)]
    assert: bool,
    /// Mesh export path
    #[arg(long)]
    export: Option<PathBuf>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_levelset(s: &str) -> Result<LevelSetKind, String> {
    match s {
        "squircle" => Ok(LevelSetKind::Squircle),
        "sphere" => Ok(LevelSetKind::Sphere),
        "plane" => Ok(LevelSetKind::Plane),
        _ => Err(format!("unknown level set {s:?} (squircle|sphere|plane)")),
    }
}

fn parse_kind(s: &str) -> Result<MeshKind, String> {
    match s {
        "fitted" => Ok(MeshKind::Fitted),
        "unfitted" => Ok(MeshKind::Unfitted),
        _ => Err(format!("unknown mesh kind {s:?} (fitted|unfitted)")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "vem" => Ok(Method::Vem),
        "ivem" => Ok(Method::Ivem),
        _ => Err(format!("unknown method {s:?} (vem|ivem)")),
    }
}

impl CommonArgs {
    fn into_config(self) -> Result<StudyConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("bad config: {e}"))?
            }
            None => StudyConfig::default(),
        };
        if let Some(m) = self.method {
            cfg.method = m;
            // keep the method/kind invariant when only --method is given
            if self.kind.is_none() {
                cfg.kind = match m {
                    Method::Vem => MeshKind::Fitted,
                    Method::Ivem => MeshKind::Unfitted,
                };
            }
        }
        if let Some(k) = self.kind {
            cfg.kind = k;
        }
        if let Some(l) = self.levelset {
            cfg.levelset = l;
        }
        if let Some(n) = self.n {
            cfg.n_list = vec![n];
        }
        if let Some(ns) = self.n_list {
            cfg.n_list = ns;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.beta_minus {
            cfg.beta_minus = v;
        }
        if let Some(v) = self.beta_plus {
            cfg.beta_plus = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.a2_eps {
            cfg.a2_eps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Mesh(args) => {
            let export = args.export.clone();
            let cfg = args.into_config()?;
            let (mesh, stats) = study::run_mesh(&cfg).map_err(|e| e.to_string())?;
            if let Some(path) = export {
                std::fs::write(&path, write_mesh(&mesh))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            writeln!(stdout.lock(), "{}", mesh_stats_line(&stats)).unwrap();
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let cfg = args.into_config()?;
            let (reports, summary) = study::run_validate(&cfg).map_err(|e| e.to_string())?;
            write!(stdout.lock(), "{}", validate_csv(&cfg, &reports, &summary)).unwrap();
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence(args) => {
            let assert_rates = args.assert;
            let cfg = args.into_config()?;
            let result = study::run_convergence(&cfg).map_err(|e| e.to_string())?;
            write!(stdout.lock(), "{}", convergence_csv(&cfg, &result)).unwrap();
            if assert_rates && !result.rates_in_windows() {
                eprintln!("rate assertion failed: {}", rate_assertion_report(&result));
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
