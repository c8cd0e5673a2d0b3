//! The `nlgalerkin` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fem::space::ElementKind;
use crate::mesh::MeshHierarchy;
use crate::mms::{evaluate_errors, ProblemKind};
use crate::schemes::{self, trajectory_csv, HandoffInit, Scheme, Setup, TimeRule};

use super::config::{ListValue, Options};
use super::{read_text, run_convergence, write_text, LevelCache};

#[derive(Debug, Parser)]
#[command(name = "nlgalerkin", version, about = "Galerkin and nonlinear Galerkin runs for 2D Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print metrics of the mesh at a refinement level.
    MeshInfo(MeshArgs),
    /// Measure the splitting constants of a two-grid hierarchy.
    Probe(Flags),
    /// Integrate one scheme and print per-step diagnostics as CSV.
    Run(Flags),
    /// Run a grid of schemes and coarse levels against one fine reference.
    Convergence(Flags),
}

#[derive(Debug, Args)]
struct MeshArgs {
    #[arg(long, default_value_t = 0)]
    level: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Comma-separated schemes (convergence).
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    coarse_level: Option<usize>,
    /// Comma-separated coarse levels (convergence).
    #[arg(long)]
    coarse_levels: Option<String>,
    #[arg(long)]
    fine_level: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<f64>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    /// p1isop2 or th.
    #[arg(long)]
    element: Option<ElementKind>,
    /// be or cn.
    #[arg(long)]
    time_rule: Option<TimeRule>,
    #[arg(long, allow_hyphen_values = true)]
    picard_tol: Option<f64>,
    #[arg(long)]
    picard_max: Option<usize>,
    /// Initial small scales at the handoff: static-solve or projection.
    #[arg(long, value_parser = parse_handoff)]
    handoff: Option<HandoffInit>,
    /// Solve the Stokes equations instead.
    #[arg(long)]
    no_convection: bool,
    /// Leave the wall_s column empty so that reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Output file (stdout when absent); `.json` selects JSON for reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_handoff(s: &str) -> std::result::Result<HandoffInit, String> {
    match s {
        "static-solve" => Ok(HandoffInit::StaticSolve),
        "projection" => Ok(HandoffInit::Projection),
        _ => Err(format!("unknown handoff '{s}' (expected static-solve or projection)")),
    }
}

impl Flags {
    fn options(self) -> Result<Options> {
        let flags = Options {
            scheme: self.scheme,
            schemes: self.schemes.map(ListValue::Text),
            level: None,
            coarse_level: self.coarse_level,
            coarse_levels: self.coarse_levels.map(ListValue::Text),
            fine_level: self.fine_level,
            nu: self.nu,
            dt: self.dt,
            t0: self.t0,
            t_end: self.t_end,
            problem: self.problem,
            element: self.element,
            time_rule: self.time_rule,
            picard_tol: self.picard_tol,
            picard_max: self.picard_max,
            handoff: self.handoff,
            no_convection: self.no_convection.then_some(true),
            no_timing: self.no_timing.then_some(true),
            out: self.out,
        };
        match self.config {
            Some(path) => Ok(flags.over(Options::from_json(&read_text(&path)?)?)),
            None => Ok(flags),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io { path: "<stdout>".into(), message: e.to_string() }),
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("serializable");
    s.push('\n');
    s
}

const DEFAULT_COARSE_LEVEL: usize = 2;
const DEFAULT_FINE_LEVEL: usize = 5;

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::MeshInfo(a) => {
            let h = MeshHierarchy::new(a.level);
            emit(a.out.as_deref(), &json(&h.level(a.level)?.stats()))
        }
        Command::Probe(f) => {
            let o = f.options()?;
            let coarse = o.coarse_level.unwrap_or(DEFAULT_COARSE_LEVEL);
            let fine = o.fine_level.unwrap_or(coarse + 2);
            if fine < coarse {
                return Err(Error::InvalidArgument(format!("fine level {fine} is below coarse level {coarse}")));
            }
            let mut levels = LevelCache::new(fine, o.element.unwrap_or_default());
            let report = levels.hierarchy(coarse, fine)?.probe_report()?;
            emit(o.out.as_deref(), &json(&report))
        }
        Command::Run(f) => {
            let o = f.options()?;
            let cfg = o.scheme_config();
            cfg.validate()?;
            let problem = o.problem.unwrap_or_default().build(cfg.nu)?;
            let fine = o.fine_level.unwrap_or(DEFAULT_FINE_LEVEL);
            let mut levels = LevelCache::new(fine, o.element.unwrap_or_default());
            let setup = match cfg.scheme {
                Scheme::GalerkinFine => Setup::fine_only(levels.operators(fine)?),
                _ => Setup::two_grid(levels.hierarchy(o.coarse_level.unwrap_or(DEFAULT_COARSE_LEVEL), fine)?),
            };
            let tr = schemes::run(&cfg, problem.as_ref(), &setup)?;
            emit(o.out.as_deref(), &trajectory_csv(&tr.records))?;
            let space = match cfg.scheme {
                Scheme::GalerkinCoarse => &setup.hier.as_ref().expect("two-grid setup").coarse().space,
                _ => &setup.fine.space,
            };
            let (l2, h1) = evaluate_errors(space, &tr.final_state.u, problem.as_ref(), tr.final_state.t)?;
            eprintln!("t = {}: error vs exact: L2 {l2:e}, H1 {h1:e}", tr.final_state.t);
            Ok(())
        }
        Command::Convergence(f) => {
            let o = f.options()?;
            let report = run_convergence(&o.convergence_config()?)?;
            for r in report.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("{} H={}: {}", r.scheme, r.coarse_h, r.error.as_deref().unwrap_or_default());
            }
            match o.out.as_deref() {
                Some(p) if p.extension().is_some_and(|e| e == "json") => emit(Some(p), &report.to_json()),
                out => emit(out, &report.to_csv()),
            }
        }
    }
}

/// Runs the command line; returns the process exit code (0 success, 1 usage or
/// input error, 2 numerical failure).
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
