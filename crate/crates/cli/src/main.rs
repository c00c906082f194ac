use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hydrocheck::checks::CheckKind;
use hydrocheck::corpus::{corpus_get, corpus_list};
use hydrocheck::diag::{riemann_invariants_2d, GridSpec};
use hydrocheck_cli::definition::{from_example, parse_file, signature, Definition, PlanOverrides};
use hydrocheck_cli::output::{render, Format};
use hydrocheck_cli::runner::{run, Input, RunOptions, EXIT_INPUT};
use hydrocheck_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "hydrocheck", version, about = "Sampled checks on hydrodynamic-type structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PlanFlags {
    /// Number of sample points per check.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling box, `LO:HI` for every coordinate or `LO:HI,LO:HI,...`.
    #[arg(long = "box", allow_hyphen_values = true)]
    bounds: Option<String>,
    #[arg(long)]
    tol_pass: Option<f64>,
    #[arg(long)]
    tol_fail: Option<f64>,
    /// Pencil coefficients, `a,b;c,d;...`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long)]
    det_floor: Option<f64>,
    #[arg(long)]
    gap_floor: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run checks from a definition file or `corpus:ID`.
    Run {
        input: String,
        /// Check to run; repeatable. Defaults to every entry in the file.
        #[arg(long = "check")]
        checks: Vec<String>,
        #[command(flatten)]
        plan: PlanFlags,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Largest accepted dimension (at most 8).
        #[arg(long, default_value_t = 8)]
        max_dim: usize,
    },
    /// List corpus examples and check names.
    List,
    /// Print a corpus example as a definition file.
    Export { id: String },
    /// Tabulate Riemann invariants of a two-component system on a lattice.
    Chart {
        input: String,
        /// Affinor or system to chart; needed when the file has several.
        #[arg(long)]
        affinor: Option<String>,
        #[arg(long, default_value_t = 9)]
        nodes: usize,
        #[command(flatten)]
        plan: PlanFlags,
    },
}

fn parse_pair(text: &str, sep: char, flag: &str) -> Result<[f64; 2]> {
    let (a, b) = text
        .split_once(sep)
        .ok_or_else(|| CliError::flag(flag, format!("expected `a{sep}b`, found `{text}`")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::flag(flag, format!("`{s}` is not a number")))
    };
    Ok([num(a)?, num(b)?])
}

impl PlanFlags {
    fn overrides(&self) -> Result<PlanOverrides> {
        let bounds = self
            .bounds
            .as_deref()
            .map(|s| s.split(',').map(|p| parse_pair(p, ':', "--box")).collect::<Result<Vec<_>>>())
            .transpose()?;
        let lambda = self
            .lambda
            .as_deref()
            .map(|s| s.split(';').map(|p| parse_pair(p, ',', "--lambda")).collect::<Result<Vec<_>>>())
            .transpose()?;
        Ok(PlanOverrides {
            samples: self.samples,
            seed: self.seed,
            bounds,
            tol_pass: self.tol_pass,
            tol_fail: self.tol_fail,
            lambda,
            det_floor: self.det_floor,
            gap_floor: self.gap_floor,
        })
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Run {
            input,
            checks,
            plan,
            format,
            max_dim,
        } => {
            if max_dim == 0 || max_dim > hydrocheck::fields::MAX_DIMENSION {
                return Err(CliError::flag("--max-dim", "must be between 1 and 8"));
            }
            let checks = checks
                .iter()
                .map(|c| c.parse::<CheckKind>().map_err(|e| CliError::flag("--check", e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let options = RunOptions {
                checks,
                plan: plan.overrides()?,
                max_dim,
            };
            let report = run(&Input::parse(&input), &options)?;
            let _ = stdout.write_all(render(&report, format).as_bytes());
            Ok(report.exit_status)
        }
        Command::List => {
            let _ = writeln!(stdout, "corpus examples:");
            for id in corpus_list() {
                let ex = corpus_get(&id)?;
                let _ = writeln!(stdout, "  {id:<14} dim {}  {}", ex.dim(), ex.description);
            }
            let _ = writeln!(stdout, "checks:");
            for k in CheckKind::ALL {
                let _ = writeln!(stdout, "  {:<24} {}", k.name(), signature(k));
            }
            Ok(0)
        }
        Command::Export { id } => {
            let id = id.strip_prefix("corpus:").unwrap_or(&id);
            let ex = corpus_get(id)?;
            let text = serde_json::to_string_pretty(&from_example(&ex)).expect("serializable");
            let _ = writeln!(stdout, "{text}");
            Ok(0)
        }
        Command::Chart {
            input,
            affinor,
            nodes,
            plan,
        } => {
            let input = Input::parse(&input);
            let def = Definition::resolve(parse_file(&input.text()?)?, 2)?;
            if def.dim() != 2 {
                return Err(CliError::schema("$.coordinates", "charts need two coordinates"));
            }
            let name = match affinor {
                Some(a) => a,
                None => def
                    .infer_args(CheckKind::RiemannInvariants2d)?
                    .remove(0),
            };
            let entry = hydrocheck_cli::definition::CheckEntry {
                kind: CheckKind::RiemannInvariants2d,
                args: vec![name],
                h: None,
                plan: PlanOverrides::default(),
                expect: None,
            };
            let sp = def.plan_for(&entry, &plan.overrides()?)?;
            let bound = def.bind(&entry, "--affinor")?;
            let hydrocheck_cli::definition::Bound::System(v) = bound else {
                unreachable!("riemann-invariants-2d binds one system")
            };
            let mut grid = GridSpec::new([sp.bounds[0], sp.bounds[1]], [nodes.max(2); 2]);
            grid.gap_floor = sp.gap_floor;
            let chart = riemann_invariants_2d(&v, &grid)?;
            let _ = stdout.write_all(chart.to_table().as_bytes());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !e.to_string().contains(&s.to_string()) {
                    eprintln!("  caused by: {s}");
                }
                source = s.source();
            }
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
