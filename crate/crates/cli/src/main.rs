//! `vortexeq`: solve, certify, classify and export fixed vortex equilibria.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vortexeq::equilibria::{velocity_field, write_field_csv, GridSpec};
use vortexeq::pipeline::{
    analyze, table_report, Analysis, ProblemSpec, TableSpec, EMPTY_CELL, EXIT_ERROR,
};
use vortexeq::solver::{write_diagnostics, HomotopyConfig};

const THREADS_ENV: &str = "VORTEXEQ_THREADS";

#[derive(Parser)]
#[command(
    name = "vortexeq",
    version,
    about = "Fixed equilibria of point vortices in a polynomial background flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium system and report every endpoint cluster.
    Solve(Common),
    /// Run the face-by-face finiteness certificate.
    Certify(Common),
    /// Group the admissible solutions into configurations.
    Classify(Common),
    /// Sample the complex velocity of one equilibrium on a grid.
    Field(FieldArgs),
    /// Summarize a table of problems as "classes / distinct admissible / total".
    Table(TableArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    common: Common,
    /// "xmin,xmax,ymin,ymax,res"
    #[arg(long, allow_hyphen_values = true)]
    grid: GridSpec,
    /// Equilibrium to sample, 1-based in report order.
    #[arg(long, default_value_t = 1)]
    root: usize,
}

#[derive(Args)]
struct TableArgs {
    /// Table layout file (JSON).
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV}={v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn load(common: &Common) -> Result<Analysis> {
    let problem = ProblemSpec::load(&common.problem)?.build()?;
    Ok(analyze(problem, &HomotopyConfig::default(), common.seed)?)
}

/// Writes `bytes` to `dir/name`, or to stdout without a directory.
fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| path.display().to_string())?;
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn json_only(c: &Common, what: &str) -> Result<()> {
    if c.format != Format::Json {
        bail!("{what} supports only --format json");
    }
    Ok(())
}

fn solutions_csv(a: &Analysis) -> Vec<u8> {
    let n = a.problem.n();
    let mut s = String::from("index,multiplicity,admissible");
    for j in 1..=n {
        s.push_str(&format!(",re_z{j},im_z{j}"));
    }
    s.push('\n');
    for (i, e) in a.equilibria.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{}",
            i + 1,
            e.multiplicity,
            u8::from(e.admissible)
        ));
        for z in &e.z {
            s.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
        }
        s.push('\n');
    }
    s.into_bytes()
}

fn execute(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Solve(c) => {
            let a = load(&c)?;
            match c.format {
                Format::Json => emit(
                    c.out.as_deref(),
                    "solutions.json",
                    &json(&a.solutions_report())?,
                )?,
                Format::Csv => emit(c.out.as_deref(), "solutions.csv", &solutions_csv(&a))?,
            }
            if let Some(dir) = &c.out {
                let mut buf = Vec::new();
                write_diagnostics(&a.paths, &mut buf)?;
                emit(Some(dir), "diagnostics.jsonl", &buf)?;
            }
            Ok(a.exit_code())
        }
        Command::Certify(c) => {
            json_only(&c, "certify")?;
            let a = load(&c)?;
            emit(
                c.out.as_deref(),
                "certificate.json",
                &json(&a.certificate_report())?,
            )?;
            Ok(a.exit_code())
        }
        Command::Classify(c) => {
            json_only(&c, "classify")?;
            let a = load(&c)?;
            emit(
                c.out.as_deref(),
                "classification.json",
                &json(&a.classification_report())?,
            )?;
            Ok(a.exit_code())
        }
        Command::Field(f) => {
            let a = load(&f.common)?;
            let count = a.equilibria.len();
            let eq = f
                .root
                .checked_sub(1)
                .and_then(|i| a.equilibria.get(i))
                .with_context(|| format!("--root {} out of range 1..={count}", f.root))?;
            let grid = velocity_field(&a.problem, eq, &f.grid)?;
            match f.common.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_field_csv(&grid, &mut buf)?;
                    emit(f.common.out.as_deref(), "field.csv", &buf)?;
                }
                Format::Json => emit(f.common.out.as_deref(), "field.json", &json(&grid)?)?,
            }
            Ok(a.exit_code())
        }
        Command::Table(t) => {
            let spec = TableSpec::load(&t.table)?;
            let result = table_report(&spec, &HomotopyConfig::default(), t.seed)?;
            match t.format {
                None => emit(t.out.as_deref(), "table.txt", result.render().as_bytes())?,
                Some(Format::Json) => emit(t.out.as_deref(), "table.json", &json(&result)?)?,
                Some(Format::Csv) => {
                    let mut s = String::from("row,column,cell\n");
                    for (label, row) in result.row_labels.iter().zip(&result.cells) {
                        for (col, cell) in result.columns.iter().zip(row) {
                            let text = cell
                                .as_ref()
                                .map_or_else(|| EMPTY_CELL.to_string(), |c| c.counts.to_string());
                            s.push_str(&format!("\"{label}\",\"{col}\",{text}\n"));
                        }
                    }
                    emit(t.out.as_deref(), "table.csv", s.as_bytes())?;
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // usage errors exit 1; 2 is reserved for the genericity failure
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
