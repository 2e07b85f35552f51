//! End-to-end driver: problem files, the solve/certify/classify pipeline,
//! report files and the `a / b / c` summary tables.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::configurations::{classify, Classification};
use crate::equilibria::{
    export_field, filter_admissible, velocity_field, Equilibrium, EquilibriumError, GridSpec,
};
use crate::mpoly::{Cx, PolySystem};
use crate::polytope::{finiteness_certificate, FinitenessCertificate, OracleConfig, PolytopeError};
use crate::solver::{
    cluster_endpoints, track_all, write_diagnostics, HomotopyConfig, SolutionSet, SolverError,
    TrackedPath,
};
use crate::vortex_system::{
    build_poly_system, check_genericity, BackgroundFlow, Bounds, Circulations, GenericityReport,
    VortexError, VortexProblem,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_GENERIC: i32 = 2;

/// Cell text for cases outside the table's scope.
pub const EMPTY_CELL: &str = "—";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed problem: {0}")]
    Problem(String),
    #[error(transparent)]
    Vortex(#[from] VortexError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("all {0} paths diverged")]
    AllDivergent(usize),
    #[error("equilibrium {index} out of range (have {count})")]
    NoSuchEquilibrium { index: usize, count: usize },
}

/// A circulation as written in a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaInput {
    Fraction { num: i64, den: i64 },
    Integer(i64),
    Float(f64),
}

/// Problem file contents. Coefficients are `[re, im]`, low degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub gammas: Vec<GammaInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_coeffs: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub pre_normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, rename = "W_coeffs", skip_serializing_if = "Option::is_none")]
    pub big_w_coeffs: Option<Vec<[f64; 2]>>,
}

fn cx(v: &[[f64; 2]]) -> Vec<Cx> {
    v.iter().map(|&[re, im]| Cx::new(re, im)).collect()
}

impl ProblemSpec {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Read {
            path: path.to_owned(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Exact circulations unless some entry is a non-integral float.
    pub fn circulations(&self) -> Result<Circulations, PipelineError> {
        let exact: Option<Vec<BigRational>> = self
            .gammas
            .iter()
            .map(|g| match *g {
                GammaInput::Fraction { num, den } if den != 0 => {
                    Some(BigRational::new(BigInt::from(num), BigInt::from(den)))
                }
                GammaInput::Integer(k) => Some(BigRational::from_integer(BigInt::from(k))),
                _ => None,
            })
            .collect();
        if let Some(e) = exact {
            return Ok(Circulations::from_rationals(e)?);
        }
        let vals = self
            .gammas
            .iter()
            .map(|g| match *g {
                GammaInput::Fraction { den: 0, .. } => {
                    Err(PipelineError::Problem("zero denominator".into()))
                }
                GammaInput::Fraction { num, den } => Ok(num as f64 / den as f64),
                GammaInput::Integer(k) => Ok(k as f64),
                GammaInput::Float(x) => Ok(x),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Circulations::from_f64(vals)?)
    }

    pub fn build(&self) -> Result<VortexProblem, PipelineError> {
        let gammas = self.circulations()?;
        if self.pre_normalized {
            if self.w_coeffs.is_some() {
                return Err(PipelineError::Problem(
                    "w_coeffs given with pre_normalized".into(),
                ));
            }
            let big_w = cx(self.big_w_coeffs.as_deref().unwrap_or(&[]));
            let m = self.m.unwrap_or(big_w.len());
            Ok(VortexProblem::pre_normalized(gammas, m, big_w)?)
        } else {
            if self.big_w_coeffs.is_some() || self.m.is_some() {
                return Err(PipelineError::Problem(
                    "W_coeffs/m require pre_normalized".into(),
                ));
            }
            let w = self
                .w_coeffs
                .as_deref()
                .ok_or_else(|| PipelineError::Problem("missing w_coeffs".into()))?;
            Ok(VortexProblem::normalize(
                gammas,
                BackgroundFlow::new(cx(w))?,
            )?)
        }
    }
}

/// Result of the full pipeline on one problem.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub seed: u64,
    pub problem: VortexProblem,
    pub genericity: GenericityReport,
    pub system: PolySystem,
    pub certificate: FinitenessCertificate,
    pub paths: Vec<TrackedPath>,
    pub solutions: SolutionSet,
    pub equilibria: Vec<Equilibrium>,
    pub classification: Classification,
}

impl Analysis {
    pub fn bounds_guaranteed(&self) -> bool {
        self.genericity.is_generic()
    }

    pub fn exit_code(&self) -> i32 {
        if self.bounds_guaranteed() {
            EXIT_OK
        } else {
            EXIT_NOT_GENERIC
        }
    }

    pub fn distinct_admissible(&self) -> usize {
        self.equilibria.iter().filter(|e| e.admissible).count()
    }

    /// `(classes, distinct admissible, total multiplicity)`.
    pub fn counts(&self) -> CellCounts {
        CellCounts {
            classes: self.classification.class_count(),
            distinct_admissible: self.distinct_admissible(),
            total_multiplicity: self.solutions.total_multiplicity(),
        }
    }

    pub fn solutions_report(&self) -> SolutionsReport<'_> {
        SolutionsReport {
            header: self.header(),
            genericity: &self.genericity,
            bounds: self.problem.bounds(),
            scale: self.problem.scale(),
            total_paths: self.solutions.total_paths,
            divergent_path_count: self.solutions.divergent_path_count,
            total_multiplicity: self.solutions.total_multiplicity(),
            distinct_admissible: self.distinct_admissible(),
            equilibria: &self.equilibria,
        }
    }

    pub fn certificate_report(&self) -> CertificateReport<'_> {
        CertificateReport {
            header: self.header(),
            certificate: &self.certificate,
        }
    }

    pub fn classification_report(&self) -> ClassificationReport<'_> {
        ClassificationReport {
            header: self.header(),
            classification: &self.classification,
        }
    }

    fn header(&self) -> ReportHeader {
        ReportHeader {
            seed: self.seed,
            bounds_guaranteed: self.bounds_guaranteed(),
            note: (!self.bounds_guaranteed()).then_some("bounds not guaranteed"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub seed: u64,
    pub bounds_guaranteed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

#[derive(Debug, Serialize)]
pub struct SolutionsReport<'a> {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub genericity: &'a GenericityReport,
    pub bounds: Bounds,
    pub scale: Cx,
    pub total_paths: usize,
    pub divergent_path_count: usize,
    pub total_multiplicity: usize,
    pub distinct_admissible: usize,
    pub equilibria: &'a [Equilibrium],
}

#[derive(Debug, Serialize)]
pub struct CertificateReport<'a> {
    #[serde(flatten)]
    pub header: ReportHeader,
    #[serde(flatten)]
    pub certificate: &'a FinitenessCertificate,
}

#[derive(Debug, Serialize)]
pub struct ClassificationReport<'a> {
    #[serde(flatten)]
    pub header: ReportHeader,
    #[serde(flatten)]
    pub classification: &'a Classification,
}

/// Runs normalize → genericity → system → certificate → solve → filter →
/// classify. A generic problem whose paths all diverge is an error; a
/// non-generic one is reported as is.
pub fn analyze(
    problem: VortexProblem,
    solver: &HomotopyConfig,
    seed: u64,
) -> Result<Analysis, PipelineError> {
    let genericity = check_genericity(problem.circulations())?;
    let system = build_poly_system(&problem)?;
    let certificate = finiteness_certificate(
        &system,
        problem.circulations(),
        &OracleConfig {
            seed,
            ..OracleConfig::default()
        },
    )?;
    let paths = track_all(&system, solver, seed)?;
    let solutions = cluster_endpoints(&system, &paths, solver);
    if solutions.clusters.is_empty() && genericity.is_generic() {
        return Err(PipelineError::AllDivergent(solutions.total_paths));
    }
    let equilibria = filter_admissible(&solutions, &problem);
    let classification = classify(&equilibria, &problem);
    Ok(Analysis {
        seed,
        problem,
        genericity,
        system,
        certificate,
        paths,
        solutions,
        equilibria,
        classification,
    })
}

/// Artifact locations; `None` skips the artifact.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub solutions: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
    pub classification: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
    pub field: Option<PathBuf>,
}

impl Outputs {
    /// Standard file names inside `dir`; the field is written only with a
    /// grid.
    pub fn in_dir(dir: &Path, with_field: bool) -> Self {
        Outputs {
            solutions: Some(dir.join("solutions.json")),
            certificate: Some(dir.join("certificate.json")),
            classification: Some(dir.join("classification.json")),
            diagnostics: Some(dir.join("diagnostics.jsonl")),
            field: with_field.then(|| dir.join("field.csv")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem_path: PathBuf,
    pub seed: u64,
    pub solver: HomotopyConfig,
    pub outputs: Outputs,
    pub grid: Option<GridSpec>,
    /// 0-based index into the equilibrium list for the field export.
    pub field_index: usize,
}

impl RunConfig {
    pub fn new(problem_path: impl Into<PathBuf>, seed: u64) -> Self {
        RunConfig {
            problem_path: problem_path.into(),
            seed,
            solver: HomotopyConfig::default(),
            outputs: Outputs::default(),
            grid: None,
            field_index: 0,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes every requested artifact for `analysis`.
pub fn write_artifacts(
    analysis: &Analysis,
    outputs: &Outputs,
    grid: Option<&GridSpec>,
    field_index: usize,
) -> Result<(), PipelineError> {
    if let Some(p) = &outputs.solutions {
        write_json(p, &analysis.solutions_report())?;
    }
    if let Some(p) = &outputs.certificate {
        write_json(p, &analysis.certificate_report())?;
    }
    if let Some(p) = &outputs.classification {
        write_json(p, &analysis.classification_report())?;
    }
    if let Some(p) = &outputs.diagnostics {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        write_diagnostics(&analysis.paths, BufWriter::new(fs::File::create(p)?))?;
    }
    if let (Some(p), Some(grid)) = (&outputs.field, grid) {
        let eq = analysis
            .equilibria
            .get(field_index)
            .ok_or(PipelineError::NoSuchEquilibrium {
                index: field_index,
                count: analysis.equilibria.len(),
            })?;
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        export_field(&velocity_field(&analysis.problem, eq, grid)?, p)?;
    }
    Ok(())
}

/// Loads, analyzes and writes artifacts; returns the exit code (0, or 2
/// when the genericity condition fails).
pub fn run(cfg: &RunConfig) -> Result<i32, PipelineError> {
    let problem = ProblemSpec::load(&cfg.problem_path)?.build()?;
    let analysis = analyze(problem, &cfg.solver, cfg.seed)?;
    write_artifacts(&analysis, &cfg.outputs, cfg.grid.as_ref(), cfg.field_index)?;
    Ok(analysis.exit_code())
}

/// Maps a pipeline result to a process exit code.
pub fn exit_code(result: &Result<i32, PipelineError>) -> i32 {
    match result {
        Ok(code) => *code,
        Err(_) => EXIT_ERROR,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub classes: usize,
    pub distinct_admissible: usize,
    pub total_multiplicity: usize,
}

impl std::fmt::Display for CellCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} / {} / {}",
            self.classes, self.distinct_admissible, self.total_multiplicity
        )
    }
}

/// Layout of a summary table; `null` cells are outside its scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub corner: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRowSpec {
    pub label: String,
    pub cells: Vec<Option<ProblemSpec>>,
}

impl TableSpec {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Read {
            path: path.to_owned(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableCell {
    pub counts: CellCounts,
    pub bounds_guaranteed: bool,
    pub config_bound_attained: bool,
    pub root_bound_attained: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableResult {
    pub title: String,
    pub corner: String,
    pub columns: Vec<String>,
    pub row_labels: Vec<String>,
    pub cells: Vec<Vec<Option<TableCell>>>,
}

/// Runs every in-scope cell with the same solver settings and seed.
pub fn table_report(
    table: &TableSpec,
    solver: &HomotopyConfig,
    seed: u64,
) -> Result<TableResult, PipelineError> {
    let cells = table
        .rows
        .iter()
        .map(|row| {
            if row.cells.len() != table.columns.len() {
                return Err(PipelineError::Problem(format!(
                    "row {:?} has {} cells for {} columns",
                    row.label,
                    row.cells.len(),
                    table.columns.len()
                )));
            }
            row.cells
                .iter()
                .map(|cell| {
                    cell.as_ref()
                        .map(|spec| {
                            let a = analyze(spec.build()?, solver, seed)?;
                            let counts = a.counts();
                            assert_eq!(counts.classes, a.classification.classes.len());
                            assert_eq!(counts.total_multiplicity, a.solutions.total_multiplicity());
                            Ok(TableCell {
                                counts,
                                bounds_guaranteed: a.bounds_guaranteed(),
                                config_bound_attained: a.classification.attained,
                                root_bound_attained: num_bigint::BigUint::from(
                                    counts.total_multiplicity,
                                ) == a.problem.bounds().refined,
                            })
                        })
                        .transpose()
                })
                .collect::<Result<Vec<_>, PipelineError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TableResult {
        title: table.title.clone(),
        corner: table.corner.clone(),
        columns: table.columns.clone(),
        row_labels: table.rows.iter().map(|r| r.label.clone()).collect(),
        cells,
    })
}

impl TableResult {
    /// Plain-text grid, one line per row; empty for an empty table.
    pub fn render(&self) -> String {
        if self.row_labels.is_empty() && self.columns.is_empty() {
            return String::new();
        }
        let mut grid: Vec<Vec<String>> = vec![std::iter::once(self.corner.clone())
            .chain(self.columns.iter().cloned())
            .collect()];
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            grid.push(
                std::iter::once(label.clone())
                    .chain(row.iter().map(|c| match c {
                        Some(c) => c.counts.to_string(),
                        None => EMPTY_CELL.to_string(),
                    }))
                    .collect(),
            );
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        if !self.title.is_empty() {
            writeln!(out, "{}", self.title).unwrap();
        }
        for row in &grid {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            writeln!(out, "| {} |", line.join(" | ")).unwrap();
        }
        out
    }
}
