//! Command-line front end.
//!
//! Exit codes: 0 on YES or success, 2 on a NO verdict or a failed
//! verification, 1 on any error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eigen::fiber_spectra;
use crate::error::{Error, Result};
use crate::fields::{FrequencyGrid, MeasurableMask, ScalarField};
use crate::problem::{read_decomposition, write_decomposition, BuiltProblem, ProblemFile};
use crate::rangeop::RangeOperatorField;
use crate::sdiag::{
    decide_s_diagonalizable, oblique_synthesis, spectral_synthesis, Decision, SDiagonalization, Tolerances,
    Verdict, NORMAL_TOL,
};
use crate::signal::{eigen_action_defect, CoefficientVector};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO: i32 = 2;

const DEFAULT_OUT: &str = "sisdiag-out";
const SIGNAL_TRIALS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Frame, norm, normality and fiber spectra.
    Analyze,
    /// Decide s-diagonalizability and write the decomposition.
    Diagonalize,
    /// Re-check a stored decomposition against the problem.
    Verify,
    /// Synthesis residual of a stored decomposition.
    Synthesize,
}

#[derive(Debug, Parser)]
#[command(name = "sisdiag", version, about = "s-diagonalization of shift-preserving operators")]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Frame, norm, normality and fiber spectra.
    Analyze(Options),
    /// Decide s-diagonalizability and write the decomposition.
    Diagonalize(Options),
    /// Re-check a stored decomposition against the problem.
    Verify(Options),
    /// Synthesis residual of a stored decomposition.
    Synthesize(Options),
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Problem file.
    pub problem: PathBuf,
    /// Grid points per dimension (overrides the problem file).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Angle margin: NO when ess sup C_b exceeds 1 - margin.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Relative rank threshold.
    #[arg(long = "tol-rank")]
    pub tol_rank: Option<f64>,
    /// Absolute eigenvalue clustering tolerance.
    #[arg(long = "tol-cluster")]
    pub tol_cluster: Option<f64>,
    /// Output directory for reports, CSV data and the decomposition.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Decomposition file (verify, synthesize); defaults to the one
    /// diagonalize writes into the output directory.
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    /// Seed for the random signals used by verify.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl Action {
    pub fn split(&self) -> (Command, &Options) {
        match self {
            Action::Analyze(o) => (Command::Analyze, o),
            Action::Diagonalize(o) => (Command::Diagonalize, o),
            Action::Verify(o) => (Command::Verify, o),
            Action::Synthesize(o) => (Command::Synthesize, o),
        }
    }
}

/// Ordered `key = value` report.
#[derive(Debug, Default, Clone)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Outcome of one command: report, exit code and files to write.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub code: i32,
    pub files: Vec<(String, String)>,
}

fn tolerances(problem: &ProblemFile, o: &Options) -> Result<Tolerances> {
    let mut t = problem.tolerances;
    if let Some(m) = o.margin {
        t.margin = m;
    }
    if let Some(r) = o.tol_rank {
        t.rank = r;
    }
    if let Some(c) = o.tol_cluster {
        t.cluster = Some(c);
    }
    t.validate()?;
    Ok(t)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "problem".to_string(), |s| s.to_string_lossy().into_owned())
}

fn out_dir(o: &Options) -> PathBuf {
    o.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn decomposition_path(o: &Options) -> PathBuf {
    o.decomposition
        .clone()
        .unwrap_or_else(|| out_dir(o).join(format!("{}.decomposition", stem(&o.problem))))
}

fn header(report: &mut Report, cmd: Command, o: &Options, built: &BuiltProblem, tol: &Tolerances) {
    let g = built.grid;
    report.push("version", VERSION);
    report.push("command", format!("{cmd:?}").to_lowercase());
    report.push("problem", o.problem.file_name().map_or(String::new(), |s| s.to_string_lossy().into_owned()));
    report.push("grid.dim", g.dim());
    report.push("grid.n", g.n_per_dim());
    report.push("window.radius", built.window.radius());
    report.push("generators", built.generators.count());
    let k_r = built.operator.bound();
    report.num("tol.rank", tol.rank);
    report.num("tol.cluster", tol.cluster_for(k_r));
    report.num("tol.margin", tol.margin);
    report.num("tol.lower", tol.lower_for(k_r));
    report.push("tol.fit_degree", tol.fit_degree);
}

fn grid_columns(grid: FrequencyGrid) -> String {
    (1..=grid.dim()).map(|a| format!("omega_{a}")).collect::<Vec<_>>().join(",")
}

fn csv_real(grid: FrequencyGrid, name: &str, f: &ScalarField<f64>) -> String {
    let mut out = format!("cell,{},{name}\n", grid_columns(grid));
    for (t, w) in grid.centers().enumerate() {
        let ws: Vec<String> = w.iter().map(|x| fmt_f64(*x)).collect();
        let _ = writeln!(out, "{t},{},{}", ws.join(","), fmt_f64(*f.get(t)));
    }
    out
}

fn csv_lambda(grid: FrequencyGrid, lam: &ScalarField<crate::C64>, support: &MeasurableMask) -> String {
    let mut out = format!("cell,{},re,im,in_spectrum\n", grid_columns(grid));
    for (t, w) in grid.centers().enumerate() {
        let ws: Vec<String> = w.iter().map(|x| fmt_f64(*x)).collect();
        let z = lam.get(t);
        let _ = writeln!(
            out,
            "{t},{},{},{},{}",
            ws.join(","),
            fmt_f64(z.re),
            fmt_f64(z.im),
            u8::from(support.contains(t))
        );
    }
    out
}

fn operator_facts(report: &mut Report, r: &RangeOperatorField, tol: &Tolerances) {
    let frame = r.frame();
    let dims = frame.dims();
    report.push("frame.length", frame.length());
    report.push("frame.min_dim", dims.iter().min().copied().unwrap_or(0));
    report.num("K_R", r.bound());
    report.num("normality_defect", r.normality_defect());
    report.push("normal", r.is_normal(NORMAL_TOL));
    report.push("self_adjoint", r.is_self_adjoint(NORMAL_TOL));
    report.push("bounded_below", r.invert(tol.lower_for(r.bound())).is_ok());
}

fn decision_facts(report: &mut Report, d: &Decision) {
    match &d.verdict {
        Verdict::Yes => report.push("verdict", "YES"),
        Verdict::No(reason) => {
            report.push("verdict", "NO");
            report.push("reason", reason.label());
            report.push("reason.detail", reason);
        }
    }
    report.push("g", d.g);
    report.num("defect_measure", d.defect_mask.measure());
    report.push("defect_cells", d.defect_mask.count());
    if let Some(e) = d.ess_sup_cb {
        report.num("ess_sup_cb", e);
    }
    for (j, lam) in d.pasted.iter().enumerate() {
        report.num(format!("spectrum_measure.{}", j + 1), lam.support().measure());
    }
    if let Some(dec) = &d.decomposition {
        report.push("beta", dec.beta());
        report.push("minimal", dec.is_minimal());
        report.push("spectra_characterized", d.spectra_characterized);
        for (j, p) in dec.pairs().iter().enumerate() {
            if let Some(s) = p.symbol() {
                report.num(format!("symbol_residual.{}", j + 1), s.residual());
                report.push(format!("symbol_terms.{}", j + 1), s.coefficients().len());
            }
        }
    }
}

/// Spectral synthesis when the operator is normal, oblique otherwise.
fn synthesis_facts(report: &mut Report, dec: &SDiagonalization, r: &RangeOperatorField) -> Result<ScalarField<f64>> {
    let residual = if r.is_normal(NORMAL_TOL) {
        report.push("synthesis", "spectral");
        spectral_synthesis(dec, r)?
    } else {
        report.push("synthesis", "oblique");
        let o = oblique_synthesis(dec, r)?;
        report.num("synthesis.max_condition", o.max_condition);
        if let Some(w) = o.warning {
            report.push("synthesis.warning", w);
        }
        o.residual
    };
    let max = residual.values().iter().copied().fold(0.0, f64::max);
    report.num("max_synthesis_residual", max);
    report.num("max_synthesis_residual_rel", max / r.bound().max(1.0));
    Ok(residual)
}

fn load(o: &Options) -> Result<(ProblemFile, BuiltProblem)> {
    let problem = ProblemFile::load(&o.problem)?;
    let base = o.problem.parent().unwrap_or(Path::new("."));
    let built = problem.build(base, o.grid)?;
    Ok((problem, built))
}

fn load_decomposition(o: &Options, built: &BuiltProblem) -> Result<SDiagonalization> {
    let path = decomposition_path(o);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let dec = read_decomposition(&text)?;
    if dec.grid() != built.grid {
        return Err(Error::InvalidDecomposition(format!(
            "decomposition grid {} differs from problem grid {}",
            dec.grid().n_per_dim(),
            built.grid.n_per_dim()
        )));
    }
    Ok(dec)
}

/// Runs one command without touching the filesystem except for reading
/// the problem (and decomposition).
pub fn execute(cmd: Command, o: &Options) -> Result<Outcome> {
    let (problem, built) = load(o)?;
    let tol = tolerances(&problem, o)?;
    let r = &built.operator;
    let grid = built.grid;
    let name = stem(&o.problem);
    let mut report = Report::default();
    let mut files = Vec::new();
    header(&mut report, cmd, o, &built, &tol);
    let code = match cmd {
        Command::Analyze => {
            operator_facts(&mut report, r, &tol);
            let d = decide_s_diagonalizable(r, &tol)?;
            decision_facts(&mut report, &d);
            if d.verdict.is_yes() {
                EXIT_OK
            } else {
                EXIT_NO
            }
        }
        Command::Diagonalize => {
            operator_facts(&mut report, r, &tol);
            let d = decide_s_diagonalizable(r, &tol)?;
            decision_facts(&mut report, &d);
            let counts = d.spectra.count_field().map(|&k| k as f64);
            files.push((format!("{name}.counts.csv"), csv_real(grid, "k", &counts)));
            if let Some(cb) = &d.cb {
                files.push((format!("{name}.cb.csv"), csv_real(grid, "c_b", cb)));
            }
            for (j, lam) in d.pasted.iter().enumerate() {
                files.push((
                    format!("{name}.lambda_{}.csv", j + 1),
                    csv_lambda(grid, lam.values(), lam.support()),
                ));
            }
            match &d.decomposition {
                Some(dec) => {
                    let check = dec.validate(r, Some(&d.spectra));
                    report.num("eigen_residual", check.eigen_residual);
                    report.push("h_equals_k", check.h_equals_k.unwrap_or(false));
                    let residual = synthesis_facts(&mut report, dec, r)?;
                    files.push((format!("{name}.synthesis.csv"), csv_real(grid, "residual", &residual)));
                    files.push((format!("{name}.decomposition"), write_decomposition(dec)));
                    report.push("decomposition", format!("{name}.decomposition"));
                    EXIT_OK
                }
                None => EXIT_NO,
            }
        }
        Command::Verify => {
            let dec = load_decomposition(o, &built)?;
            let spectra = fiber_spectra(r, dec.cluster_tol())?;
            let check = dec.validate(r, Some(&spectra));
            report.push("pairs", dec.len());
            report.push("g", dec.g());
            report.push("beta", dec.beta());
            report.push("nested", check.nested);
            report.num("eigen_residual", check.eigen_residual);
            report.num("min_direct_sum_sigma", check.min_direct_sum_sigma);
            report.num("min_separation", check.min_separation);
            report.num("orthonormality", check.orthonormality);
            report.push("h_equals_k", check.h_equals_k.unwrap_or(false));
            let mut failures = check.failures.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
            let mut worst = 0.0f64;
            let mut skipped = None;
            'pairs: for (j, p) in dec.pairs().iter().enumerate() {
                let Some(symbol) = p.symbol() else { continue };
                let bound = p.action_tol();
                for _ in 0..SIGNAL_TRIALS {
                    let seed = CoefficientVector::random(&mut rng, built.generators.count(), grid.dim(), 2);
                    match eigen_action_defect(r, symbol, p.eigenspace(), &seed) {
                        Ok((defect, norm)) => {
                            let rel = if norm > 0.0 { defect / norm } else { 0.0 };
                            worst = worst.max(rel);
                            if rel > bound {
                                failures.push(format!("pair {}: eigen action defect {rel:e} > {bound:e}", j + 1));
                                continue 'pairs;
                            }
                        }
                        Err(Error::NotRiesz(cell)) => {
                            skipped = Some(format!("generators dependent at cell {cell}"));
                            break 'pairs;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            match skipped {
                Some(why) => report.push("signal_check", format!("skipped ({why})")),
                None => {
                    report.push("signal_check", "done");
                    report.push("signal_check.trials", SIGNAL_TRIALS);
                    report.num("signal_check.max_relative_defect", worst);
                }
            }
            report.push("failures", failures.len());
            for (i, f) in failures.iter().enumerate() {
                report.push(format!("failure.{}", i + 1), f);
            }
            report.push("valid", failures.is_empty());
            if failures.is_empty() {
                EXIT_OK
            } else {
                EXIT_NO
            }
        }
        Command::Synthesize => {
            let dec = load_decomposition(o, &built)?;
            report.push("pairs", dec.len());
            let residual = synthesis_facts(&mut report, &dec, r)?;
            files.push((format!("{name}.synthesis.csv"), csv_real(grid, "residual", &residual)));
            EXIT_OK
        }
    };
    Ok(Outcome { report, code, files })
}

/// Runs a parsed command line, prints the report and writes artifacts.
/// Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (cmd, o) = cli.action.split();
    match execute(cmd, o).and_then(|out| persist(cmd, o, out)) {
        Ok((text, code)) => {
            print!("{text}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn persist(cmd: Command, o: &Options, out: Outcome) -> Result<(String, i32)> {
    let text = out.report.render();
    let write_out = o.out.is_some() || cmd == Command::Diagonalize;
    if write_out {
        let dir = out_dir(o);
        std::fs::create_dir_all(&dir)?;
        for (name, body) in &out.files {
            std::fs::write(dir.join(name), body)?;
        }
        let cmd_name = format!("{cmd:?}").to_lowercase();
        std::fs::write(dir.join(format!("{}.{cmd_name}.report", stem(&o.problem))), &text)?;
    }
    Ok((text, out.code))
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
