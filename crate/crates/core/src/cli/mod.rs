//! Experiment driver behind the `qergo` binary.
//!
//! Exit codes: 0 success, 2 config/schema error, 3 numerical failure.

mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::algebra::{SystemJson, Tolerances};
use crate::error::Error;
use crate::models::{
    family_sweep, Diagnostic, FamilyKind, ModelFamily, ObservableSpec, SweepOptions, SweepReport, TorusSymbol,
    BUILTINS, CAT_MAP, SHEAR,
};

pub use output::{write_outputs, FileEntry, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qergo", version, about = "Finite-dimensional quantum ergodicity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment config and write report.json, CSVs and a manifest.
    Run(RunArgs),
    /// Print built-in model kinds and observable symbols.
    ListFixtures {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads for sweeps over sizes.
    #[arg(long, env = "QERGO_JOBS")]
    pub jobs: Option<usize>,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for random models (overrides the config's `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplies every tolerance.
    #[arg(long)]
    pub tol_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub herm: Option<f64>,
    pub orth: Option<f64>,
    pub clustering: Option<f64>,
    pub null: Option<f64>,
}

/// Experiment description: either a model `family` or an inline `system`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub family: Option<ModelFamily>,
    #[serde(default)]
    pub system: Option<SystemJson>,
    pub diagnostics: Vec<Diagnostic>,
    /// Inclusive `[lo, hi]` size windows for medians.
    #[serde(default)]
    pub windows: Vec<[usize; 2]>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Option<ToleranceOverrides>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A config error with its position in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {} column {}: {}", self.line, self.column, self.message)
    }
}

/// Config keys whose position anchors a semantic error mentioning them.
const ANCHOR_KEYS: &[&str] = &[
    "e_grid",
    "e_fractions",
    "t_grid",
    "t_multiples",
    "root_variance_multiple",
    "thresholds",
    "schedule",
    "e_fraction",
    "sizes",
    "window",
    "tolerances",
    "matrix",
    "observables",
    "observable",
    "system",
    "family",
    "diagnostics",
    "dim",
];

fn position_of(text: &str, needle: &str) -> Option<(usize, usize)> {
    let at = text.find(needle)?;
    let line = text[..at].matches('\n').count() + 1;
    let column = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, column))
}

/// Drops the `config error:` prefix so anchoring sees the real subject.
fn bare(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        e => e.to_string(),
    }
}

fn anchored(text: &str, message: String) -> ConfigError {
    // observable names are the most specific anchor
    let quoted = message
        .split_whitespace()
        .nth(1)
        .map(|w| w.trim_end_matches(':'))
        .filter(|_| message.starts_with("observable "))
        .and_then(|name| position_of(text, &format!("\"{name}\"")));
    let pos = quoted.or_else(|| {
        ANCHOR_KEYS
            .iter()
            .filter(|k| message.contains(*k))
            .find_map(|k| position_of(text, &format!("\"{k}\"")))
    });
    let (line, column) = pos.unwrap_or((1, 1));
    ConfigError { line, column, message }
}

/// A parsed and validated config, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub family: ModelFamily,
    pub tolerances: Tolerances,
    pub windows: Vec<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Resolves the family and tolerances; `seed` and `tol_scale` override the
    /// config.
    pub fn prepare(
        &self,
        text: &str,
        seed: Option<u64>,
        tol_scale: Option<f64>,
    ) -> std::result::Result<Experiment, ConfigError> {
        let fail = |m: String| anchored(text, m);
        let mut family = match (&self.family, &self.system) {
            (Some(f), None) => f.clone(),
            (None, Some(s)) => ModelFamily::new(FamilyKind::SingleSystem { system: s.clone() }, Vec::new()),
            _ => return Err(fail("config needs exactly one of family, system".into())),
        };
        if let Some(s) = seed.or(self.seed) {
            family.seed = Some(s);
        }
        let mut tol = Tolerances::default();
        if let Some(o) = &self.tolerances {
            for (slot, v) in [
                (&mut tol.herm, o.herm),
                (&mut tol.orth, o.orth),
                (&mut tol.clustering, o.clustering),
                (&mut tol.null, o.null),
            ] {
                if let Some(v) = v {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(fail("tolerances must be positive".into()));
                    }
                    *slot = v;
                }
            }
        }
        if let Some(s) = tol_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(ConfigError {
                    line: 0,
                    column: 0,
                    message: format!("--tol-scale must be positive, got {s}"),
                });
            }
            tol = tol.scaled(s);
        }
        if self.diagnostics.is_empty() {
            return Err(fail("diagnostics must not be empty".into()));
        }
        family.validate().map_err(|e| fail(bare(e)))?;
        for d in &self.diagnostics {
            d.validate().map_err(|e| fail(format!("{} diagnostic: {e}", d.name())))?;
        }
        let windows: Vec<(usize, usize)> = self.windows.iter().map(|w| (w[0], w[1])).collect();
        if windows.iter().any(|(lo, hi)| lo > hi) {
            return Err(fail("window bounds must satisfy lo ≤ hi".into()));
        }
        if let FamilyKind::SingleSystem { system } = &family.kind {
            // surface matrix-shape problems as schema errors, not run failures
            system
                .clone()
                .into_system(tol)
                .map_err(|e| fail(format!("system: {e}")))?;
        }
        Ok(Experiment {
            config: self.clone(),
            family,
            tolerances: tol,
            windows,
        })
    }
}

pub fn load_experiment(
    path: &Path,
    seed: Option<u64>,
    tol_scale: Option<f64>,
) -> std::result::Result<(Experiment, String), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: 0,
        column: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let cfg = ExperimentConfig::parse(&text)?;
    let exp = cfg.prepare(&text, seed, tol_scale)?;
    Ok((exp, text))
}

/// Numerical problems found in a finished sweep, each naming the failing
/// invariant.
pub fn numerical_failures(report: &SweepReport) -> Vec<String> {
    let mut out = Vec::new();
    for s in &report.per_size {
        if let Some(e) = &s.error {
            out.push(format!("N = {}: {e}", s.size));
        }
        if let Some(g) = &s.gns {
            if !g.within_tolerance {
                out.push(format!(
                    "N = {}: GNS invariants exceed tolerance (max residual {:.3e}, cyclicity defect {})",
                    s.size,
                    g.summary.residuals.max_residual(),
                    g.summary.residuals.cyclicity_defect
                ));
            }
        }
        for o in &s.observables {
            if let Some(sc) = &o.schwartz {
                if sc.violations > 0 {
                    out.push(format!(
                        "N = {}, {}: Schwartz chain violated at {} grid points (max excess {:.3e})",
                        s.size, o.name, sc.violations, sc.max_excess
                    ));
                }
            }
        }
    }
    out
}

/// Runs a prepared experiment and writes its outputs.
pub fn run_experiment(
    exp: &Experiment,
    config_text: &str,
    out_dir: &Path,
    jobs: usize,
) -> crate::Result<(SweepReport, Manifest)> {
    // sequential kernels keep outputs bit-identical for any --jobs
    faer::set_global_parallelism(faer::Par::Seq);
    let opts = SweepOptions {
        jobs,
        tolerances: exp.tolerances,
        windows: exp.windows.clone(),
        ..Default::default()
    };
    let report = family_sweep(&exp.family, &exp.config.diagnostics, &opts)?;
    let manifest = write_outputs(exp, &report, config_text, out_dir)?;
    Ok((report, manifest))
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureKind {
    pub kind: &'static str,
    pub description: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[i64; 2]; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureSymbol {
    pub name: String,
    pub classical_average: [f64; 2],
    /// `[m, n, re, im]` rows.
    pub fourier: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureBuiltin {
    pub name: &'static str,
    pub classical_average: [f64; 2],
    pub description: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Catalog {
    pub kinds: Vec<FixtureKind>,
    pub symbols: Vec<FixtureSymbol>,
    pub builtins: Vec<FixtureBuiltin>,
}

pub fn catalog() -> Catalog {
    let kinds = vec![
        FixtureKind {
            kind: "cat_map",
            description: "quantized hyperbolic torus automorphism (classically ergodic)",
            matrix: Some(CAT_MAP),
        },
        FixtureKind {
            kind: "shear",
            description: "quantized parabolic shear, functions of p invariant (non-ergodic control)",
            matrix: Some(SHEAR),
        },
        FixtureKind {
            kind: "gue",
            description: "R-action generated by a GUE matrix, one seeded stream per size",
            matrix: None,
        },
        FixtureKind {
            kind: "single_system",
            description: "user-supplied system given inline under \"system\"",
            matrix: None,
        },
    ];
    let symbols = TorusSymbol::catalog()
        .into_iter()
        .map(|s| {
            let c = s.classical_average();
            FixtureSymbol {
                classical_average: [c.re, c.im],
                fourier: s
                    .coefficients
                    .iter()
                    .map(|&(m, n, z)| [m as f64, n as f64, z.re, z.im])
                    .collect(),
                name: s.name,
            }
        })
        .collect();
    let builtins = BUILTINS
        .iter()
        .map(|&b| FixtureBuiltin {
            name: b,
            classical_average: [0.0, 0.0],
            description: "diag(+1, …, +1, −1, …, −1), traceless",
        })
        .collect();
    Catalog {
        kinds,
        symbols,
        builtins,
    }
}

pub fn render_catalog(c: &Catalog) -> String {
    let mut s = String::from("model kinds:\n");
    for k in &c.kinds {
        match k.matrix {
            Some(m) => s.push_str(&format!("  {:<14} {} {:?}\n", k.kind, k.description, m)),
            None => s.push_str(&format!("  {:<14} {}\n", k.kind, k.description)),
        }
    }
    s.push_str("symbols (name, classical average, fourier rows [m, n, re, im]):\n");
    for f in &c.symbols {
        s.push_str(&format!(
            "  {:<14} {:<6} {:?}\n",
            f.name, f.classical_average[0], f.fourier
        ));
    }
    s.push_str("builtins:\n");
    for b in &c.builtins {
        s.push_str(&format!("  {:<14} {:<6} {}\n", b.name, b.classical_average[0], b.description));
    }
    s
}

fn resolve_jobs(flag: Option<usize>) -> usize {
    flag.unwrap_or(0)
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::ListFixtures { json } => {
            let c = catalog();
            if json {
                println!("{}", serde_json::to_string_pretty(&c).expect("catalog serializes"));
            } else {
                print!("{}", render_catalog(&c));
            }
            EXIT_OK
        }
        Command::Validate { config } => match load_experiment(&config, None, None) {
            Ok((exp, _)) => {
                println!(
                    "ok: {} family, {} size(s), {} diagnostic(s)",
                    exp.family.kind.name(),
                    exp.family.effective_sizes().len(),
                    exp.config.diagnostics.len()
                );
                EXIT_OK
            }
            Err(e) => {
                eprintln!("config error: {}: {e}", config.display());
                EXIT_SCHEMA
            }
        },
        Command::Run(args) => {
            let (exp, text) = match load_experiment(&args.config, args.seed, args.tol_scale) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("config error: {}: {e}", args.config.display());
                    return EXIT_SCHEMA;
                }
            };
            let out = args
                .out
                .clone()
                .or_else(|| exp.config.output.clone())
                .unwrap_or_else(|| PathBuf::from("qergo-out"));
            match run_experiment(&exp, &text, &out, resolve_jobs(args.jobs)) {
                Ok((report, _)) => {
                    let failures = numerical_failures(&report);
                    for t in &report.trends {
                        match t.slope {
                            Some(s) => println!("{} {}: slope {:.4} ({:?})", t.observable, t.quantity, s, t.verdict),
                            None => println!("{} {}: no trend fit", t.observable, t.quantity),
                        }
                    }
                    println!("wrote {}", out.display());
                    if failures.is_empty() {
                        EXIT_OK
                    } else {
                        for f in &failures {
                            eprintln!("numerical failure: {f}");
                        }
                        EXIT_NUMERICAL
                    }
                }
                Err(Error::Config(m)) | Err(Error::InvalidArgument(m)) => {
                    eprintln!("config error: {}: {m}", args.config.display());
                    EXIT_SCHEMA
                }
                Err(e @ (Error::Io(_) | Error::Json(_))) => {
                    eprintln!("error: {e}");
                    EXIT_NUMERICAL
                }
                Err(e) => {
                    eprintln!("numerical failure: {e}");
                    EXIT_NUMERICAL
                }
            }
        }
    }
}

/// Convenience for examples and tests: a one-observable family config.
pub fn symbol_family(kind: FamilyKind, sizes: Vec<usize>, symbols: &[&str]) -> ModelFamily {
    let mut f = ModelFamily::new(kind, sizes);
    for s in symbols {
        f.observables.push(ObservableSpec::symbol(s));
    }
    f
}
