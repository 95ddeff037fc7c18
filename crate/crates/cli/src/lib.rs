//! `megsim run | sweep | compare`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use megsim::config::{case_study, load_config, parse_config, ConfigDocument, CASE_STUDY_TOML};
use megsim::simkit::{
    comparison, comparison_table, comparison_to_csv, records_to_csv, run_scenario_with, sweep_snr_with, Comparison,
    RunRecord,
};
use megsim::Error;
use serde::Serialize;

/// Environment variable naming the directory outputs go to when `--out`
/// is not given.
pub const OUT_DIR_ENV: &str = "MEGSIM_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "megsim", version, about = "Simulate split generative pipelines over noisy edge links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every scheme at the configured SNRs and write per-run CSV.
    Run(Common),
    /// Run over an inclusive SNR grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// Also write a JSON summary with per-scheme curves and the crossover.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Print per-scheme means as a table; `--out` receives them as CSV.
    Compare(Common),
    /// Print the bundled case-study config.
    ShowConfig,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario TOML; the bundled case study when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` override, relative to `scenario` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

/// Error report written to stderr as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "config" => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    fn output(path: &Path, e: std::io::Error) -> Self {
        Self {
            kind: "io",
            path: Some(path.display().to_string()),
            message: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { path, message } => Self {
                kind: "config",
                path: (!path.is_empty()).then_some(path),
                message,
            },
            // Unreadable config files count as config errors.
            Error::Io { path, message } => Self {
                kind: "config",
                path: Some(path),
                message,
            },
            other => Self {
                kind: "runtime",
                path: None,
                message: other.to_string(),
            },
        }
    }
}

pub fn load(common: &Common) -> Result<ConfigDocument, CliError> {
    let mut doc = match &common.config {
        Some(p) => load_config(p, &common.set)?,
        None if common.set.is_empty() => case_study(),
        None => parse_config(CASE_STUDY_TOML, &common.set)?,
    };
    if let Some(seed) = common.seed {
        doc.scenario.seed = seed;
    }
    if common.parallel == 0 {
        return Err(Error::config("parallel", "must be >= 1").into());
    }
    Ok(doc)
}

/// `--out`, else `$MEGSIM_OUT_DIR/<default_name>`, else stdout.
pub fn output_path(out: &Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    out.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(default_name)))
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
            }
            fs::write(p, text).map_err(|e| CliError::output(p, e))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError {
            kind: "io",
            path: None,
            message: e.to_string(),
        }),
    }
}

pub fn cmd_run(common: &Common, stdout: &mut dyn Write) -> Result<Vec<RunRecord>, CliError> {
    let doc = load(common)?;
    let records = run_scenario_with(&doc.scenario, common.parallel)?;
    let path = output_path(&common.out, &format!("{}_run.csv", doc.scenario.name));
    write_output(path.as_deref(), &records_to_csv(&records), stdout)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub mse: f64,
    pub psnr_db: f64,
    pub t_e2e_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub seed: u64,
    pub repetitions: u32,
    pub snr_db: Vec<f64>,
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
    pub crossover_snr_db: Option<f64>,
}

pub fn sweep_summary(doc: &ConfigDocument, snrs: Vec<f64>, cmp: &Comparison) -> SweepSummary {
    let mut curves: BTreeMap<String, Vec<CurvePoint>> = BTreeMap::new();
    for r in &cmp.rows {
        curves.entry(r.scheme.name().to_string()).or_default().push(CurvePoint {
            snr_db: r.snr_db,
            mse: r.mse,
            psnr_db: r.psnr_db,
            t_e2e_s: r.t_e2e_s,
        });
    }
    SweepSummary {
        scenario: doc.scenario.name.clone(),
        seed: doc.scenario.seed,
        repetitions: doc.scenario.repetitions,
        snr_db: snrs,
        curves,
        crossover_snr_db: cmp.crossover_snr_db,
    }
}

pub fn cmd_sweep(
    common: &Common,
    from: f64,
    to: f64,
    step: f64,
    summary: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(Vec<RunRecord>, SweepSummary), CliError> {
    let doc = load(common)?;
    let records = sweep_snr_with(&doc.scenario, from, to, step, common.parallel)?;
    let path = output_path(&common.out, &format!("{}_sweep.csv", doc.scenario.name));
    write_output(path.as_deref(), &records_to_csv(&records), stdout)?;
    let snrs = megsim::simkit::snr_grid(from, to, step)?;
    let s = sweep_summary(&doc, snrs, &comparison(&records));
    if let Some(p) = summary {
        let mut json = serde_json::to_string_pretty(&s).expect("summary serializes");
        json.push('\n');
        write_output(Some(p), &json, stdout)?;
    }
    Ok((records, s))
}

pub fn cmd_compare(common: &Common, stdout: &mut dyn Write) -> Result<Comparison, CliError> {
    let doc = load(common)?;
    let cmp = comparison(&run_scenario_with(&doc.scenario, common.parallel)?);
    write_output(None, &comparison_table(&cmp.rows), stdout)?;
    if let Some(p) = output_path(&common.out, &format!("{}_compare.csv", doc.scenario.name)) {
        write_output(Some(&p), &comparison_to_csv(&cmp.rows), stdout)?;
    }
    Ok(cmp)
}

/// Parses `args`, runs the command and returns the exit code. Errors go to
/// `stderr` as `{"error": {...}}`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c, stdout).map(drop),
        Command::Sweep {
            common,
            from,
            to,
            step,
            summary,
        } => cmd_sweep(common, *from, *to, *step, summary.as_deref(), stdout).map(drop),
        Command::Compare(c) => cmd_compare(c, stdout).map(drop),
        Command::ShowConfig => write_output(None, CASE_STUDY_TOML, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let report = serde_json::json!({ "error": e });
            let _ = writeln!(stderr, "{report}");
            e.exit_code()
        }
    }
}
