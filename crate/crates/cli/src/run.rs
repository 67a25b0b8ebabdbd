use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use relaxbias_core::mc::DrawSet;
use relaxbias_core::workflows::{self, PriorEcho, Provenance};
use relaxbias_core::{AnalysisReport, Design, PriorPanel, WorkflowError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{prepare, Analysis, RunConfig};
use crate::error::CliError;
use crate::exec::Threaded;
use crate::json;

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub threads: Option<usize>,
    pub draws_csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sampling.seed = seed;
        }
        if let Some(draws) = o.draws {
            self.sampling.draws = draws;
        }
        if let Some(threads) = o.threads {
            self.sampling.threads = Some(threads);
        }
        if let Some(p) = &o.draws_csv {
            self.output.draws_csv_path = Some(p.clone());
        }
        if let Some(p) = &o.report {
            self.output.report_path = Some(p.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorCheckReport {
    pub analysis: Analysis,
    pub priors: Vec<PriorEcho>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Analysis(AnalysisReport),
    PriorCheck(PriorCheckReport),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub draws: Option<DrawSet>,
}

/// SHA-256 of the settings that determine the numbers in a report. Thread
/// count and output paths are left out.
pub fn config_digest(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.sampling.threads = None;
    c.output.report_path = None;
    c.output.draws_csv_path = None;
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    let p = prepare(config)?;
    let digest = config_digest(config);
    let exec = Threaded::new(config.threads());
    let table = || p.table.as_ref().expect("validated config has a table");
    let (mut report, draws) = match p.analysis {
        Analysis::PriorCheck => {
            let (mut priors, mut warnings) = match (workflows::prior_check(&p.panel), p.options.crude_prior) {
                (Err(WorkflowError::FlatOnly), Some(_)) => (Vec::new(), Vec::new()),
                (r, _) => r?,
            };
            if let Some(crude) = p.options.crude_prior {
                let panel = PriorPanel::loglinear(&[crude], Design::CaseControl).map_err(WorkflowError::from)?;
                for mut echo in workflows::prior_gauges(&panel)? {
                    echo.label = format!("crude {}", echo.label);
                    priors.push(echo);
                }
                warnings.extend(
                    workflows::weak_prior_warnings(&panel).into_iter().map(|w| format!("crude prior: {w}")),
                );
            }
            let provenance = Provenance {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_digest: Some(digest),
                ..Default::default()
            };
            let report = PriorCheckReport { analysis: Analysis::PriorCheck, priors, warnings, provenance };
            return Ok(Outcome { report: Report::PriorCheck(report), draws: None });
        }
        Analysis::Conventional => (workflows::run_conventional(table(), &p.options)?, None),
        Analysis::Validation => (workflows::run_validation(table(), &p.panel, &p.options)?, None),
        Analysis::Misclassification => workflows::run_misclassification(table(), &p.panel, &p.options, &exec)?,
        Analysis::Confounder => workflows::run_confounder(table(), &p.panel, &p.options, &exec)?,
        Analysis::Selection => {
            let mode = p.selection_mode.expect("validated selection config has a mode");
            workflows::run_selection(table(), &p.panel, mode, &p.options, &exec)?
        }
    };
    report.provenance.config_digest = Some(digest);
    Ok(Outcome { report: Report::Analysis(report), draws })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

/// Draws in index order: `draw_index,target,<bias coefficients...>`.
pub fn write_draws_csv(draws: &DrawSet, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "draw_index,target")?;
    for c in &draws.bias_names {
        write!(out, ",{}", c.name())?;
    }
    writeln!(out)?;
    for (i, t) in draws.targets.iter().enumerate() {
        write!(out, "{i},{t:e}")?;
        for b in draws.bias_row(i) {
            write!(out, ",{b:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Write the JSON report and draws file named in the config, if any.
pub fn write_outputs(config: &RunConfig, outcome: &Outcome) -> Result<(), CliError> {
    if let Some(path) = &config.output.report_path {
        fs::write(path, json::to_string(&outcome.report)).map_err(|e| io_error(path, e))?;
    }
    if let Some(path) = &config.output.draws_csv_path {
        let draws = outcome
            .draws
            .as_ref()
            .ok_or_else(|| CliError::config("output.draws_csv_path: this run produced no draws"))?;
        let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = BufWriter::new(file);
        write_draws_csv(draws, &mut w).and_then(|_| w.flush()).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}
