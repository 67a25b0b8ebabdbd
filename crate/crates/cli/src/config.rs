//! The JSON run configuration and its translation into core inputs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use relaxbias_core::tables::{RawCell, RawGroup};
use relaxbias_core::workflows::selection_panel;
use relaxbias_core::{
    Axis, Coef, Design, FitOptions, IdentifiedMode, PriorKind, PriorPanel, PriorSpec, RunOptions, SamplerConfig,
    StratifiedCountTable,
};
use relaxbias_core::model::SelectionMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::Num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Misclassification,
    Validation,
    Confounder,
    Selection,
    Conventional,
    PriorCheck,
}

impl Analysis {
    fn samples(self) -> bool {
        matches!(self, Analysis::Misclassification | Analysis::Confounder | Analysis::Selection)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableConfig>,
    #[serde(default)]
    pub priors: BTreeMap<String, PriorConfig>,
    /// Prior on `beta_XY` of the observed table, for a semi-Bayes estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crude_prior: Option<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_mode: Option<SelectionMode>,
    #[serde(default)]
    pub design: Design,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Cells over `axes`. A cell that omits an axis counts records on which that
/// axis was not measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub axes: Vec<Axis>,
    pub cells: Vec<CellConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub at: BTreeMap<Axis, u8>,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    Flat,
    Normal { mean: Num, variance: Num },
    Laplace { mean: Num, scale: Num },
    LogF { m: Num, s: Num, r: Num, n: Num },
}

impl PriorConfig {
    pub fn kind(&self) -> PriorKind {
        match self {
            PriorConfig::Flat => PriorKind::Flat,
            PriorConfig::Normal { mean, variance } => PriorKind::Normal { mean: mean.value(), variance: variance.value() },
            PriorConfig::Laplace { mean, scale } => PriorKind::Laplace { mean: mean.value(), scale: scale.value() },
            PriorConfig::LogF { m, s, r, n } => {
                PriorKind::LogF { m: m.value(), s: s.value(), r: r.value(), n: n.value() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    pub hessian_step: f64,
    pub interval_level: f64,
    /// Add profile-likelihood intervals next to the Wald ones.
    pub profile: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        let f = FitOptions::default();
        FitConfig {
            gradient_tol: f.gradient_tol,
            step_tol: f.step_tol,
            max_iterations: f.max_iterations,
            hessian_step: f.hessian_step,
            interval_level: 0.95,
            profile: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub enabled: bool,
    pub draws: usize,
    pub seed: u64,
    pub identified_mode: IdentifiedMode,
    pub dirichlet_prior: f64,
    pub chunk: usize,
    /// Worker threads; results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        SamplingConfig {
            enabled: true,
            draws: s.draws,
            seed: s.seed,
            identified_mode: s.identified_mode,
            dirichlet_prior: s.dirichlet_prior,
            chunk: s.chunk,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub levels: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws_csv_path: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { levels: RunOptions::default().levels, report_path: None, draws_csv_path: None }
    }
}

/// A config resolved into the objects the workflows take.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub analysis: Analysis,
    pub table: Option<StratifiedCountTable>,
    pub panel: PriorPanel,
    pub selection_mode: Option<SelectionMode>,
    pub options: RunOptions,
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(format!("{path}: {}", e.into_inner()))
    })?;
    prepare(&config)?;
    Ok(config)
}

fn positive(v: f64, path: &str) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{path}: must be a positive number")))
    }
}

fn unit_open(v: f64, path: &str) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::config(format!("{path}: must lie strictly between 0 and 1")))
    }
}

impl RunConfig {
    fn check_settings(&self) -> Result<(), CliError> {
        let f = &self.fit;
        positive(f.gradient_tol, "fit.gradient_tol")?;
        positive(f.step_tol, "fit.step_tol")?;
        positive(f.hessian_step, "fit.hessian_step")?;
        if f.max_iterations == 0 {
            return Err(CliError::config("fit.max_iterations: must be at least 1"));
        }
        unit_open(f.interval_level, "fit.interval_level")?;

        let s = &self.sampling;
        if s.draws == 0 {
            return Err(CliError::config("sampling.draws: must be at least 1"));
        }
        if s.chunk == 0 {
            return Err(CliError::config("sampling.chunk: must be at least 1"));
        }
        if s.threads == Some(0) {
            return Err(CliError::config("sampling.threads: must be at least 1"));
        }
        if !(s.dirichlet_prior >= 0.0 && s.dirichlet_prior.is_finite()) {
            return Err(CliError::config("sampling.dirichlet_prior: must be a nonnegative number"));
        }

        let levels = &self.output.levels;
        if levels.is_empty() {
            return Err(CliError::config("output.levels: at least one level is required"));
        }
        for (i, &l) in levels.iter().enumerate() {
            unit_open(l, &format!("output.levels[{i}]"))?;
            if i > 0 && levels[i - 1] >= l {
                return Err(CliError::config(format!("output.levels[{i}]: levels must be strictly increasing")));
            }
        }
        Ok(())
    }

    fn check_fields(&self) -> Result<(), CliError> {
        let a = self.analysis;
        if a != Analysis::PriorCheck && self.table.is_none() {
            return Err(CliError::config("table: required for this analysis"));
        }
        match (a, self.selection_mode) {
            (Analysis::Selection, None) => {
                return Err(CliError::config("selection_mode: required for a selection analysis"));
            }
            (Analysis::Selection | Analysis::PriorCheck, _) | (_, None) => {}
            (_, Some(_)) => return Err(CliError::config("selection_mode: only valid for a selection analysis")),
        }
        if a == Analysis::Conventional && !self.priors.is_empty() {
            return Err(CliError::config("priors: a conventional analysis takes only crude_prior"));
        }
        if a == Analysis::PriorCheck && self.priors.is_empty() && self.crude_prior.is_none() {
            return Err(CliError::config("priors: prior-check needs at least one prior"));
        }
        if self.crude_prior.is_some()
            && !matches!(
                a,
                Analysis::Conventional | Analysis::Misclassification | Analysis::Confounder | Analysis::PriorCheck
            )
        {
            return Err(CliError::config("crude_prior: not used by this analysis"));
        }
        Ok(())
    }

    fn specs(&self) -> Result<Vec<PriorSpec>, CliError> {
        self.priors
            .iter()
            .map(|(name, p)| {
                let coef = Coef::from_name(name)
                    .ok_or_else(|| CliError::config(format!("priors.{name}: unknown coefficient")))?;
                PriorSpec::new(coef, p.kind()).map_err(|e| CliError::config(format!("priors.{name}: {e}")))
            })
            .collect()
    }

    fn panel(&self) -> Result<PriorPanel, CliError> {
        let specs = self.specs()?;
        let panel = match self.selection_mode {
            Some(mode) if matches!(self.analysis, Analysis::Selection | Analysis::PriorCheck) => {
                selection_panel(&specs, mode).map_err(|e| CliError::config(format!("priors: {e}")))?
            }
            _ => PriorPanel::loglinear(&specs, self.design).map_err(|e| CliError::config(format!("priors: {e}")))?,
        };
        Ok(panel)
    }

    fn crude(&self) -> Result<Option<PriorSpec>, CliError> {
        self.crude_prior
            .as_ref()
            .map(|p| PriorSpec::new(Coef::XY, p.kind()).map_err(|e| CliError::config(format!("crude_prior: {e}"))))
            .transpose()
    }

    pub fn sampler(&self) -> SamplerConfig {
        let s = &self.sampling;
        SamplerConfig {
            draws: s.draws,
            seed: s.seed,
            identified_mode: s.identified_mode,
            dirichlet_prior: s.dirichlet_prior,
            chunk: s.chunk,
        }
    }

    pub fn threads(&self) -> usize {
        self.sampling.threads.unwrap_or(1)
    }
}

impl TableConfig {
    pub fn to_table(&self) -> Result<StratifiedCountTable, CliError> {
        let mut groups: Vec<RawGroup> = Vec::new();
        for (i, cell) in self.cells.iter().enumerate() {
            if let Some(a) = cell.at.keys().find(|a| !self.axes.contains(a)) {
                return Err(CliError::data(format!("table.cells[{i}].at: axis {a} is not listed in table.axes")));
            }
            let latent: Vec<Axis> = self.axes.iter().copied().filter(|a| !cell.at.contains_key(a)).collect();
            let at: Vec<(Axis, u8)> = self.axes.iter().filter_map(|a| cell.at.get(a).map(|&l| (*a, l))).collect();
            let raw = RawCell { at, count: cell.count };
            match groups.iter_mut().find(|g| g.latent == latent) {
                Some(g) => g.cells.push(raw),
                None => groups.push(RawGroup { latent, cells: vec![raw] }),
            }
        }
        StratifiedCountTable::load(&self.axes, &groups).map_err(|e| CliError::data(format!("table: {e}")))
    }
}

/// Validate a config and resolve it into workflow inputs.
pub fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    config.check_settings()?;
    config.check_fields()?;
    let panel = config.panel()?;
    let crude_prior = config.crude()?;
    let table = config.table.as_ref().map(TableConfig::to_table).transpose()?;
    let f = &config.fit;
    let options = RunOptions {
        sampler: (config.sampling.enabled && config.analysis.samples()).then(|| config.sampler()),
        levels: config.output.levels.clone(),
        interval_level: f.interval_level,
        fit: FitOptions {
            gradient_tol: f.gradient_tol,
            step_tol: f.step_tol,
            max_iterations: f.max_iterations,
            hessian_step: f.hessian_step,
        },
        profile: f.profile,
        crude_prior,
    };
    Ok(Prepared { analysis: config.analysis, table, panel, selection_mode: config.selection_mode, options })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(analysis: &str) -> String {
        format!(
            r#"{{"analysis": "{analysis}", "table": {{"axes": ["X", "Y"], "cells": [
                {{"at": {{"X": 1, "Y": 1}}, "count": 173}}, {{"at": {{"X": 0, "Y": 1}}, "count": 602}},
                {{"at": {{"X": 1, "Y": 0}}, "count": 134}}, {{"at": {{"X": 0, "Y": 0}}, "count": 663}}]}}}}"#
        )
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse_config(&minimal("conventional")).unwrap();
        assert_eq!(c.sampling.draws, 250_000);
        assert_eq!(c.output.levels, vec![0.025, 0.5, 0.975]);
        assert_eq!(c.design, Design::CaseControl);
        let p = prepare(&c).unwrap();
        assert!(p.options.sampler.is_none());
        assert_eq!(p.table.unwrap().total(), 1572.0);
    }

    #[test]
    fn unknown_keys_carry_their_path() {
        let text = minimal("conventional").replacen("\"analysis\"", "\"sampling\": {\"seeds\": 3}, \"analysis\"", 1);
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.starts_with("sampling.seeds: unknown field `seeds`"), "{}", e.message);
    }

    #[test]
    fn prior_expression_strings() {
        let text = minimal("misclassification")
            .replacen("\"analysis\"", r#""priors": {"beta_T": {"dist": "normal", "mean": "logit(0.1)", "variance": 0.16}}, "analysis""#, 1);
        let c = parse_config(&text).unwrap();
        let p = prepare(&c).unwrap();
        match p.panel.get(Coef::T).unwrap().kind {
            PriorKind::Normal { mean, .. } => assert!((mean - (1.0f64 / 9.0).ln()).abs() < 1e-15),
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn bad_levels_and_draws() {
        let base = minimal("misclassification");
        let e = parse_config(&base.replacen("\"analysis\"", r#""output": {"levels": [0.5, 0.25]}, "analysis""#, 1))
            .unwrap_err();
        assert!(e.message.contains("output.levels[1]"));
        let e = parse_config(&base.replacen("\"analysis\"", r#""sampling": {"draws": 0}, "analysis""#, 1)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn partially_measured_cells_form_latent_groups() {
        let mut cells = Vec::new();
        for k in 0..12u8 {
            let (x, y) = (k & 1, (k >> 1) & 1);
            let at = if k < 8 { vec![(Axis::W, k >> 2), (Axis::X, x), (Axis::Y, y)] } else { vec![(Axis::X, x), (Axis::Y, y)] };
            cells.push(CellConfig { at: at.into_iter().collect(), count: 1.0 });
        }
        let t = TableConfig { axes: vec![Axis::W, Axis::X, Axis::Y], cells };
        let table = t.to_table().unwrap();
        assert_eq!(table.groups().len(), 2);
        assert_eq!(table.groups()[1].latent(), &[Axis::W]);
        assert_eq!(table.total(), 12.0);

        let mut stray = t.clone();
        stray.cells[0].at.insert(Axis::T, 1);
        assert_eq!(stray.to_table().unwrap_err().category, relaxbias_core::ErrorCategory::Data);
    }
}
