//! End-to-end analyses producing structured reports.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::fit::{
    conventional_mle, maximize, profile_interval, FitError, FitOptions, FitProblem, FitResult, Functional,
    IntervalEstimate,
};
use crate::math::{abs, exp, normal_quantile, sqrt};
use crate::mc::{
    ignorance_interval, run_sampler, summarize, AnalysisKind, ChunkExecutor, DrawSet, DrawSummary, McError,
    SamplerConfig,
};
use crate::model::{Coef, PredictiveValues, SelectionMode, XyCells};
use crate::priors::{DataPriorRecord, Design, PriorError, PriorKind, PriorPanel, PriorSpec, ReportScale};
use crate::tables::{Axis, RawCell, RawGroup, StratifiedCountTable, TableError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("this analysis needs a table over axes {0}")]
    WrongAxes(&'static str),
    #[error("no validated records at X={x}, Y={y}")]
    EmptyValidationCell { x: u8, y: u8 },
    #[error("prior panel holds only flat priors")]
    FlatOnly,
}

/// Coarse error class used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Convergence,
    Sampling,
}

impl ErrorCategory {
    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Data => "data",
            ErrorCategory::Convergence => "convergence",
            ErrorCategory::Sampling => "sampling",
        }
    }
}

impl WorkflowError {
    pub fn category(&self) -> ErrorCategory {
        use ErrorCategory::*;
        match self {
            WorkflowError::Table(_) | WorkflowError::WrongAxes(_) | WorkflowError::EmptyValidationCell { .. } => Data,
            WorkflowError::Prior(_) | WorkflowError::FlatOnly => Config,
            WorkflowError::Fit(e) => match e {
                FitError::Table(_) | FitError::UnsupportedAxis(_) | FitError::FrameNeedsY => Data,
                FitError::Prior(_) => Config,
                _ => Convergence,
            },
            WorkflowError::Mc(e) => match e {
                McError::Table(_)
                | McError::NotIdentifiedTable
                | McError::EmptyStratum(_)
                | McError::FractionalCount => Data,
                McError::Prior(_)
                | McError::Config(_)
                | McError::ImproperBiasPrior(_)
                | McError::InformativeIdentifiedPrior(_)
                | McError::BadLevel(_)
                | McError::BadBox => Config,
                McError::TooManyNonFinite { .. } | McError::TooFewDraws(_) | McError::ZeroVariance => Sampling,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ReportKind {
    Conventional,
    Misclassification,
    Validation,
    Confounder,
    Selection,
}

/// One reported quantity. `se` is on the log scale for odds ratios.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub label: String,
    pub method: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl Estimate {
    fn from_interval(label: &str, method: &str, e: &IntervalEstimate) -> Self {
        Estimate {
            label: label.to_string(),
            method: method.to_string(),
            estimate: e.estimate,
            se: Some(e.se),
            lo: e.lo,
            hi: e.hi,
            level: e.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorEcho {
    pub label: String,
    pub prior: PriorKind,
    pub scale: ReportScale,
    pub lo95: f64,
    pub hi95: f64,
    pub data_prior: Option<DataPriorRecord>,
    /// Effective trial count `4 / variance` for normal priors.
    pub trials: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerReport {
    pub target: String,
    pub config: SamplerConfig,
    pub summary: DrawSummary,
}

/// Target range over the prior 95% box; `None` marks an unbounded side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IgnoranceReport {
    pub target: String,
    pub box_level: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitDiagnostic {
    pub label: String,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub fits: Vec<FitDiagnostic>,
    pub variance_ratio: Option<f64>,
    pub dropped_draws: usize,
    /// Relative difference between the closed-form and likelihood estimates.
    pub closed_form_agreement: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub tool_version: String,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub config_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationDetail {
    /// `(pi_111, pi_101, pi_110, pi_100)`.
    pub predictive_values: [f64; 4],
    /// Imputed T-Y table `(n11, n10, n01, n00)` with rows T and columns Y.
    pub imputed_ty: [f64; 4],
    pub closed_form_or: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalysisReport {
    pub analysis: ReportKind,
    pub estimates: Vec<Estimate>,
    pub sampler: Option<SamplerReport>,
    pub ignorance: Option<IgnoranceReport>,
    pub validation: Option<ValidationDetail>,
    pub priors: Vec<PriorEcho>,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

impl AnalysisReport {
    fn new(analysis: ReportKind) -> Self {
        AnalysisReport {
            analysis,
            estimates: Vec::new(),
            sampler: None,
            ignorance: None,
            validation: None,
            priors: Vec::new(),
            diagnostics: Diagnostics::default(),
            provenance: Provenance { tool_version: env!("CARGO_PKG_VERSION").to_string(), ..Default::default() },
        }
    }

    pub fn estimate(&self, label: &str, method: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.label == label && e.method == method)
    }

    fn record_fit(&mut self, label: &str, fit: &FitResult) {
        self.diagnostics.fits.push(FitDiagnostic {
            label: label.to_string(),
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
            objective: fit.objective,
        });
    }
}

/// Settings shared by every workflow.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// `None` skips Monte Carlo sampling.
    pub sampler: Option<SamplerConfig>,
    pub levels: Vec<f64>,
    pub interval_level: f64,
    pub fit: FitOptions,
    pub profile: bool,
    /// Prior on `beta_XY` for a semi-Bayes analysis of the observed 2x2.
    pub crude_prior: Option<PriorSpec>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            sampler: Some(SamplerConfig::default()),
            levels: alloc::vec![0.025, 0.5, 0.975],
            interval_level: 0.95,
            fit: FitOptions::default(),
            profile: false,
            crude_prior: None,
        }
    }
}

/// Output of a workflow: the report plus the raw draws, if sampled.
pub type WorkflowOutput = (AnalysisReport, Option<DrawSet>);

const SUM_LABEL: &str = "beta_TX+beta_TXY";

/// Implied 95% limits and data-prior records for every informative prior.
/// When `beta_TX` and `beta_TXY` both carry normal priors the induced prior
/// on their sum (the Y = 1 ROC log odds ratio) is added.
pub fn prior_gauges(panel: &PriorPanel) -> Result<Vec<PriorEcho>, WorkflowError> {
    let mut out = Vec::new();
    for s in panel.informative() {
        let scale = ReportScale::natural_for(s.target);
        let (lo95, hi95) = s.interval(0.95, scale)?;
        let data_prior = s.to_data_prior().ok();
        out.push(PriorEcho {
            label: s.target.name().to_string(),
            prior: s.kind,
            scale,
            lo95,
            hi95,
            data_prior,
            trials: data_prior.map(|d| d.trials),
        });
    }
    if let (Some(a), Some(b)) = (panel.get(Coef::TX), panel.get(Coef::TXY)) {
        if let (PriorKind::Normal { mean: m1, variance: v1 }, PriorKind::Normal { mean: m2, variance: v2 }) =
            (a.kind, b.kind)
        {
            let (mean, variance) = (m1 + m2, v1 + v2);
            let z = normal_quantile(0.975);
            let sd = sqrt(variance);
            out.push(PriorEcho {
                label: SUM_LABEL.to_string(),
                prior: PriorKind::Normal { mean, variance },
                scale: ReportScale::Exp,
                lo95: exp(mean - z * sd),
                hi95: exp(mean + z * sd),
                data_prior: None,
                trials: Some(4.0 / variance),
            });
        }
    }
    Ok(out)
}

/// Variance above which a normal prior carries less information than about
/// one hypothetical record.
pub const WEAK_PRIOR_VARIANCE: f64 = 4.0;

pub fn weak_prior_warnings(panel: &PriorPanel) -> Vec<String> {
    panel
        .informative()
        .filter_map(|s| match s.kind {
            PriorKind::Normal { variance, .. } if variance > WEAK_PRIOR_VARIANCE => Some(format!(
                "{}: variance {} makes the prior nearly noninformative, so the target is nearly nonidentified",
                s.target, variance
            )),
            _ => None,
        })
        .collect()
}

fn check_xy(table: &StratifiedCountTable) -> Result<(), WorkflowError> {
    let mut axes = table.axes().to_vec();
    axes.sort();
    if axes != [Axis::X, Axis::Y] || table.groups().len() != 1 {
        return Err(WorkflowError::WrongAxes("X, Y"));
    }
    Ok(())
}

fn conventional_block(
    report: &mut AnalysisReport,
    table: &StratifiedCountTable,
    other: Axis,
    label: &str,
    opts: &RunOptions,
) -> Result<f64, WorkflowError> {
    let two = table.two_by_two(Axis::Y, other)?;
    let mle = conventional_mle(&two)?;
    let (lo, hi) = two.wald_interval(opts.interval_level)?;
    let or = mle.functionals[0].1;
    report.estimates.push(Estimate {
        label: label.to_string(),
        method: "conventional".to_string(),
        estimate: or.estimate,
        se: Some(or.se),
        lo,
        hi,
        level: opts.interval_level,
    });
    if let Some(prior) = opts.crude_prior {
        let spec = PriorSpec::new(Coef::XY, prior.kind)?;
        let panel = PriorPanel::loglinear(&[spec], Design::CaseControl)?;
        let data = if other == Axis::X { table.clone() } else { table.rename_axis(other, Axis::X)? };
        let problem = FitProblem::new(data, panel.clone());
        let fit = maximize(&problem, &opts.fit)?;
        let e = crate::fit::wald_functional_interval(&fit, &Functional::LogOrXy, opts.interval_level)?;
        report.estimates.push(Estimate::from_interval(label, "semi-bayes", &e));
        report.record_fit("semi-bayes", &fit);
        if opts.profile {
            let (lo, hi) = profile_interval(&problem, &fit, &Functional::LogOrXy, opts.interval_level, &opts.fit)?;
            report.estimates.push(Estimate {
                label: label.to_string(),
                method: "semi-bayes-profile".to_string(),
                estimate: e.estimate,
                se: None,
                lo,
                hi,
                level: opts.interval_level,
            });
        }
        report.priors.extend(prior_gauges(&panel)?);
    }
    Ok(or.se * or.se)
}

fn sampler_block(
    report: &mut AnalysisReport,
    kind: AnalysisKind,
    table: &StratifiedCountTable,
    panel: &PriorPanel,
    crude_log_var: f64,
    label: &str,
    opts: &RunOptions,
    executor: &dyn ChunkExecutor,
) -> Result<Option<DrawSet>, WorkflowError> {
    let Some(cfg) = opts.sampler else {
        return Ok(None);
    };
    let draws = run_sampler(kind, table, panel, &cfg, executor)?;
    let summary = summarize(&draws.targets, &opts.levels, Some(crude_log_var))?;
    report.diagnostics.variance_ratio = summary.variance_ratio;
    report.diagnostics.dropped_draws = summary.dropped;
    report.provenance.seed = Some(cfg.seed);
    report.provenance.draws = Some(cfg.draws);
    if cfg.identified_mode == crate::mc::IdentifiedMode::Dirichlet {
        report.diagnostics.notes.push(format!(
            "identified block drawn from a Dirichlet posterior with prior mass {} per cell",
            cfg.dirichlet_prior
        ));
    }
    report.sampler = Some(SamplerReport { target: label.to_string(), config: cfg, summary });
    Ok(Some(draws))
}

fn ignorance_block(
    report: &mut AnalysisReport,
    kind: AnalysisKind,
    e_hat: &XyCells,
    panel: &PriorPanel,
    label: &str,
) -> Result<(), WorkflowError> {
    let mut bounds = Vec::new();
    for &c in kind.bias_coefs() {
        let spec = panel.get(c).filter(|s| !s.is_flat()).ok_or(McError::ImproperBiasPrior(c))?;
        bounds.push(spec.interval(0.95, ReportScale::Identity)?);
    }
    let iv = ignorance_interval(e_hat, &bounds, kind)?;
    report.ignorance = Some(IgnoranceReport {
        target: label.to_string(),
        box_level: 0.95,
        lo: (!iv.unbounded_lo).then_some(iv.lo),
        hi: (!iv.unbounded_hi).then_some(iv.hi),
    });
    Ok(())
}

fn xy_cells(table: &StratifiedCountTable, other: Axis) -> Result<XyCells, WorkflowError> {
    let t = table.two_by_two(other, Axis::Y)?;
    // two_by_two(row = other, col = Y): n11 = (1,1), n10 = (1,0), n01 = (0,1), n00 = (0,0)
    Ok(XyCells([t.n00, t.n10, t.n01, t.n11]))
}

/// Conventional and optional semi-Bayes analysis of an X-Y table.
pub fn run_conventional(table: &StratifiedCountTable, opts: &RunOptions) -> Result<AnalysisReport, WorkflowError> {
    check_xy(table)?;
    let mut report = AnalysisReport::new(ReportKind::Conventional);
    conventional_block(&mut report, table, Axis::X, "OR_XY", opts)?;
    Ok(report)
}

/// Exposure misclassification with T latent everywhere.
pub fn run_misclassification(
    table: &StratifiedCountTable,
    panel: &PriorPanel,
    opts: &RunOptions,
    executor: &dyn ChunkExecutor,
) -> Result<WorkflowOutput, WorkflowError> {
    check_xy(table)?;
    let mut report = AnalysisReport::new(ReportKind::Misclassification);
    let crude_var = conventional_block(&mut report, table, Axis::X, "OR_XY", opts)?;

    let latent = with_latent_t(table)?;
    let problem = FitProblem::new(latent, panel.clone());
    let fit = maximize(&problem, &opts.fit)?;
    report.record_fit("penalized", &fit);
    let e = crate::fit::wald_functional_interval(&fit, &Functional::LogOrTy, opts.interval_level)?;
    report.estimates.push(Estimate::from_interval("OR_TY", "penalized", &e));
    if opts.profile {
        let (lo, hi) = profile_interval(&problem, &fit, &Functional::LogOrTy, opts.interval_level, &opts.fit)?;
        report.estimates.push(Estimate {
            label: "OR_TY".to_string(),
            method: "penalized-profile".to_string(),
            estimate: e.estimate,
            se: None,
            lo,
            hi,
            level: opts.interval_level,
        });
    }
    report.priors.extend(prior_gauges(panel)?);
    report.diagnostics.notes.extend(weak_prior_warnings(panel));

    let kind = AnalysisKind::Misclassification;
    ignorance_block(&mut report, kind, &xy_cells(table, Axis::X)?, panel, "OR_TY")?;
    let draws = sampler_block(&mut report, kind, table, panel, crude_var, "OR_TY", opts, executor)?;
    Ok((report, draws))
}

fn with_latent_t(table: &StratifiedCountTable) -> Result<StratifiedCountTable, WorkflowError> {
    let g = &table.groups()[0];
    let cells = (0..g.counts().len())
        .map(|k| RawCell { at: g.label(k).0, count: g.counts()[k] })
        .collect();
    let mut axes = alloc::vec![Axis::T];
    axes.extend_from_slice(table.axes());
    Ok(StratifiedCountTable::load(&axes, &[RawGroup { latent: alloc::vec![Axis::T], cells }])?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormValidation {
    pub pi_hat: PredictiveValues,
    /// Rows T, columns Y: `(n11, n10, n01, n00)`.
    pub imputed_ty: [f64; 4],
    pub or: f64,
}

fn check_wxy(mixed: &StratifiedCountTable) -> Result<(), WorkflowError> {
    let mut axes = mixed.axes().to_vec();
    axes.sort();
    if axes != [Axis::W, Axis::X, Axis::Y] || mixed.is_latent_anywhere(Axis::X) || mixed.is_latent_anywhere(Axis::Y) {
        return Err(WorkflowError::WrongAxes("W, X, Y with only W ever missing"));
    }
    Ok(())
}

/// Impute missing W from the stratum-specific validated proportions,
/// collapse over X, and take the W-Y cross-product ratio.
pub fn closed_form_validation_or(mixed: &StratifiedCountTable) -> Result<ClosedFormValidation, WorkflowError> {
    check_wxy(mixed)?;
    let mut known = [[0.0f64; 2]; 4];
    let mut missing = [0.0f64; 4];
    for g in mixed.groups() {
        for (k, &count) in g.counts().iter().enumerate() {
            let x = g.level_at(k, Axis::X).unwrap();
            let y = g.level_at(k, Axis::Y).unwrap();
            let i = (x | (y << 1)) as usize;
            match g.level_at(k, Axis::W) {
                Some(w) => known[i][w as usize] += count,
                None => missing[i] += count,
            }
        }
    }
    let mut pi = [0.0; 4];
    let mut ty = [[0.0f64; 2]; 2];
    for i in 0..4 {
        let total = known[i][0] + known[i][1];
        if total <= 0.0 {
            return Err(WorkflowError::EmptyValidationCell { x: (i & 1) as u8, y: (i >> 1) as u8 });
        }
        pi[i] = known[i][1] / total;
        let y = i >> 1;
        ty[1][y] += known[i][1] + missing[i] * pi[i];
        ty[0][y] += known[i][0] + missing[i] * (1.0 - pi[i]);
    }
    let imputed_ty = [ty[1][1], ty[1][0], ty[0][1], ty[0][0]];
    let or = ty[1][1] * ty[0][0] / (ty[1][0] * ty[0][1]);
    Ok(ClosedFormValidation { pi_hat: PredictiveValues(pi), imputed_ty, or })
}

/// Validation-subsample analysis: W is the validated exposure, treated as T.
pub fn run_validation(
    mixed: &StratifiedCountTable,
    panel: &PriorPanel,
    opts: &RunOptions,
) -> Result<AnalysisReport, WorkflowError> {
    let closed = closed_form_validation_or(mixed)?;
    let mut report = AnalysisReport::new(ReportKind::Validation);
    report.validation = Some(ValidationDetail {
        predictive_values: closed.pi_hat.display_order(),
        imputed_ty: closed.imputed_ty,
        closed_form_or: closed.or,
    });

    let data = mixed.rename_axis(Axis::W, Axis::T)?;
    let flat = FitProblem::new(data.clone(), PriorPanel::flat_loglinear());
    let ml = maximize(&flat, &opts.fit)?;
    report.record_fit("ml", &ml);
    let e = crate::fit::wald_functional_interval(&ml, &Functional::LogOrTy, opts.interval_level)?;
    report.estimates.push(Estimate::from_interval("OR_TY", "ml", &e));
    report.diagnostics.closed_form_agreement = Some(abs(e.estimate - closed.or) / closed.or);

    if panel.informative().next().is_some() {
        let problem = FitProblem::new(data, panel.clone());
        let fit = maximize(&problem, &opts.fit)?;
        report.record_fit("penalized", &fit);
        let e = crate::fit::wald_functional_interval(&fit, &Functional::LogOrTy, opts.interval_level)?;
        report.estimates.push(Estimate::from_interval("OR_TY", "penalized", &e));
        report.priors.extend(prior_gauges(panel)?);
        report.diagnostics.notes.extend(weak_prior_warnings(panel));
    }
    Ok(report)
}

/// Adjustment of the X-Y odds ratio for an unmeasured binary confounder T.
pub fn run_confounder(
    table: &StratifiedCountTable,
    panel: &PriorPanel,
    opts: &RunOptions,
    executor: &dyn ChunkExecutor,
) -> Result<WorkflowOutput, WorkflowError> {
    check_xy(table)?;
    let mut report = AnalysisReport::new(ReportKind::Confounder);
    let crude_var = conventional_block(&mut report, table, Axis::X, "OR_XY", opts)?;
    report.priors.extend(prior_gauges(panel)?);
    report.diagnostics.notes.extend(weak_prior_warnings(panel));
    let kind = AnalysisKind::Confounder;
    ignorance_block(&mut report, kind, &xy_cells(table, Axis::X)?, panel, "OR_XY_adjusted")?;
    let draws = sampler_block(&mut report, kind, table, panel, crude_var, "OR_XY_adjusted", opts, executor)?;
    Ok((report, draws))
}

/// Selection bias from the selected (X = 0) stratum, a T-Y table.
pub fn run_selection(
    stratum0: &StratifiedCountTable,
    panel: &PriorPanel,
    mode: SelectionMode,
    opts: &RunOptions,
    executor: &dyn ChunkExecutor,
) -> Result<WorkflowOutput, WorkflowError> {
    let mut axes = stratum0.axes().to_vec();
    axes.sort();
    if axes != [Axis::T, Axis::Y] || stratum0.groups().len() != 1 {
        return Err(WorkflowError::WrongAxes("T, Y"));
    }
    let mut report = AnalysisReport::new(ReportKind::Selection);
    let no_prior = RunOptions { crude_prior: None, ..opts.clone() };
    let crude_var = conventional_block(&mut report, stratum0, Axis::T, "OR_TY_stratum", &no_prior)?;
    report.priors.extend(prior_gauges(panel)?);
    report.diagnostics.notes.extend(weak_prior_warnings(panel));
    let kind = AnalysisKind::Selection(mode);
    ignorance_block(&mut report, kind, &xy_cells(stratum0, Axis::T)?, panel, "OR_TY")?;
    let draws = sampler_block(&mut report, kind, stratum0, panel, crude_var, "OR_TY", opts, executor)?;
    Ok((report, draws))
}

/// Selection-model prior panel over the coefficients each mode draws.
pub fn selection_panel(specs: &[PriorSpec], mode: SelectionMode) -> Result<PriorPanel, WorkflowError> {
    let coefs: &[Coef] = match mode {
        SelectionMode::Density => &Coef::SELECTION,
        SelectionMode::Stratum => &Coef::X_BLOCK,
    };
    Ok(PriorPanel::new(coefs, specs, Design::CaseControl)?)
}

/// Summary of a panel's priors without touching data.
pub fn prior_check(panel: &PriorPanel) -> Result<(Vec<PriorEcho>, Vec<String>), WorkflowError> {
    if panel.informative().next().is_none() {
        return Err(WorkflowError::FlatOnly);
    }
    Ok((prior_gauges(panel)?, weak_prior_warnings(panel)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{ln, logit};
    use crate::mc::{IdentifiedMode, Sequential};

    fn sids_table() -> StratifiedCountTable {
        StratifiedCountTable::complete(
            &[Axis::X, Axis::Y],
            &[(&[1, 1], 173.0), (&[0, 1], 602.0), (&[1, 0], 134.0), (&[0, 0], 663.0)],
        )
        .unwrap()
    }

    fn validation_table() -> StratifiedCountTable {
        let known = [
            ((1, 1, 1), 29.0),
            ((1, 0, 1), 17.0),
            ((1, 1, 0), 21.0),
            ((1, 0, 0), 16.0),
            ((0, 1, 1), 22.0),
            ((0, 0, 1), 143.0),
            ((0, 1, 0), 12.0),
            ((0, 0, 0), 168.0),
        ]
        .iter()
        .map(|&((w, x, y), c)| RawCell::new(&[(Axis::W, w), (Axis::X, x), (Axis::Y, y)], c))
        .collect();
        let missing = [((1, 1), 122.0), ((0, 1), 442.0), ((1, 0), 101.0), ((0, 0), 479.0)]
            .iter()
            .map(|&((x, y), c)| RawCell::new(&[(Axis::X, x), (Axis::Y, y)], c))
            .collect();
        StratifiedCountTable::load(
            &[Axis::W, Axis::X, Axis::Y],
            &[RawGroup { latent: alloc::vec![], cells: known }, RawGroup { latent: alloc::vec![Axis::W], cells: missing }],
        )
        .unwrap()
    }

    fn sids_specs() -> Vec<PriorSpec> {
        alloc::vec![
            PriorSpec::normal(Coef::T, logit(0.1), 0.16).unwrap(),
            PriorSpec::normal(Coef::TX, ln(13.5), 0.25).unwrap(),
            PriorSpec::normal(Coef::TY, 0.0, 0.50).unwrap(),
            PriorSpec::normal(Coef::TXY, 0.0, 0.125).unwrap(),
        ]
    }

    fn no_sampling() -> RunOptions {
        RunOptions { sampler: None, ..Default::default() }
    }

    #[test]
    fn closed_form_validation_matches_validation_table() {
        let c = closed_form_validation_or(&validation_table()).unwrap();
        let want = [0.569, 0.106, 0.636, 0.087];
        for (got, w) in c.pi_hat.display_order().iter().zip(want) {
            assert!((got - w).abs() < 0.0005, "{got} vs {w}");
        }
        assert!((c.or - 1.21).abs() < 0.005);
    }

    #[test]
    fn fully_validated_table_gives_direct_or() {
        let t = StratifiedCountTable::complete(
            &[Axis::W, Axis::X, Axis::Y],
            &[
                (&[1, 1, 1], 5.0),
                (&[1, 0, 1], 7.0),
                (&[1, 1, 0], 3.0),
                (&[1, 0, 0], 2.0),
                (&[0, 1, 1], 4.0),
                (&[0, 0, 1], 9.0),
                (&[0, 1, 0], 6.0),
                (&[0, 0, 0], 8.0),
            ],
        )
        .unwrap();
        let c = closed_form_validation_or(&t).unwrap();
        let direct = (12.0 * 14.0) / (5.0 * 13.0);
        assert!((c.or - direct).abs() < 1e-12);
    }

    #[test]
    fn validation_fits() {
        let panel = PriorPanel::loglinear(&[], Design::CaseControl).unwrap();
        let r = run_validation(&validation_table(), &panel, &no_sampling()).unwrap();
        let ml = r.estimate("OR_TY", "ml").unwrap();
        assert!((ml.estimate - 1.21).abs() < 0.01);
        assert!((ml.lo - 0.79).abs() < 0.03 && (ml.hi - 1.87).abs() < 0.03, "{ml:?}");
        assert!(r.diagnostics.closed_form_agreement.unwrap() < 1e-6);
        let panel = PriorPanel::loglinear(&sids_specs(), Design::CaseControl).unwrap();
        let r = run_validation(&validation_table(), &panel, &no_sampling()).unwrap();
        let pen = r.estimate("OR_TY", "penalized").unwrap();
        assert!((pen.estimate - 1.20).abs() < 0.03);
        assert!((pen.lo - 0.81).abs() < 0.03 && (pen.hi - 1.77).abs() < 0.03, "{pen:?}");
    }

    #[test]
    fn misclassification_report_blocks() {
        let panel = PriorPanel::loglinear(&sids_specs(), Design::CaseControl).unwrap();
        let opts = RunOptions {
            sampler: Some(SamplerConfig { draws: 20_000, seed: 7, ..Default::default() }),
            crude_prior: Some(PriorSpec::normal(Coef::XY, 0.0, 0.5).unwrap()),
            ..Default::default()
        };
        let (r, draws) = run_misclassification(&sids_table(), &panel, &opts, &Sequential).unwrap();
        assert_eq!(draws.unwrap().len(), 20_000);
        assert!((r.estimate("OR_XY", "conventional").unwrap().estimate - 1.42).abs() < 0.005);
        assert!((r.estimate("OR_XY", "semi-bayes").unwrap().estimate - 1.41).abs() < 0.005);
        let pen = r.estimate("OR_TY", "penalized").unwrap();
        assert!((pen.estimate - 1.19).abs() < 0.01);
        let s = &r.sampler.as_ref().unwrap().summary;
        assert!((s.median - 1.19).abs() < 0.05);
        for e in &r.estimates {
            assert!(e.lo <= e.estimate && e.estimate <= e.hi);
        }
        let ig = r.ignorance.as_ref().unwrap();
        assert!(ig.lo.unwrap() < 1.19 && ig.hi.unwrap() > 1.19);
    }

    #[test]
    fn near_perfect_classification_recovers_conventional() {
        let eps = 1e-10;
        let specs = [
            PriorSpec::normal(Coef::T, logit(0.001), eps).unwrap(),
            PriorSpec::normal(Coef::TX, logit(0.999) - logit(0.001), eps).unwrap(),
            PriorSpec::normal(Coef::TY, 0.0, eps).unwrap(),
            PriorSpec::normal(Coef::TXY, 0.0, eps).unwrap(),
        ];
        let panel = PriorPanel::loglinear(&specs, Design::CaseControl).unwrap();
        let (r, _) = run_misclassification(&sids_table(), &panel, &no_sampling(), &Sequential).unwrap();
        let pen = r.estimate("OR_TY", "penalized").unwrap();
        assert!((pen.estimate - 1.42).abs() < 0.01, "{pen:?}");
        assert!((pen.lo - 1.11).abs() < 0.01 && (pen.hi - 1.83).abs() < 0.01, "{pen:?}");
    }

    #[test]
    fn confounder_mean_log_is_linear() {
        let specs = [
            PriorSpec::normal(Coef::T, logit(0.25), 0.25).unwrap(),
            PriorSpec::normal(Coef::TX, ln(2.0), 0.25).unwrap(),
            PriorSpec::normal(Coef::TY, ln(2.0), 0.25).unwrap(),
        ];
        let panel = PriorPanel::loglinear(&specs, Design::CaseControl).unwrap();
        let cfg = SamplerConfig { draws: 50_000, seed: 3, identified_mode: IdentifiedMode::Bootstrap, ..Default::default() };
        let opts = RunOptions { sampler: Some(cfg), ..Default::default() };
        let (r, draws) = run_confounder(&sids_table(), &panel, &opts, &Sequential).unwrap();
        let draws = draws.unwrap();
        let n = draws.len() as f64;
        let mut crude = 0.0;
        let mut log_r = 0.0;
        let data = crate::mc::IdentifiedData::from_table(&sids_table()).unwrap();
        let mut rng = cfg.chunk_rng(0);
        let _ = (&data, &mut rng);
        for i in 0..draws.len() {
            let b = draws.bias_row(i);
            let rr = crate::model::confounding_bias_factor(b[0], b[1], b[2], 0.0);
            log_r += ln(rr);
            crude += ln(draws.targets[i] * rr);
        }
        let mean = r.sampler.as_ref().unwrap().summary.mean_log;
        assert!((mean - (crude / n - log_r / n)).abs() < 1e-9);
    }

    #[test]
    fn selection_examples() {
        let stratum = StratifiedCountTable::complete(
            &[Axis::T, Axis::Y],
            &[(&[1, 1], 29.0), (&[0, 1], 22.0), (&[1, 0], 21.0), (&[0, 0], 12.0)],
        )
        .unwrap();
        let nu = 0.3;
        let panel = selection_panel(&[PriorSpec::normal(Coef::STY, 0.0, nu).unwrap()], SelectionMode::Density).unwrap();
        let cfg = SamplerConfig { draws: 200_000, seed: 9, ..Default::default() };
        let opts = RunOptions { sampler: Some(cfg), ..Default::default() };
        let (r, _) = run_selection(&stratum, &panel, SelectionMode::Density, &opts, &Sequential).unwrap();
        let or = r.estimate("OR_TY_stratum", "conventional").unwrap();
        assert!((or.estimate - 29.0 * 12.0 / (22.0 * 21.0)).abs() < 1e-12);
        assert!((or.estimate - 0.753).abs() < 0.0005);

        let tiny = selection_panel(&[PriorSpec::normal(Coef::STY, 0.0, 1e-300).unwrap()], SelectionMode::Density).unwrap();
        let (r0, _) = run_selection(&stratum, &tiny, SelectionMode::Density, &opts, &Sequential).unwrap();
        let v0 = r0.sampler.as_ref().unwrap().summary.var_log;
        let v = r.sampler.as_ref().unwrap().summary.var_log;
        assert!(((v - v0) / nu - 1.0).abs() < 0.05, "{v} {v0}");
    }

    #[test]
    fn prior_check_gauges() {
        let panel = PriorPanel::loglinear(&sids_specs(), Design::CaseControl).unwrap();
        let (g, warnings) = prior_check(&panel).unwrap();
        let trials: Vec<f64> = g.iter().take(4).map(|e| e.trials.unwrap()).collect();
        assert_eq!(trials, [25.0, 16.0, 8.0, 32.0]);
        assert_eq!(g[4].label, SUM_LABEL);
        assert!((g[4].lo95 - 4.1).abs() < 0.05 && (g[4].hi95 - 45.0).abs() < 0.5);
        assert!(warnings.is_empty());
        let weak = PriorPanel::loglinear(&[PriorSpec::normal(Coef::TY, 0.0, 100.0).unwrap()], Design::CaseControl).unwrap();
        assert_eq!(prior_check(&weak).unwrap().1.len(), 1);
        assert_eq!(prior_check(&PriorPanel::flat_loglinear()), Err(WorkflowError::FlatOnly));
    }
}
