//! Penalized maximum likelihood for count tables in which T may be
//! observed in some cell groups and latent in others.
//!
//! The objective is `ln L(beta; a) - penalty(beta) / 2`. Free coefficients
//! are those whose variables all appear on the table, minus any fixed by
//! constraint. Coefficients involving an absent axis are held at zero.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::{abs, exp, ln, normal_quantile, sqrt};
use crate::model::{cell_offset, expected_counts, imputation_probs, BetaTBlock, Coef, CoefVector, Margin, ModelError};
use crate::newton::{self, Kink, Smooth};
use crate::priors::{PriorError, PriorKind, PriorPanel};
use crate::tables::{Axis, StratifiedCountTable, TableError, TwoByTwo};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("axis {0} is not part of the T/X/Y loglinear model")]
    UnsupportedAxis(Axis),
    #[error("the multinomial-given-Y frame needs Y observed in every cell group")]
    FrameNeedsY,
    #[error("no free coefficients to estimate")]
    NoFreeCoefficients,
    #[error("no convergence after {iterations} iterations (gradient max-norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error(
        "penalized information is not positive definite at the optimum (smallest eigenvalue {min_eigenvalue:e}); \
         {direction} lies on a direction the data and priors do not identify"
    )]
    Indefinite { min_eigenvalue: f64, direction: Coef },
    #[error("objective became non-finite")]
    NonFinite,
    #[error("covariance unavailable: optimum sits on a Laplace kink")]
    CovarianceUnavailable,
    #[error("functional is not finite at the estimate")]
    NonFiniteFunctional,
    #[error("profile interval endpoint lies outside the search bracket (estimate +/- 10 Wald se)")]
    ProfileBracket,
    #[error("profile search failed: {0}")]
    ProfileFailed(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SamplingFrame {
    #[default]
    Poisson,
    /// Multinomial within each Y stratum; `beta_0` and `beta_Y` are then not
    /// estimated and are reported at values reproducing the stratum totals.
    MultinomialGivenY,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitOptions {
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Relative step for the finite-difference Hessian.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { gradient_tol: 1e-8, step_tol: 1e-10, max_iterations: 200, hessian_step: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub data: StratifiedCountTable,
    pub panel: PriorPanel,
    pub constraints: Vec<(Coef, f64)>,
    pub frame: SamplingFrame,
}

impl FitProblem {
    pub fn new(data: StratifiedCountTable, panel: PriorPanel) -> Self {
        FitProblem { data, panel, constraints: Vec::new(), frame: SamplingFrame::Poisson }
    }

    pub fn with_constraint(mut self, coef: Coef, value: f64) -> Self {
        self.constraints.retain(|(c, _)| *c != coef);
        self.constraints.push((coef, value));
        self
    }

    pub fn with_frame(mut self, frame: SamplingFrame) -> Self {
        self.frame = frame;
        self
    }

    fn axis_mask(&self) -> Result<u8, FitError> {
        let mut mask = 0;
        for &a in self.data.axes() {
            mask |= match a {
                Axis::T => 1,
                Axis::X => 2,
                Axis::Y => 4,
                other => return Err(FitError::UnsupportedAxis(other)),
            };
        }
        Ok(mask)
    }

    /// Coefficients estimated by the optimizer, in loglinear order.
    pub fn free_coefficients(&self) -> Result<Vec<Coef>, FitError> {
        let mask = self.axis_mask()?;
        Ok(Coef::LOGLINEAR
            .into_iter()
            .filter(|c| {
                let m = c.term_mask().unwrap();
                m & mask == m
            })
            .filter(|c| !self.constraints.iter().any(|(k, _)| k == c))
            .filter(|c| !(self.frame == SamplingFrame::MultinomialGivenY && matches!(c, Coef::B0 | Coef::Y)))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Covariance {
    pub coefs: Vec<Coef>,
    /// Row-major, `coefs.len()` squared entries.
    pub values: Vec<f64>,
}

impl Covariance {
    pub fn get(&self, a: Coef, b: Coef) -> Option<f64> {
        let i = self.coefs.iter().position(|&c| c == a)?;
        let j = self.coefs.iter().position(|&c| c == b)?;
        Some(self.values[i * self.coefs.len() + j])
    }

    pub fn dim(&self) -> usize {
        self.coefs.len()
    }
}

/// Point estimate with a symmetric-on-the-working-scale interval.
/// `estimate`, `lo`, `hi` are on the reporting scale (exponentiated for
/// log odds ratios); `se` is on the working scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalEstimate {
    pub estimate: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub beta_hat: CoefVector,
    pub free: Vec<Coef>,
    pub covariance: Option<Covariance>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub frame: SamplingFrame,
    pub functionals: Vec<(String, IntervalEstimate)>,
}

impl FitResult {
    pub fn functional(&self, name: &str) -> Option<&IntervalEstimate> {
        self.functionals.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }
}

/// Scalar summaries of the coefficient vector.
#[derive(Clone, Copy, Debug)]
pub enum Functional {
    /// `ln OR_TY` from the T-Y margin of the expected counts.
    LogOrTy,
    /// `ln OR_XY` from the X-Y margin.
    LogOrXy,
    Coefficient(Coef),
    Custom { name: &'static str, f: fn(&CoefVector) -> f64, log_scale: bool },
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::LogOrTy => "OR_TY",
            Functional::LogOrXy => "OR_XY",
            Functional::Coefficient(c) => c.name(),
            Functional::Custom { name, .. } => name,
        }
    }

    /// Reported on the exponentiated scale.
    pub fn is_log_scale(&self) -> bool {
        match self {
            Functional::LogOrTy | Functional::LogOrXy => true,
            Functional::Coefficient(_) => false,
            Functional::Custom { log_scale, .. } => *log_scale,
        }
    }

    pub fn eval(&self, beta: &CoefVector) -> Result<f64, FitError> {
        let v = match self {
            Functional::LogOrTy => crate::model::log_marginal_or(beta, Margin::TY)?,
            Functional::LogOrXy => crate::model::log_marginal_or(beta, Margin::XY)?,
            Functional::Coefficient(c) => beta[*c],
            Functional::Custom { f, .. } => f(beta),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FitError::NonFiniteFunctional)
        }
    }
}

struct ObsCell {
    count: f64,
    members: Vec<usize>,
    y: u8,
}

/// Table cells mapped onto the eight model cells.
struct Compiled {
    cells: Vec<ObsCell>,
    frame: SamplingFrame,
    groups: usize,
}

impl Compiled {
    fn new(data: &StratifiedCountTable, frame: SamplingFrame) -> Result<Self, FitError> {
        for &a in data.axes() {
            if !matches!(a, Axis::T | Axis::X | Axis::Y) {
                return Err(FitError::UnsupportedAxis(a));
            }
        }
        if frame == SamplingFrame::MultinomialGivenY
            && (!data.has_axis(Axis::Y) || data.is_latent_anywhere(Axis::Y))
        {
            return Err(FitError::FrameNeedsY);
        }
        let mut cells = Vec::new();
        for g in data.groups() {
            for (offset, &count) in g.counts().iter().enumerate() {
                let levels = |axis: Axis| -> Vec<u8> {
                    if !data.has_axis(axis) {
                        vec![0]
                    } else if let Some(l) = g.level_at(offset, axis) {
                        vec![l]
                    } else {
                        vec![0, 1]
                    }
                };
                let mut members = Vec::new();
                for &y in &levels(Axis::Y) {
                    for &x in &levels(Axis::X) {
                        for &t in &levels(Axis::T) {
                            members.push(cell_offset(t, x, y));
                        }
                    }
                }
                let y = g.level_at(offset, Axis::Y).unwrap_or(0);
                cells.push(ObsCell { count, members, y });
            }
        }
        Ok(Compiled { cells, frame, groups: data.groups().len() })
    }

    fn means(&self, e: &[f64; 8]) -> Vec<f64> {
        self.cells.iter().map(|c| c.members.iter().map(|&k| e[k]).sum()).collect()
    }

    fn loglik(&self, beta: &CoefVector) -> Result<f64, FitError> {
        let e = expected_counts(beta)?.0;
        let mu = self.means(&e);
        let mut ll = 0.0;
        for (c, &m) in self.cells.iter().zip(&mu) {
            if c.count > 0.0 {
                ll += c.count * ln(m);
            }
        }
        match self.frame {
            SamplingFrame::Poisson => ll -= mu.iter().sum::<f64>(),
            SamplingFrame::MultinomialGivenY => {
                for y in 0..2 {
                    let (a, m) = self.stratum_totals(&mu, y);
                    if a > 0.0 {
                        ll -= a * ln(m);
                    }
                }
            }
        }
        if ll.is_finite() {
            Ok(ll)
        } else {
            Err(FitError::NonFinite)
        }
    }

    fn stratum_totals(&self, mu: &[f64], y: u8) -> (f64, f64) {
        let mut a = 0.0;
        let mut m = 0.0;
        for (c, &v) in self.cells.iter().zip(mu) {
            if c.y == y {
                a += c.count;
                m += v;
            }
        }
        (a, m)
    }

    /// Gradient of the log-likelihood with respect to all eight coefficients.
    fn loglik_gradient(&self, beta: &CoefVector) -> Result<[f64; 8], FitError> {
        let e = expected_counts(beta)?.0;
        let mu = self.means(&e);
        let masks: [usize; 8] = core::array::from_fn(|j| Coef::LOGLINEAR[j].term_mask().unwrap() as usize);
        let dmu = |cell: &ObsCell, j: usize| -> f64 {
            cell.members.iter().filter(|&&k| k & masks[j] == masks[j]).map(|&k| e[k]).sum()
        };
        let mut g = [0.0; 8];
        let weights: Vec<f64> = match self.frame {
            SamplingFrame::Poisson => {
                self.cells.iter().zip(&mu).map(|(c, &m)| c.count / m - 1.0).collect()
            }
            SamplingFrame::MultinomialGivenY => {
                let totals = [self.stratum_totals(&mu, 0), self.stratum_totals(&mu, 1)];
                self.cells
                    .iter()
                    .zip(&mu)
                    .map(|(c, &m)| {
                        let (a, mm) = totals[c.y as usize];
                        c.count / m - if a > 0.0 { a / mm } else { 0.0 }
                    })
                    .collect()
            }
        };
        for (c, w) in self.cells.iter().zip(&weights) {
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += w * dmu(c, j);
            }
        }
        Ok(g)
    }
}

pub fn observed_data_loglik(
    beta: &CoefVector,
    data: &StratifiedCountTable,
    frame: SamplingFrame,
) -> Result<f64, FitError> {
    Compiled::new(data, frame)?.loglik(beta)
}

fn free_penalty(problem: &FitProblem, beta: &CoefVector, free: &[Coef]) -> f64 {
    free.iter()
        .filter_map(|&c| problem.panel.get(c).map(|s| s.penalty(beta[c])))
        .sum()
}

/// `observed_data_loglik - penalty / 2`, with the penalty taken over the
/// coefficients the problem leaves free.
pub fn penalized_loglik(beta: &CoefVector, problem: &FitProblem) -> Result<f64, FitError> {
    let free = problem.free_coefficients()?;
    let ll = observed_data_loglik(beta, &problem.data, problem.frame)?;
    Ok(ll - free_penalty(problem, beta, &free) / 2.0)
}

/// Analytic gradient of [`penalized_loglik`] over all eight coefficients.
pub fn penalized_gradient(beta: &CoefVector, problem: &FitProblem) -> Result<[f64; 8], FitError> {
    let free = problem.free_coefficients()?;
    let mut g = Compiled::new(&problem.data, problem.frame)?.loglik_gradient(beta)?;
    for &c in &free {
        if let Some(s) = problem.panel.get(c) {
            g[c.loglinear_index().unwrap()] -= s.half_penalty_slope(beta[c]);
        }
    }
    Ok(g)
}

struct Objective<'a> {
    problem: &'a FitProblem,
    compiled: Compiled,
    base: CoefVector,
    free: Vec<Coef>,
}

impl Objective<'_> {
    fn beta(&self, x: &[f64]) -> CoefVector {
        let mut b = self.base;
        for (&c, &v) in self.free.iter().zip(x) {
            b[c] = v;
        }
        b
    }
}

impl Smooth for Objective<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64, FitError> {
        let b = self.beta(x);
        Ok(self.compiled.loglik(&b)? - free_penalty(self.problem, &b, &self.free) / 2.0)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FitError> {
        let b = self.beta(x);
        let g = self.compiled.loglik_gradient(&b)?;
        Ok(self
            .free
            .iter()
            .map(|&c| {
                let slope = self.problem.panel.get(c).map_or(0.0, |s| s.half_penalty_slope(b[c]));
                g[c.loglinear_index().unwrap()] - slope
            })
            .collect())
    }
}

/// Starting point: the T-given-XY block at its prior modes (zero when flat
/// or fixed by constraint), the remaining coefficients from a saturated
/// decomposition of the data split by those predictive values.
fn starting_values(problem: &FitProblem, compiled: &Compiled) -> CoefVector {
    let mode = |c: Coef| -> f64 {
        if let Some(&(_, v)) = problem.constraints.iter().find(|(k, _)| *k == c) {
            return v;
        }
        problem.panel.get(c).and_then(|s| s.mode()).unwrap_or(0.0)
    };
    let block = BetaTBlock { t: mode(Coef::T), tx: mode(Coef::TX), ty: mode(Coef::TY), txy: mode(Coef::TXY) };
    let has_t = problem.data.has_axis(Axis::T);
    let pi = imputation_probs(&block);
    let mut pooled = [0.0f64; 8];
    for c in &compiled.cells {
        // Split across latent T with pi; evenly across any other latent axis.
        let weights: Vec<f64> = c
            .members
            .iter()
            .map(|&k| {
                let (t, x, y) = ((k & 1) as u8, ((k >> 1) & 1) as u8, ((k >> 2) & 1) as u8);
                let t_latent = has_t && c.members.iter().any(|&o| o ^ k == 1);
                if t_latent {
                    pi.pi(t, x, y)
                } else {
                    1.0
                }
            })
            .collect();
        let norm: f64 = weights.iter().sum();
        for (&k, w) in c.members.iter().zip(&weights) {
            pooled[k] += c.count * w / norm;
        }
    }
    let groups = compiled.groups as f64;
    let log_cell = |k: usize| -> f64 {
        let v = pooled[k] / groups;
        ln(if v > 0.0 { v } else { 0.5 })
    };
    let mut beta = CoefVector::zeros();
    let axis_mask = problem.axis_mask().unwrap_or(0) as usize;
    for c in Coef::LOGLINEAR {
        let m = c.term_mask().unwrap() as usize;
        if m & axis_mask != m {
            continue;
        }
        // Mobius inversion over subsets of the term.
        let mut v = 0.0;
        let mut sub = m;
        loop {
            let parity = (m.count_ones() - sub.count_ones()) % 2;
            v += if parity == 0 { log_cell(sub) } else { -log_cell(sub) };
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & m;
        }
        beta[c] = v;
    }
    for &(c, v) in &problem.constraints {
        beta[c] = v;
    }
    beta
}

fn laplace_kinks(problem: &FitProblem, free: &[Coef]) -> Vec<Kink> {
    free.iter()
        .enumerate()
        .filter_map(|(i, &c)| match problem.panel.get(c).map(|s| s.kind) {
            Some(PriorKind::Laplace { mean, scale }) => Some(Kink { index: i, at: mean, weight: 1.0 / scale }),
            _ => None,
        })
        .collect()
}

/// Newton ascent with step-halving from the documented start; covariance is
/// the inverse observed penalized information.
pub fn maximize(problem: &FitProblem, options: &FitOptions) -> Result<FitResult, FitError> {
    let compiled = Compiled::new(&problem.data, problem.frame)?;
    let free = problem.free_coefficients()?;
    if free.is_empty() {
        return Err(FitError::NoFreeCoefficients);
    }
    for (c, v) in &problem.constraints {
        if c.loglinear_index().is_none() || !v.is_finite() {
            return Err(FitError::Model(ModelError::Overflow { coef: *c, value: *v }));
        }
    }
    let base = starting_values(problem, &compiled);
    let obj = Objective { problem, compiled, base, free: free.clone() };
    let start: Vec<f64> = free.iter().map(|&c| base[c]).collect();
    let kinks = laplace_kinks(problem, &free);
    let out = newton::maximize(&obj, &start, &kinks, options)?;

    let mut beta_hat = obj.beta(&out.x);
    let covariance = if out.pinned.is_empty() {
        if let Err((min_eigenvalue, idx)) = newton::check_definite(&out.information) {
            return Err(FitError::Indefinite { min_eigenvalue, direction: free[out.active[idx]] });
        }
        let inv = newton::invert(&out.information).ok_or(FitError::Indefinite {
            min_eigenvalue: 0.0,
            direction: free[0],
        })?;
        let coefs: Vec<Coef> = out.active.iter().map(|&i| free[i]).collect();
        let n = coefs.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = inv[(i, j)];
            }
        }
        Some(Covariance { coefs, values })
    } else {
        None
    };

    if problem.frame == SamplingFrame::MultinomialGivenY {
        fit_stratum_scale(&obj.compiled, &mut beta_hat)?;
    }

    let mut result = FitResult {
        beta_hat,
        free,
        covariance,
        objective: out.value,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        frame: problem.frame,
        functionals: Vec::new(),
    };
    if result.covariance.is_some() {
        let level = 0.95;
        if problem.data.has_axis(Axis::T) && problem.data.has_axis(Axis::Y) {
            let est = wald_functional_interval(&result, &Functional::LogOrTy, level)?;
            result.functionals.push((String::from("OR_TY"), est));
        }
        if problem.data.has_axis(Axis::X) && problem.data.has_axis(Axis::Y) {
            let est = wald_functional_interval(&result, &Functional::LogOrXy, level)?;
            result.functionals.push((String::from("OR_XY"), est));
        }
    }
    Ok(result)
}

// Set beta_0 and beta_Y so fitted Y-stratum totals equal the observed ones.
fn fit_stratum_scale(compiled: &Compiled, beta: &mut CoefVector) -> Result<(), FitError> {
    let e = expected_counts(beta)?.0;
    let mu = compiled.means(&e);
    let (a0, m0) = compiled.stratum_totals(&mu, 0);
    let (a1, m1) = compiled.stratum_totals(&mu, 1);
    let s0 = if a0 > 0.0 { ln(a0 / m0) } else { 0.0 };
    let s1 = if a1 > 0.0 { ln(a1 / m1) } else { 0.0 };
    beta[Coef::B0] += s0;
    beta[Coef::Y] += s1 - s0;
    Ok(())
}

/// Delta-method interval for a functional of the fitted coefficients.
pub fn wald_functional_interval(
    fit: &FitResult,
    functional: &Functional,
    level: f64,
) -> Result<IntervalEstimate, FitError> {
    let cov = fit.covariance.as_ref().ok_or(FitError::CovarianceUnavailable)?;
    let g = functional.eval(&fit.beta_hat)?;
    let x: Vec<f64> = cov.coefs.iter().map(|&c| fit.beta_hat[c]).collect();
    let eval = |x: &[f64]| -> Result<f64, FitError> {
        let mut b = fit.beta_hat;
        for (&c, &v) in cov.coefs.iter().zip(x) {
            b[c] = v;
        }
        functional.eval(&b)
    };
    let coords: Vec<usize> = (0..x.len()).collect();
    let grad = newton::functional_gradient(&eval, &x, &coords)?;
    let n = cov.dim();
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += grad[i] * cov.values[i * n + j] * grad[j];
        }
    }
    let se = sqrt(var.max(0.0));
    let z = normal_quantile(0.5 + level / 2.0);
    let (est, lo, hi) = if functional.is_log_scale() {
        (exp(g), exp(g - z * se), exp(g + z * se))
    } else {
        (g, g - z * se, g + z * se)
    };
    Ok(IntervalEstimate { estimate: est, se, lo, hi, level })
}

/// Profile-penalized-likelihood interval for a functional.
pub fn profile_interval(
    problem: &FitProblem,
    fit: &FitResult,
    functional: &Functional,
    level: f64,
    options: &FitOptions,
) -> Result<(f64, f64), FitError> {
    let wald = wald_functional_interval(fit, functional, level)?;
    let cov = fit.covariance.as_ref().ok_or(FitError::CovarianceUnavailable)?;
    let compiled = Compiled::new(&problem.data, problem.frame)?;
    let obj = Objective { problem, compiled, base: fit.beta_hat, free: cov.coefs.clone() };
    let xhat: Vec<f64> = cov.coefs.iter().map(|&c| fit.beta_hat[c]).collect();
    let fhat = obj.value(&xhat)?;
    let eval = |x: &[f64]| functional.eval(&obj.beta(x));
    let z = normal_quantile(0.5 + level / 2.0);
    let (lo, hi) = newton::profile_bounds(&obj, &eval, &xhat, fhat, wald.se, z, options)?;
    Ok(if functional.is_log_scale() { (exp(lo), exp(hi)) } else { (lo, hi) })
}

/// Closed-form maximum likelihood for a 2x2 whose rows are Y and columns X.
pub fn conventional_mle(table: &TwoByTwo) -> Result<FitResult, FitError> {
    let or = table.odds_ratio(crate::tables::Continuity::None)?;
    let se = table.wald_log_or_se()?;
    let (n11, n10, n01, n00) = (table.n11, table.n10, table.n01, table.n00);
    let beta_hat = CoefVector::from_pairs(&[
        (Coef::B0, ln(n00)),
        (Coef::X, ln(n01 / n00)),
        (Coef::Y, ln(n10 / n00)),
        (Coef::XY, ln(or)),
    ]);
    // beta = L ln(n) with ln(n) ordered (n00, n01, n10, n11).
    let l = [
        [1.0, 0.0, 0.0, 0.0],
        [-1.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 1.0, 0.0],
        [1.0, -1.0, -1.0, 1.0],
    ];
    let inv_n = [1.0 / n00, 1.0 / n01, 1.0 / n10, 1.0 / n11];
    let mut values = vec![0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            values[i * 4 + j] = (0..4).map(|k| l[i][k] * inv_n[k] * l[j][k]).sum();
        }
    }
    let objective = table.cells().iter().map(|&a| a * ln(a) - a).sum();
    let z = normal_quantile(0.975);
    let lor = ln(or);
    let est = IntervalEstimate { estimate: or, se, lo: exp(lor - z * se), hi: exp(lor + z * se), level: 0.95 };
    Ok(FitResult {
        beta_hat,
        free: vec![Coef::B0, Coef::X, Coef::Y, Coef::XY],
        covariance: Some(Covariance { coefs: vec![Coef::B0, Coef::X, Coef::Y, Coef::XY], values }),
        objective,
        gradient_norm: 0.0,
        iterations: 0,
        frame: SamplingFrame::Poisson,
        functionals: vec![(String::from("OR_XY"), est)],
    })
}

/// Largest absolute gradient entry over the free coefficients.
pub fn gradient_max_norm(beta: &CoefVector, problem: &FitProblem) -> Result<f64, FitError> {
    let g = penalized_gradient(beta, problem)?;
    Ok(problem
        .free_coefficients()?
        .iter()
        .map(|c| abs(g[c.loglinear_index().unwrap()]))
        .fold(0.0, f64::max))
}
