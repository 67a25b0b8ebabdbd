//! Relaxation priors: penalties, densities, data-prior records, interval
//! gauges and random draws.
//!
//! Penalties are `-2 ln H(beta)` with the additive constant chosen so the
//! minimum over each coefficient is zero. They are only comparable across
//! runs that share a panel.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, FisherF, StandardNormal};
use thiserror::Error;

use crate::math::{abs, exp, expit, ln, log1p_exp, logit, logit_beta_quantile, normal_quantile, sqrt};
use crate::model::{Coef, CoefVector, SelectionCoefs};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("{coef}: {what}")]
    InvalidParameter { coef: Coef, what: &'static str },
    #[error("{0}: flat prior has no distribution to report or sample")]
    FlatPrior(Coef),
    #[error("{0}: only normal priors translate to a binomial data record")]
    NotNormal(Coef),
    #[error("{0} has more than one prior")]
    DuplicatePrior(Coef),
    #[error("{0} is not a coefficient of this model")]
    UnknownCoefficient(Coef),
    #[error("{0} is a design coefficient under case-control sampling and should receive no prior")]
    DesignCoefficient(Coef),
    #[error("coefficient {0} missing from the supplied values")]
    MissingCoefficient(Coef),
    #[error("interval level {0} must lie strictly between 0 and 1")]
    BadLevel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "dist", rename_all = "kebab-case"))]
pub enum PriorKind {
    Flat,
    Normal { mean: f64, variance: f64 },
    Laplace { mean: f64, scale: f64 },
    /// Generalized log-F: density proportional to `e^(z n r) / (1 + e^z)^n`
    /// with `z = (theta + logit(r) - m) / s`.
    LogF { m: f64, s: f64, r: f64, n: f64 },
}

/// Scale used to report a prior interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ReportScale {
    Identity,
    Exp,
    Expit,
}

impl ReportScale {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ReportScale::Identity => v,
            ReportScale::Exp => exp(v),
            ReportScale::Expit => expit(v),
        }
    }

    /// Natural reporting scale: intercepts of the T or X logistic models are
    /// probabilities, everything else an odds ratio.
    pub fn natural_for(coef: Coef) -> ReportScale {
        match coef {
            Coef::T | Coef::X => ReportScale::Expit,
            _ => ReportScale::Exp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorSpec {
    pub target: Coef,
    pub kind: PriorKind,
}

impl PriorSpec {
    pub fn new(target: Coef, kind: PriorKind) -> Result<Self, PriorError> {
        let bad = |what| Err(PriorError::InvalidParameter { coef: target, what });
        match kind {
            PriorKind::Flat => {}
            PriorKind::Normal { mean, variance } => {
                if !mean.is_finite() {
                    return bad("mean must be finite");
                }
                if !(variance > 0.0 && variance.is_finite()) {
                    return bad("variance must be positive");
                }
            }
            PriorKind::Laplace { mean, scale } => {
                if !mean.is_finite() {
                    return bad("mean must be finite");
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad("scale must be positive");
                }
            }
            PriorKind::LogF { m, s, r, n } => {
                if !m.is_finite() {
                    return bad("mode must be finite");
                }
                if !(s > 0.0 && s.is_finite()) {
                    return bad("scale must be positive");
                }
                if !(r > 0.0 && r < 1.0) {
                    return bad("skew r must lie in (0, 1)");
                }
                if !(n > 0.0 && n.is_finite()) {
                    return bad("weight n must be positive");
                }
            }
        }
        Ok(PriorSpec { target, kind })
    }

    pub fn normal(target: Coef, mean: f64, variance: f64) -> Result<Self, PriorError> {
        Self::new(target, PriorKind::Normal { mean, variance })
    }

    pub fn flat(target: Coef) -> Self {
        PriorSpec { target, kind: PriorKind::Flat }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, PriorKind::Flat)
    }

    /// Location of the density maximum.
    pub fn mode(&self) -> Option<f64> {
        match self.kind {
            PriorKind::Flat => None,
            PriorKind::Normal { mean, .. } | PriorKind::Laplace { mean, .. } => Some(mean),
            PriorKind::LogF { m, s, r, .. } => Some(m + (s - 1.0) * logit(r)),
        }
    }

    /// `-2 ln H(beta)`, shifted to be zero at the mode.
    pub fn penalty(&self, beta: f64) -> f64 {
        match self.kind {
            PriorKind::Flat => 0.0,
            PriorKind::Normal { mean, variance } => (beta - mean) * (beta - mean) / variance,
            PriorKind::Laplace { mean, scale } => 2.0 * abs(beta - mean) / scale,
            PriorKind::LogF { m, s, r, n } => {
                let z = (beta + logit(r) - m) / s;
                let at_mode = r * logit(r) - log1p_exp(logit(r));
                (-2.0 * n * (r * z - log1p_exp(z) - at_mode)).max(0.0)
            }
        }
    }

    /// Derivative of `penalty / 2`; zero at a Laplace kink.
    pub fn half_penalty_slope(&self, beta: f64) -> f64 {
        match self.kind {
            PriorKind::Flat => 0.0,
            PriorKind::Normal { mean, variance } => (beta - mean) / variance,
            PriorKind::Laplace { mean, scale } => {
                let d = beta - mean;
                if d > 0.0 {
                    1.0 / scale
                } else if d < 0.0 {
                    -1.0 / scale
                } else {
                    0.0
                }
            }
            PriorKind::LogF { m, s, r, n } => {
                let z = (beta + logit(r) - m) / s;
                -n * (r - expit(z)) / s
            }
        }
    }

    /// Quantile of the prior on the coefficient scale.
    pub fn quantile(&self, p: f64) -> Result<f64, PriorError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(PriorError::BadLevel(p));
        }
        Ok(match self.kind {
            PriorKind::Flat => return Err(PriorError::FlatPrior(self.target)),
            PriorKind::Normal { mean, variance } => mean + sqrt(variance) * normal_quantile(p),
            PriorKind::Laplace { mean, scale } => {
                if p < 0.5 {
                    mean + scale * ln(2.0 * p)
                } else {
                    mean - scale * ln(2.0 * (1.0 - p))
                }
            }
            PriorKind::LogF { m, s, r, n } => {
                m - logit(r) + s * logit_beta_quantile(n * r, n * (1.0 - r), p)
            }
        })
    }

    /// Equal-tailed interval at `level`, reported on `scale`.
    pub fn interval(&self, level: f64, scale: ReportScale) -> Result<(f64, f64), PriorError> {
        if !(level > 0.0 && level < 1.0) {
            return Err(PriorError::BadLevel(level));
        }
        let tail = (1.0 - level) / 2.0;
        Ok((scale.apply(self.quantile(tail)?), scale.apply(self.quantile(1.0 - tail)?)))
    }

    pub fn to_data_prior(&self) -> Result<DataPriorRecord, PriorError> {
        match self.kind {
            PriorKind::Normal { mean, variance } => Ok(DataPriorRecord {
                target: self.target,
                successes: 2.0 / variance,
                trials: 4.0 / variance,
                offset: -mean,
            }),
            PriorKind::Flat => Err(PriorError::FlatPrior(self.target)),
            _ => Err(PriorError::NotNormal(self.target)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, PriorError> {
        Ok(match self.kind {
            PriorKind::Flat => return Err(PriorError::FlatPrior(self.target)),
            PriorKind::Normal { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sqrt(variance) * z
            }
            PriorKind::Laplace { mean, scale } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    mean + scale * e
                } else {
                    mean - scale * e
                }
            }
            PriorKind::LogF { m, s, r, n } => {
                // expit(z) ~ Beta(nr, n(1-r)), so e^z = r F / (1 - r) with
                // F ~ F(2nr, 2n(1-r)).
                let f = FisherF::new(2.0 * n * r, 2.0 * n * (1.0 - r))
                    .map_err(|_| PriorError::InvalidParameter { coef: self.target, what: "log-F degrees of freedom" })?
                    .sample(rng);
                m - logit(r) + s * ln(r * f / (1.0 - r))
            }
        })
    }
}

/// Unnormalized log-F kernel `exp(z n r) / (1 + e^z)^n`.
pub fn logf_density(m: f64, s: f64, r: f64, n: f64, theta: f64) -> f64 {
    let z = (theta + logit(r) - m) / s;
    exp(z * n * r - n * log1p_exp(z))
}

/// A hypothetical binomial record whose likelihood reproduces a prior.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DataPriorRecord {
    pub target: Coef,
    pub successes: f64,
    pub trials: f64,
    pub offset: f64,
}

impl DataPriorRecord {
    /// `b (beta + offset) - n ln(1 + e^(beta + offset))`.
    pub fn loglik(&self, beta: f64) -> f64 {
        let u = beta + self.offset;
        self.successes * u - self.trials * log1p_exp(u)
    }
}

pub trait CoefSource {
    fn coef(&self, c: Coef) -> Option<f64>;
}

impl CoefSource for CoefVector {
    fn coef(&self, c: Coef) -> Option<f64> {
        c.loglinear_index().map(|i| self.0[i])
    }
}

impl CoefSource for SelectionCoefs {
    fn coef(&self, c: Coef) -> Option<f64> {
        match c {
            Coef::S => Some(self.beta_s),
            Coef::ST => Some(self.beta_st),
            Coef::SY => Some(self.beta_sy),
            Coef::STY => Some(self.beta_sty),
            _ => None,
        }
    }
}

impl CoefSource for [(Coef, f64)] {
    fn coef(&self, c: Coef) -> Option<f64> {
        self.iter().find(|(k, _)| *k == c).map(|&(_, v)| v)
    }
}

/// Sampling design, which determines the coefficients that must stay flat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Design {
    /// Outcome totals fixed by design; `beta_0` and `beta_Y` take no prior.
    #[default]
    CaseControl,
    Unrestricted,
}

/// One prior per model coefficient, in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPanel {
    specs: Vec<PriorSpec>,
}

impl PriorPanel {
    /// Build a panel over `coefs`; coefficients without a supplied spec get
    /// a flat prior.
    pub fn new(coefs: &[Coef], specs: &[PriorSpec], design: Design) -> Result<Self, PriorError> {
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|o| o.target == s.target) {
                return Err(PriorError::DuplicatePrior(s.target));
            }
            if !coefs.contains(&s.target) {
                return Err(PriorError::UnknownCoefficient(s.target));
            }
            PriorSpec::new(s.target, s.kind)?;
            if design == Design::CaseControl && matches!(s.target, Coef::B0 | Coef::Y) && !s.is_flat() {
                return Err(PriorError::DesignCoefficient(s.target));
            }
        }
        let specs = coefs
            .iter()
            .map(|&c| specs.iter().find(|s| s.target == c).copied().unwrap_or(PriorSpec::flat(c)))
            .collect();
        Ok(PriorPanel { specs })
    }

    /// All eight loglinear coefficients.
    pub fn loglinear(specs: &[PriorSpec], design: Design) -> Result<Self, PriorError> {
        Self::new(&Coef::LOGLINEAR, specs, design)
    }

    pub fn flat_loglinear() -> Self {
        PriorPanel { specs: Coef::LOGLINEAR.iter().map(|&c| PriorSpec::flat(c)).collect() }
    }

    pub fn specs(&self) -> &[PriorSpec] {
        &self.specs
    }

    pub fn get(&self, c: Coef) -> Option<&PriorSpec> {
        self.specs.iter().find(|s| s.target == c)
    }

    pub fn informative(&self) -> impl Iterator<Item = &PriorSpec> {
        self.specs.iter().filter(|s| !s.is_flat())
    }

    /// Sum of penalties over the non-flat coefficients.
    pub fn penalty<S: CoefSource + ?Sized>(&self, values: &S) -> Result<f64, PriorError> {
        let mut total = 0.0;
        for s in self.informative() {
            let v = values.coef(s.target).ok_or(PriorError::MissingCoefficient(s.target))?;
            total += s.penalty(v);
        }
        Ok(total)
    }
}
