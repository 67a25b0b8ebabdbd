//! Saturated loglinear model over (T, X, Y) and the quantities derived
//! from it: predictive values, bias factors, and marginal odds ratios.

use core::fmt;
use core::ops::{Index, IndexMut};

use thiserror::Error;

use crate::math::{exp, expit, ln};

/// Coefficient names. The first eight index a [`CoefVector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Coef {
    B0,
    T,
    X,
    Y,
    TX,
    TY,
    XY,
    TXY,
    S,
    ST,
    SY,
    STY,
}

impl Coef {
    pub const LOGLINEAR: [Coef; 8] =
        [Coef::B0, Coef::T, Coef::X, Coef::Y, Coef::TX, Coef::TY, Coef::XY, Coef::TXY];
    pub const SELECTION: [Coef; 4] = [Coef::S, Coef::ST, Coef::SY, Coef::STY];
    /// Coefficients of the logistic model for T given (X, Y).
    pub const T_BLOCK: [Coef; 4] = [Coef::T, Coef::TX, Coef::TY, Coef::TXY];
    /// Coefficients of the logistic model for X given (T, Y).
    pub const X_BLOCK: [Coef; 4] = [Coef::X, Coef::TX, Coef::XY, Coef::TXY];

    pub fn name(self) -> &'static str {
        match self {
            Coef::B0 => "beta_0",
            Coef::T => "beta_T",
            Coef::X => "beta_X",
            Coef::Y => "beta_Y",
            Coef::TX => "beta_TX",
            Coef::TY => "beta_TY",
            Coef::XY => "beta_XY",
            Coef::TXY => "beta_TXY",
            Coef::S => "beta_S",
            Coef::ST => "beta_ST",
            Coef::SY => "beta_SY",
            Coef::STY => "beta_STY",
        }
    }

    pub fn from_name(name: &str) -> Option<Coef> {
        Coef::LOGLINEAR
            .into_iter()
            .chain(Coef::SELECTION)
            .find(|c| c.name() == name)
    }

    /// Position in a [`CoefVector`], for loglinear coefficients.
    pub fn loglinear_index(self) -> Option<usize> {
        Coef::LOGLINEAR.iter().position(|&c| c == self)
    }

    /// Which of (T, X, Y) the term multiplies, as a bitmask t=1, x=2, y=4.
    pub fn term_mask(self) -> Option<u8> {
        Some(match self {
            Coef::B0 => 0,
            Coef::T => 1,
            Coef::X => 2,
            Coef::Y => 4,
            Coef::TX => 3,
            Coef::TY => 5,
            Coef::XY => 6,
            Coef::TXY => 7,
            _ => return None,
        })
    }
}

impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("coefficient {coef} = {value} is outside the safe exponent range (|beta| <= 700)")]
    Overflow { coef: Coef, value: f64 },
    #[error("expected count overflowed at cell (t={t}, x={x}, y={y})")]
    CellOverflow { t: u8, x: u8, y: u8 },
    #[error("zero or non-finite margin in odds ratio")]
    ZeroMargin,
}

pub const MAX_ABS_COEF: f64 = 700.0;

/// Loglinear coefficients in the order
/// `(beta_0, beta_T, beta_X, beta_Y, beta_TX, beta_TY, beta_XY, beta_TXY)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoefVector(pub [f64; 8]);

impl Index<Coef> for CoefVector {
    type Output = f64;
    fn index(&self, c: Coef) -> &f64 {
        &self.0[c.loglinear_index().expect("selection coefficient on a loglinear vector")]
    }
}

impl IndexMut<Coef> for CoefVector {
    fn index_mut(&mut self, c: Coef) -> &mut f64 {
        &mut self.0[c.loglinear_index().expect("selection coefficient on a loglinear vector")]
    }
}

impl CoefVector {
    pub fn zeros() -> Self {
        CoefVector([0.0; 8])
    }

    pub fn from_pairs(pairs: &[(Coef, f64)]) -> Self {
        let mut b = Self::zeros();
        for &(c, v) in pairs {
            b[c] = v;
        }
        b
    }

    /// Linear predictor at cell (t, x, y).
    pub fn eta(&self, t: u8, x: u8, y: u8) -> f64 {
        let mask = (t | (x << 1) | (y << 2)) as usize;
        let mut s = 0.0;
        for (i, c) in Coef::LOGLINEAR.iter().enumerate() {
            let m = c.term_mask().unwrap() as usize;
            if m & mask == m {
                s += self.0[i];
            }
        }
        s
    }

    pub fn check_finite_range(&self) -> Result<(), ModelError> {
        for (i, &v) in self.0.iter().enumerate() {
            if !(v.abs() <= MAX_ABS_COEF) {
                return Err(ModelError::Overflow { coef: Coef::LOGLINEAR[i], value: v });
            }
        }
        Ok(())
    }

    pub fn t_block(&self) -> BetaTBlock {
        BetaTBlock { t: self[Coef::T], tx: self[Coef::TX], ty: self[Coef::TY], txy: self[Coef::TXY] }
    }

    pub fn x_block(&self) -> BetaXBlock {
        BetaXBlock { x: self[Coef::X], tx: self[Coef::TX], xy: self[Coef::XY], txy: self[Coef::TXY] }
    }

    /// Classification probability `Pr(X = 1 | T = t, Y = y)`.
    pub fn classification_prob(&self, t: u8, y: u8) -> f64 {
        let (t, y) = (t as f64, y as f64);
        expit(self[Coef::X] + self[Coef::TX] * t + self[Coef::XY] * y + self[Coef::TXY] * t * y)
    }
}

/// `(beta_T, beta_TX, beta_TY, beta_TXY)`: the logistic model for T given (X, Y).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaTBlock {
    pub t: f64,
    pub tx: f64,
    pub ty: f64,
    pub txy: f64,
}

impl BetaTBlock {
    pub fn from_array(v: [f64; 4]) -> Self {
        BetaTBlock { t: v[0], tx: v[1], ty: v[2], txy: v[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.t, self.tx, self.ty, self.txy]
    }
}

/// `(beta_X, beta_TX, beta_XY, beta_TXY)`: the logistic model for X given (T, Y).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaXBlock {
    pub x: f64,
    pub tx: f64,
    pub xy: f64,
    pub txy: f64,
}

impl BetaXBlock {
    pub fn from_array(v: [f64; 4]) -> Self {
        BetaXBlock { x: v[0], tx: v[1], xy: v[2], txy: v[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionCoefs {
    pub beta_s: f64,
    pub beta_st: f64,
    pub beta_sy: f64,
    pub beta_sty: f64,
}

/// Expected counts `E_txy`, stored at offset `t + 2x + 4y`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpectedCells(pub [f64; 8]);

#[inline]
pub fn cell_offset(t: u8, x: u8, y: u8) -> usize {
    (t as usize) | ((x as usize) << 1) | ((y as usize) << 2)
}

impl ExpectedCells {
    pub fn get(&self, t: u8, x: u8, y: u8) -> f64 {
        self.0[cell_offset(t, x, y)]
    }

    /// `E_+xy`.
    pub fn xy_margin(&self, x: u8, y: u8) -> f64 {
        self.get(0, x, y) + self.get(1, x, y)
    }

    /// `E_t+y`.
    pub fn ty_margin(&self, t: u8, y: u8) -> f64 {
        self.get(t, 0, y) + self.get(t, 1, y)
    }

    /// `(E_+00, E_+10, E_+01, E_+11)`.
    pub fn xy_margins(&self) -> XyCells {
        XyCells([self.xy_margin(0, 0), self.xy_margin(1, 0), self.xy_margin(0, 1), self.xy_margin(1, 1)])
    }
}

/// Four positive cells indexed by (x, y) at offset `x + 2y`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XyCells(pub [f64; 4]);

impl XyCells {
    pub fn get(&self, x: u8, y: u8) -> f64 {
        self.0[(x as usize) | ((y as usize) << 1)]
    }

    pub fn odds_ratio(&self) -> f64 {
        self.get(1, 1) * self.get(0, 0) / (self.get(1, 0) * self.get(0, 1))
    }
}

/// Predictive values `pi_1xy = Pr(T = 1 | X = x, Y = y)` at offset `x + 2y`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictiveValues(pub [f64; 4]);

impl PredictiveValues {
    pub fn pi1(&self, x: u8, y: u8) -> f64 {
        self.0[(x as usize) | ((y as usize) << 1)]
    }

    pub fn pi(&self, t: u8, x: u8, y: u8) -> f64 {
        let p = self.pi1(x, y);
        if t == 1 {
            p
        } else {
            1.0 - p
        }
    }

    /// Outcome-major order `(pi_111, pi_101, pi_110, pi_100)`, i.e. cells
    /// (x, y) = (1, 1), (0, 1), (1, 0), (0, 0).
    pub fn display_order(&self) -> [f64; 4] {
        [self.pi1(1, 1), self.pi1(0, 1), self.pi1(1, 0), self.pi1(0, 0)]
    }
}

pub fn expected_counts(beta: &CoefVector) -> Result<ExpectedCells, ModelError> {
    beta.check_finite_range()?;
    let mut e = [0.0; 8];
    for y in 0..2 {
        for x in 0..2 {
            for t in 0..2 {
                let v = exp(beta.eta(t, x, y));
                if !v.is_finite() || v <= 0.0 {
                    return Err(ModelError::CellOverflow { t, x, y });
                }
                e[cell_offset(t, x, y)] = v;
            }
        }
    }
    Ok(ExpectedCells(e))
}

pub fn imputation_probs(block: &BetaTBlock) -> PredictiveValues {
    let mut p = [0.0; 4];
    for y in 0..2u8 {
        for x in 0..2u8 {
            let (xf, yf) = (x as f64, y as f64);
            p[(x as usize) | ((y as usize) << 1)] =
                expit(block.t + block.tx * xf + block.ty * yf + block.txy * xf * yf);
        }
    }
    PredictiveValues(p)
}

/// `E_txy = E_+xy pi_txy`: expected counts from the identified margins and
/// the T-given-XY coefficients.
pub fn transparent_expected(margins: &XyCells, block: &BetaTBlock) -> ExpectedCells {
    let mut e = [0.0; 8];
    for y in 0..2u8 {
        for x in 0..2u8 {
            let (xf, yf) = (x as f64, y as f64);
            let eta = block.t + block.tx * xf + block.ty * yf + block.txy * xf * yf;
            let m = margins.get(x, y);
            e[cell_offset(1, x, y)] = m * expit(eta);
            e[cell_offset(0, x, y)] = m * expit(-eta);
        }
    }
    ExpectedCells(e)
}

// {1 + e^(a+b+c+d)}{1 + e^a} / [{1 + e^(a+b)}{1 + e^(a+c)}], computed in logs.
fn yanagawa_factor(a: f64, b: f64, c: f64, d: f64) -> f64 {
    use crate::math::log1p_exp;
    exp(log1p_exp(a + b + c + d) + log1p_exp(a) - log1p_exp(a + b) - log1p_exp(a + c))
}

/// `R(beta_X) = OR_TY / exp(beta_TY)`.
pub fn misclass_bias_factor(block: &BetaXBlock) -> f64 {
    yanagawa_factor(block.x, block.tx, block.xy, block.txy)
}

/// `R(beta_T) = OR_XY / exp(beta_XY)`, general form including `beta_TXY`.
pub fn confounding_bias_factor(t: f64, tx: f64, ty: f64, txy: f64) -> f64 {
    yanagawa_factor(t, tx, ty, txy)
}

/// ROC odds ratios `(exp(beta_TX), exp(beta_TX + beta_TXY))` for Y = 0, 1.
pub fn roc_odds_ratios(block: &BetaTBlock) -> (f64, f64) {
    (exp(block.tx), exp(block.tx + block.txy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Margin {
    TY,
    XY,
}

pub fn marginal_or(e: &ExpectedCells, pair: Margin) -> Result<f64, ModelError> {
    let (a, b, c, d) = match pair {
        Margin::TY => (e.ty_margin(1, 1), e.ty_margin(0, 0), e.ty_margin(1, 0), e.ty_margin(0, 1)),
        Margin::XY => (e.xy_margin(1, 1), e.xy_margin(0, 0), e.xy_margin(1, 0), e.xy_margin(0, 1)),
    };
    for v in [a, b, c, d] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ModelError::ZeroMargin);
        }
    }
    Ok(a * b / (c * d))
}

pub fn log_marginal_or(beta: &CoefVector, pair: Margin) -> Result<f64, ModelError> {
    Ok(ln(marginal_or(&expected_counts(beta)?, pair)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SelectionMode {
    /// Poisson (risk-set) sampling: the factor reduces to `exp(-beta_STY)`.
    Density,
    /// Selection as the X = 0 stratum of the loglinear model, `X = 1 - S`.
    Stratum,
}

/// Bias factor linking the X = 0 stratum odds ratio to the target.
pub enum SelectionBias<'a> {
    Density(&'a SelectionCoefs),
    Stratum(&'a BetaXBlock),
}

pub fn selection_bias_factor(s: SelectionBias<'_>) -> f64 {
    match s {
        SelectionBias::Density(c) => exp(-c.beta_sty),
        SelectionBias::Stratum(b) => misclass_bias_factor(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logit;

    fn sids_means() -> BetaTBlock {
        BetaTBlock { t: logit(0.1), tx: ln(13.5), ty: 0.0, txy: 0.0 }
    }

    fn sids_margins() -> XyCells {
        // offsets x + 2y: (x0y0, x1y0, x0y1, x1y1)
        XyCells([663.0, 134.0, 602.0, 173.0])
    }

    #[test]
    fn expected_counts_examples() {
        let e = expected_counts(&CoefVector::zeros()).unwrap();
        assert!(e.0.iter().all(|&v| v == 1.0));
        let e = expected_counts(&CoefVector::from_pairs(&[(Coef::B0, ln(2.0))])).unwrap();
        assert!(e.0.iter().all(|&v| (v - 2.0).abs() < 1e-15));
        let e = expected_counts(&CoefVector::from_pairs(&[(Coef::T, 1.0), (Coef::TY, 1.0)])).unwrap();
        assert!((e.get(1, 0, 1) - exp(2.0)).abs() < 1e-14);
        assert!((e.get(1, 0, 0) - exp(1.0)).abs() < 1e-14);
        assert_eq!(e.get(0, 0, 1), 1.0);
        assert_eq!(e.get(0, 0, 0), 1.0);
    }

    #[test]
    fn overflow_is_an_error() {
        let b = CoefVector::from_pairs(&[(Coef::TX, 701.0)]);
        assert!(matches!(expected_counts(&b), Err(ModelError::Overflow { coef: Coef::TX, .. })));
        let b = CoefVector::from_pairs(&[(Coef::B0, 700.0), (Coef::T, 700.0)]);
        assert!(matches!(expected_counts(&b), Err(ModelError::CellOverflow { .. })));
    }

    #[test]
    fn imputation_probs_examples() {
        let p = imputation_probs(&sids_means());
        assert!((p.pi1(0, 0) - 0.1).abs() < 1e-12);
        assert!((p.pi1(1, 0) - 0.6).abs() < 1e-12);
        assert!((p.pi1(0, 1) - 0.1).abs() < 1e-12);
        assert!((p.pi1(1, 1) - 0.6).abs() < 1e-12);
        assert!(imputation_probs(&BetaTBlock::default()).0.iter().all(|&v| v == 0.5));
        let low = imputation_probs(&BetaTBlock { t: -30.0, ..Default::default() });
        assert!(low.0.iter().all(|&v| v < 1e-12 && v > 0.0));
    }

    #[test]
    fn transparent_expected_sids() {
        let e = transparent_expected(&sids_margins(), &sids_means());
        assert!((e.ty_margin(1, 1) - 164.0).abs() < 0.05);
        assert!((e.ty_margin(0, 1) - 611.0).abs() < 0.05);
        assert!((e.ty_margin(1, 0) - 146.7).abs() < 0.05);
        assert!((e.ty_margin(0, 0) - 650.3).abs() < 0.05);
        for (a, b) in e.xy_margins().0.iter().zip(sids_margins().0) {
            assert!((a - b).abs() < 1e-9 * b);
        }
        let or = marginal_or(&e, Margin::TY).unwrap();
        assert!((or - 1.19).abs() < 0.005);
        assert!((marginal_or(&e, Margin::XY).unwrap() - 1.42).abs() < 0.005);
        let half = transparent_expected(&sids_margins(), &BetaTBlock::default());
        assert!((half.get(1, 1, 1) - 86.5).abs() < 1e-12);
    }

    #[test]
    fn bias_factor_examples() {
        assert_eq!(misclass_bias_factor(&BetaXBlock { x: 0.3, tx: 2.0, xy: 0.0, txy: 0.0 }), 1.0);
        assert_eq!(misclass_bias_factor(&BetaXBlock::default()), 1.0);
        assert!((confounding_bias_factor(logit(0.2), 0.0, ln(3.0), 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(confounding_bias_factor(0.0, 0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn roc_odds_ratio_examples() {
        let (a, b) = roc_odds_ratios(&sids_means());
        assert!((a - 13.5).abs() < 1e-12 && (b - 13.5).abs() < 1e-12);
        assert_eq!(roc_odds_ratios(&BetaTBlock::default()), (1.0, 1.0));
        let (a, b) = roc_odds_ratios(&BetaTBlock { tx: ln(6.0), txy: ln(2.0), ..Default::default() });
        assert!((a - 6.0).abs() < 1e-12 && (b - 12.0).abs() < 1e-12);
    }

    #[test]
    fn selection_factor_examples() {
        let zero = SelectionCoefs::default();
        assert_eq!(selection_bias_factor(SelectionBias::Density(&zero)), 1.0);
        let s = SelectionCoefs { beta_sty: ln(2.0), ..Default::default() };
        assert!((selection_bias_factor(SelectionBias::Density(&s)) - 0.5).abs() < 1e-15);
        let nondiff = BetaXBlock { x: -1.0, tx: 2.5, xy: 0.0, txy: 0.0 };
        assert!((selection_bias_factor(SelectionBias::Stratum(&nondiff)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn marginal_or_uniform_is_one() {
        let e = ExpectedCells([3.0; 8]);
        assert_eq!(marginal_or(&e, Margin::TY).unwrap(), 1.0);
        assert_eq!(marginal_or(&e, Margin::XY).unwrap(), 1.0);
        assert_eq!(marginal_or(&ExpectedCells([0.0; 8]), Margin::XY), Err(ModelError::ZeroMargin));
    }

    #[test]
    fn classification_probabilities() {
        let b = CoefVector::from_pairs(&[(Coef::X, logit(0.1)), (Coef::TX, ln(13.5))]);
        assert!((b.classification_prob(0, 0) - 0.1).abs() < 1e-12);
        assert!((b.classification_prob(1, 1) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn coef_names_round_trip() {
        for c in Coef::LOGLINEAR.into_iter().chain(Coef::SELECTION) {
            assert_eq!(Coef::from_name(c.name()), Some(c));
        }
        assert_eq!(Coef::from_name("beta_Q"), None);
    }
}
