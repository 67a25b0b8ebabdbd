//! Independent-draw sampling of bias-adjusted targets: an identified-block
//! draw combined with a prior draw of the bias block, plus summaries and
//! ignorance intervals.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use thiserror::Error;

use crate::math::{abs, exp, ln};
use crate::model::{
    confounding_bias_factor, marginal_or, selection_bias_factor, transparent_expected, BetaTBlock, BetaXBlock, Coef,
    Margin, SelectionBias, SelectionCoefs, SelectionMode, XyCells,
};
use crate::priors::{PriorError, PriorPanel, PriorSpec};
use crate::tables::{Axis, StratifiedCountTable, TableError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("invalid sampler configuration: {0}")]
    Config(&'static str),
    #[error("identified data must be a single fully observed 2x2 over Y and one other axis")]
    NotIdentifiedTable,
    #[error("outcome stratum Y={0} has no counts")]
    EmptyStratum(u8),
    #[error("bootstrap resampling needs whole-number counts")]
    FractionalCount,
    #[error("{0} needs a proper prior for sampling")]
    ImproperBiasPrior(Coef),
    #[error("{0} belongs to the identified block and must have a flat prior")]
    InformativeIdentifiedPrior(Coef),
    #[error("{dropped} of {total} draws were not finite (limit 0.1%)")]
    TooManyNonFinite { dropped: usize, total: usize },
    #[error("at least two finite draws are needed, got {0}")]
    TooFewDraws(usize),
    #[error("draws of ln(target) have zero variance; variance ratio undefined")]
    ZeroVariance,
    #[error("percentile level {0} must lie strictly between 0 and 1")]
    BadLevel(f64),
    #[error("ignorance box must give one nonempty interval per bias coefficient")]
    BadBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum IdentifiedMode {
    /// Conjugate Dirichlet posterior within each outcome stratum.
    #[default]
    Dirichlet,
    /// Multinomial resampling of each outcome stratum.
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    pub draws: usize,
    pub seed: u64,
    pub identified_mode: IdentifiedMode,
    pub dirichlet_prior: f64,
    pub chunk: usize,
}

pub const DEFAULT_CHUNK: usize = 4096;
pub const DEFAULT_DIRICHLET_PRIOR: f64 = 1.0;

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            draws: 250_000,
            seed: 1,
            identified_mode: IdentifiedMode::Dirichlet,
            dirichlet_prior: DEFAULT_DIRICHLET_PRIOR,
            chunk: DEFAULT_CHUNK,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.draws == 0 {
            return Err(McError::Config("draws must be at least 1"));
        }
        if self.chunk == 0 {
            return Err(McError::Config("chunk must be at least 1"));
        }
        if !(self.dirichlet_prior >= 0.0 && self.dirichlet_prior.is_finite()) {
            return Err(McError::Config("dirichlet_prior must be a nonnegative number"));
        }
        Ok(())
    }

    pub fn chunks(&self) -> usize {
        self.draws.div_ceil(self.chunk)
    }

    /// Generator for chunk `index`.
    pub fn chunk_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Observed 2x2 whose outcome strata are fixed by design. Cells are at
/// offset `a + 2y`, with `a` the level of the non-outcome axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiedData {
    pub cells: XyCells,
    pub other: Axis,
}

impl IdentifiedData {
    pub fn from_table(table: &StratifiedCountTable) -> Result<Self, McError> {
        let axes = table.axes();
        if axes.len() != 2 || !table.has_axis(Axis::Y) || table.groups().len() != 1 || !table.groups()[0].latent().is_empty()
        {
            return Err(McError::NotIdentifiedTable);
        }
        let other = if axes[0] == Axis::Y { axes[1] } else { axes[0] };
        let g = &table.groups()[0];
        let mut cells = [0.0; 4];
        for y in 0..2u8 {
            for a in 0..2u8 {
                cells[(a | (y << 1)) as usize] = g.count(&[(other, a), (Axis::Y, y)]).ok_or(McError::NotIdentifiedTable)?;
            }
        }
        for y in 0..2u8 {
            if cells[(y << 1) as usize] + cells[(1 | (y << 1)) as usize] <= 0.0 {
                return Err(McError::EmptyStratum(y));
            }
        }
        Ok(IdentifiedData { cells: XyCells(cells), other })
    }

    pub fn stratum_total(&self, y: u8) -> f64 {
        self.cells.get(0, y) + self.cells.get(1, y)
    }
}

/// One draw of the identified cell expectations.
pub fn draw_identified<R: Rng + ?Sized>(
    data: &IdentifiedData,
    mode: IdentifiedMode,
    dirichlet_prior: f64,
    rng: &mut R,
) -> Result<XyCells, McError> {
    let mut out = [0.0; 4];
    for y in 0..2u8 {
        let total = data.stratum_total(y);
        let (i0, i1) = ((y << 1) as usize, (1 | (y << 1)) as usize);
        let (a0, a1) = (data.cells.0[i0], data.cells.0[i1]);
        match mode {
            IdentifiedMode::Dirichlet => {
                let g0 = gamma_draw(a0 + dirichlet_prior, rng)?;
                let g1 = gamma_draw(a1 + dirichlet_prior, rng)?;
                let s = g0 + g1;
                out[i0] = total * g0 / s;
                out[i1] = total * g1 / s;
            }
            IdentifiedMode::Bootstrap => {
                if a0 != libm::trunc(a0) || a1 != libm::trunc(a1) {
                    return Err(McError::FractionalCount);
                }
                let n = total as u64;
                let k = Binomial::new(n, a1 / total).map_err(|_| McError::FractionalCount)?.sample(rng);
                out[i1] = k as f64;
                out[i0] = (n - k) as f64;
            }
        }
    }
    Ok(XyCells(out))
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64, McError> {
    if shape == 0.0 {
        return Ok(0.0);
    }
    Ok(Gamma::new(shape, 1.0).map_err(|_| McError::Config("invalid Dirichlet parameter"))?.sample(rng))
}

/// `OR*_TY` from identified margins and a drawn T-given-XY block.
pub fn misclass_draw(e_star: &XyCells, beta_t: &BetaTBlock) -> f64 {
    marginal_or(&transparent_expected(e_star, beta_t), Margin::TY).unwrap_or(f64::NAN)
}

/// Crude `OR*_XY` divided by the confounding factor with `beta_TXY = 0`.
pub fn confounder_draw(e_star: &XyCells, t: f64, tx: f64, ty: f64) -> f64 {
    e_star.odds_ratio() / confounding_bias_factor(t, tx, ty, 0.0)
}

/// Stratum odds ratio times the selection factor. `e0_star` is indexed by
/// `(t, y)` at offset `t + 2y`.
pub fn selection_draw(e0_star: &XyCells, s: SelectionBias<'_>) -> f64 {
    e0_star.odds_ratio() * selection_bias_factor(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AnalysisKind {
    Misclassification,
    Confounder,
    Selection(SelectionMode),
}

impl AnalysisKind {
    /// Bias coefficients drawn from their priors, in draw order.
    pub fn bias_coefs(self) -> &'static [Coef] {
        match self {
            AnalysisKind::Misclassification => &Coef::T_BLOCK,
            AnalysisKind::Confounder => &[Coef::T, Coef::TX, Coef::TY],
            AnalysisKind::Selection(SelectionMode::Density) => &[Coef::STY],
            AnalysisKind::Selection(SelectionMode::Stratum) => &Coef::X_BLOCK,
        }
    }

    /// Coefficients of the identified block, which must stay flat.
    pub fn identified_coefs(self) -> &'static [Coef] {
        match self {
            AnalysisKind::Misclassification | AnalysisKind::Confounder => &[Coef::B0, Coef::X, Coef::Y, Coef::XY],
            AnalysisKind::Selection(_) => &[Coef::B0, Coef::T, Coef::Y, Coef::TY],
        }
    }

    /// Axis paired with Y in the identified table.
    pub fn identified_axis(self) -> Axis {
        match self {
            AnalysisKind::Selection(_) => Axis::T,
            _ => Axis::X,
        }
    }

    /// Target for one identified draw and one bias draw.
    pub fn target(self, e: &XyCells, bias: &[f64]) -> f64 {
        match self {
            AnalysisKind::Misclassification => {
                misclass_draw(e, &BetaTBlock { t: bias[0], tx: bias[1], ty: bias[2], txy: bias[3] })
            }
            AnalysisKind::Confounder => confounder_draw(e, bias[0], bias[1], bias[2]),
            AnalysisKind::Selection(SelectionMode::Density) => {
                selection_draw(e, SelectionBias::Density(&SelectionCoefs { beta_sty: bias[0], ..Default::default() }))
            }
            AnalysisKind::Selection(SelectionMode::Stratum) => {
                selection_draw(e, SelectionBias::Stratum(&BetaXBlock::from_array([bias[0], bias[1], bias[2], bias[3]])))
            }
        }
    }
}

/// Everything a worker needs to produce any chunk.
pub struct SamplerJob {
    pub kind: AnalysisKind,
    pub data: IdentifiedData,
    pub bias_priors: Vec<PriorSpec>,
    pub config: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawChunk {
    pub index: usize,
    pub targets: Vec<f64>,
    /// Row-major, one row of bias coefficients per draw.
    pub bias: Vec<f64>,
}

impl SamplerJob {
    pub fn new(
        kind: AnalysisKind,
        table: &StratifiedCountTable,
        panel: &PriorPanel,
        config: SamplerConfig,
    ) -> Result<Self, McError> {
        config.validate()?;
        let data = IdentifiedData::from_table(table)?;
        if data.other != kind.identified_axis() {
            return Err(McError::NotIdentifiedTable);
        }
        for &c in kind.identified_coefs() {
            if panel.get(c).is_some_and(|s| !s.is_flat()) {
                return Err(McError::InformativeIdentifiedPrior(c));
            }
        }
        let bias_priors = kind
            .bias_coefs()
            .iter()
            .map(|&c| match panel.get(c) {
                Some(s) if !s.is_flat() => Ok(*s),
                _ => Err(McError::ImproperBiasPrior(c)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SamplerJob { kind, data, bias_priors, config })
    }

    pub fn chunk(&self, index: usize) -> Result<DrawChunk, McError> {
        let cfg = &self.config;
        let start = index * cfg.chunk;
        let end = (start + cfg.chunk).min(cfg.draws);
        let k = self.bias_priors.len();
        let mut rng = cfg.chunk_rng(index);
        let mut targets = Vec::with_capacity(end - start);
        let mut bias = Vec::with_capacity((end - start) * k);
        let mut row = vec![0.0; k];
        for _ in start..end {
            let e = draw_identified(&self.data, cfg.identified_mode, cfg.dirichlet_prior, &mut rng)?;
            for (slot, p) in row.iter_mut().zip(&self.bias_priors) {
                *slot = p.sample(&mut rng)?;
            }
            targets.push(self.kind.target(&e, &row));
            bias.extend_from_slice(&row);
        }
        Ok(DrawChunk { index, targets, bias })
    }
}

/// Runs chunk jobs; implementations may parallelize, since every chunk is a
/// pure function of its index.
pub trait ChunkExecutor {
    fn run(&self, chunks: usize, job: &(dyn Fn(usize) -> Result<DrawChunk, McError> + Sync))
        -> Vec<Result<DrawChunk, McError>>;
}

pub struct Sequential;

impl ChunkExecutor for Sequential {
    fn run(
        &self,
        chunks: usize,
        job: &(dyn Fn(usize) -> Result<DrawChunk, McError> + Sync),
    ) -> Vec<Result<DrawChunk, McError>> {
        (0..chunks).map(job).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    pub kind: AnalysisKind,
    pub targets: Vec<f64>,
    pub bias_names: Vec<Coef>,
    pub bias: Vec<f64>,
}

impl DrawSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn bias_row(&self, i: usize) -> &[f64] {
        let k = self.bias_names.len();
        &self.bias[i * k..(i + 1) * k]
    }

    /// Draws of one bias coefficient.
    pub fn bias_column(&self, coef: Coef) -> Option<Vec<f64>> {
        let j = self.bias_names.iter().position(|&c| c == coef)?;
        let k = self.bias_names.len();
        Some(self.bias.iter().skip(j).step_by(k).copied().collect())
    }

    pub fn non_finite(&self) -> usize {
        self.targets.iter().filter(|&&t| !usable(t)).count()
    }
}

fn usable(t: f64) -> bool {
    t.is_finite() && t > 0.0
}

pub fn run_sampler(
    kind: AnalysisKind,
    table: &StratifiedCountTable,
    panel: &PriorPanel,
    config: &SamplerConfig,
    executor: &dyn ChunkExecutor,
) -> Result<DrawSet, McError> {
    let job = SamplerJob::new(kind, table, panel, *config)?;
    let f = |i: usize| job.chunk(i);
    let mut chunks = executor
        .run(config.chunks(), &f)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    chunks.sort_by_key(|c| c.index);
    let mut targets = Vec::with_capacity(config.draws);
    let mut bias = Vec::with_capacity(config.draws * job.bias_priors.len());
    for c in chunks {
        targets.extend_from_slice(&c.targets);
        bias.extend_from_slice(&c.bias);
    }
    Ok(DrawSet { kind, targets, bias_names: kind.bias_coefs().to_vec(), bias })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrawSummary {
    pub draws: usize,
    pub dropped: usize,
    pub median: f64,
    /// `(level, value)` pairs in increasing level.
    pub percentiles: Vec<(f64, f64)>,
    pub mean_log: f64,
    pub var_log: f64,
    pub variance_ratio: Option<f64>,
}

impl DrawSummary {
    pub fn percentile(&self, level: f64) -> Option<f64> {
        self.percentiles.iter().find(|(l, _)| abs(l - level) < 1e-12).map(|(_, v)| *v)
    }
}

/// Order statistic at `ceil(q n)` of sorted values.
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = libm::ceil(q * n as f64) as usize;
    sorted[k.clamp(1, n) - 1]
}

/// Percentile summary of positive targets; non-finite or nonpositive draws
/// are dropped and counted.
pub fn summarize(targets: &[f64], levels: &[f64], crude_log_var: Option<f64>) -> Result<DrawSummary, McError> {
    for &l in levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(McError::BadLevel(l));
        }
    }
    let total = targets.len();
    let mut kept: Vec<f64> = targets.iter().copied().filter(|&t| usable(t)).collect();
    let dropped = total - kept.len();
    if dropped as f64 > 0.001 * total as f64 {
        return Err(McError::TooManyNonFinite { dropped, total });
    }
    let n = kept.len();
    if n < 2 {
        return Err(McError::TooFewDraws(n));
    }
    kept.sort_by(|a, b| a.total_cmp(b));
    let logs: Vec<f64> = kept.iter().map(|&t| ln(t)).collect();
    let mean_log = logs.iter().sum::<f64>() / n as f64;
    let var_log = logs.iter().map(|v| (v - mean_log) * (v - mean_log)).sum::<f64>() / (n - 1) as f64;
    let variance_ratio = match crude_log_var {
        Some(c) if var_log > 0.0 => Some(c / var_log),
        Some(_) => return Err(McError::ZeroVariance),
        None => None,
    };
    let mut lv = levels.to_vec();
    lv.sort_by(|a, b| a.total_cmp(b));
    lv.dedup();
    let percentiles = lv.iter().map(|&l| (l, order_statistic(&kept, l))).collect();
    Ok(DrawSummary { draws: total, dropped, median: order_statistic(&kept, 0.5), percentiles, mean_log, var_log, variance_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IgnoranceInterval {
    pub lo: f64,
    pub hi: f64,
    pub unbounded_lo: bool,
    pub unbounded_hi: bool,
}

const FAR: [f64; 2] = [30.0, 60.0];

/// Range of the target over a box of bias coefficients with the identified
/// block held at `e_hat`. Infinite box sides are probed at increasing
/// distance; if the extreme keeps moving, that side is reported unbounded.
pub fn ignorance_interval(
    e_hat: &XyCells,
    bounds: &[(f64, f64)],
    kind: AnalysisKind,
) -> Result<IgnoranceInterval, McError> {
    let k = kind.bias_coefs().len();
    if bounds.len() != k || bounds.iter().any(|(a, b)| !(a <= b) || a.is_nan() || b.is_nan()) {
        return Err(McError::BadBox);
    }
    let infinite = bounds.iter().any(|(a, b)| !a.is_finite() || !b.is_finite());
    let clip = |far: f64| -> Vec<(f64, f64)> {
        bounds.iter().map(|&(a, b)| (a.max(-far), b.min(far))).collect()
    };
    let f = |x: &[f64]| ln(kind.target(e_hat, x));
    let near = clip(FAR[0]);
    let (lo, hi) = (box_extreme(&f, &near, -1.0), box_extreme(&f, &near, 1.0));
    if !infinite {
        return Ok(IgnoranceInterval { lo: exp(lo), hi: exp(hi), unbounded_lo: false, unbounded_hi: false });
    }
    let wide = clip(FAR[1]);
    let (lo2, hi2) = (box_extreme(&f, &wide, -1.0), box_extreme(&f, &wide, 1.0));
    let moved = |a: f64, b: f64| !(abs(a - b) <= 1e-6 * (1.0 + abs(a))) ;
    let unbounded_lo = moved(lo, lo2);
    let unbounded_hi = moved(hi, hi2);
    Ok(IgnoranceInterval {
        lo: if unbounded_lo { 0.0 } else { exp(lo2) },
        hi: if unbounded_hi { f64::INFINITY } else { exp(hi2) },
        unbounded_lo,
        unbounded_hi,
    })
}

// sign = 1 maximizes, -1 minimizes; returns the extreme value of f.
fn box_extreme(f: &dyn Fn(&[f64]) -> f64, bounds: &[(f64, f64)], sign: f64) -> f64 {
    let k = bounds.len();
    let score = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            sign * v
        }
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for mask in 0..(1usize << k) {
        starts.push((0..k).map(|i| if mask >> i & 1 == 1 { bounds[i].1 } else { bounds[i].0 }).collect());
    }
    starts.sort_by(|a, b| score(b).total_cmp(&score(a)));
    let mut best = score(&starts[0]);
    let center: Vec<f64> = bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let picks: Vec<Vec<f64>> = starts.iter().take(3).cloned().chain(core::iter::once(center)).collect();
    for start in picks {
        let (_, v) = coordinate_refine(&score, bounds, start);
        if v > best {
            best = v;
        }
    }
    sign * best
}

const SCAN: usize = 16;

fn coordinate_refine(score: &dyn Fn(&[f64]) -> f64, bounds: &[(f64, f64)], mut x: Vec<f64>) -> (Vec<f64>, f64) {
    let mut current = score(&x);
    for _sweep in 0..50 {
        let before = current;
        for i in 0..x.len() {
            let (a, b) = bounds[i];
            if a == b {
                continue;
            }
            let step = (b - a) / SCAN as f64;
            let mut best = (x[i], current);
            for j in 0..=SCAN {
                x[i] = a + step * j as f64;
                let v = score(&x);
                if v > best.1 {
                    best = (x[i], v);
                }
            }
            let (xi, v) = golden(score, &mut x, i, (best.0 - step).max(a), (best.0 + step).min(b));
            if v > best.1 {
                best = (xi, v);
            }
            x[i] = best.0;
            current = best.1;
        }
        if current - before <= 1e-13 * (1.0 + abs(current)) {
            break;
        }
    }
    (x, current)
}

fn golden(score: &dyn Fn(&[f64]) -> f64, x: &mut [f64], i: usize, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    x[i] = c;
    let mut fc = score(x);
    x[i] = d;
    let mut fd = score(x);
    for _ in 0..100 {
        if b - a <= 1e-12 * (1.0 + abs(a)) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            x[i] = c;
            fc = score(x);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            x[i] = d;
            fd = score(x);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logit;
    use crate::model::{expected_counts, CoefVector};
    use crate::priors::Design;

    fn sids_table() -> StratifiedCountTable {
        StratifiedCountTable::complete(
            &[Axis::X, Axis::Y],
            &[(&[1, 1], 173.0), (&[0, 1], 602.0), (&[1, 0], 134.0), (&[0, 0], 663.0)],
        )
        .unwrap()
    }

    fn sids_cells() -> XyCells {
        XyCells([663.0, 134.0, 602.0, 173.0])
    }

    fn sids_panel() -> PriorPanel {
        PriorPanel::loglinear(
            &[
                PriorSpec::normal(Coef::T, logit(0.1), 0.16).unwrap(),
                PriorSpec::normal(Coef::TX, ln(13.5), 0.25).unwrap(),
                PriorSpec::normal(Coef::TY, 0.0, 0.50).unwrap(),
                PriorSpec::normal(Coef::TXY, 0.0, 0.125).unwrap(),
            ],
            Design::CaseControl,
        )
        .unwrap()
    }

    #[test]
    fn bootstrap_keeps_stratum_totals() {
        let data = IdentifiedData::from_table(&sids_table()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let e = draw_identified(&data, IdentifiedMode::Bootstrap, 1.0, &mut rng).unwrap();
            assert_eq!(e.get(0, 1) + e.get(1, 1), 775.0);
            assert_eq!(e.get(0, 0) + e.get(1, 0), 797.0);
        }
    }

    #[test]
    fn dirichlet_mean_matches_posterior_mean() {
        let data = IdentifiedData::from_table(&sids_table()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += draw_identified(&data, IdentifiedMode::Dirichlet, 1.0, &mut rng).unwrap().get(1, 1);
        }
        let oracle = 775.0 * 174.0 / 777.0;
        assert!((sum / n as f64 - oracle).abs() < 0.1);
    }

    #[test]
    fn degenerate_stratum_draw_is_the_total() {
        let t = StratifiedCountTable::complete(
            &[Axis::X, Axis::Y],
            &[(&[1, 1], 9.0), (&[0, 1], 0.0), (&[1, 0], 4.0), (&[0, 0], 5.0)],
        )
        .unwrap();
        let data = IdentifiedData::from_table(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [IdentifiedMode::Bootstrap, IdentifiedMode::Dirichlet] {
            let e = draw_identified(&data, mode, 0.0, &mut rng).unwrap();
            assert_eq!(e.get(1, 1), 9.0);
            assert_eq!(e.get(0, 1), 0.0);
        }
    }

    #[test]
    fn empty_stratum_is_rejected() {
        let t = StratifiedCountTable::complete(
            &[Axis::X, Axis::Y],
            &[(&[1, 1], 0.0), (&[0, 1], 0.0), (&[1, 0], 4.0), (&[0, 0], 5.0)],
        )
        .unwrap();
        assert_eq!(IdentifiedData::from_table(&t), Err(McError::EmptyStratum(1)));
    }

    #[test]
    fn misclass_draw_examples() {
        let block = BetaTBlock { t: logit(0.1), tx: ln(13.5), ty: 0.0, txy: 0.0 };
        assert!((misclass_draw(&sids_cells(), &block) - 1.19).abs() < 0.005);
        let half = misclass_draw(&sids_cells(), &BetaTBlock::default());
        assert!((half - 1.0).abs() < 1e-12);
        // Generate e* from a beta with beta_XY = beta_TXY = 0; the TY log OR is then beta_TY.
        for delta in [-0.7, 0.0, 0.4, 1.3] {
            let beta =
                CoefVector::from_pairs(&[(Coef::B0, 3.0), (Coef::T, -1.0), (Coef::X, 0.2), (Coef::Y, 0.1), (Coef::TX, 1.5), (Coef::TY, delta)]);
            let e = expected_counts(&beta).unwrap();
            let got = misclass_draw(&e.xy_margins(), &beta.t_block());
            assert!((ln(got) - delta).abs() < 1e-12);
        }
    }

    fn brute_force_r(t: f64, tx: f64, ty: f64) -> f64 {
        let beta = CoefVector::from_pairs(&[(Coef::T, t), (Coef::TX, tx), (Coef::TY, ty), (Coef::XY, 0.37)]);
        let e = expected_counts(&beta).unwrap();
        marginal_or(&e, Margin::XY).unwrap() / exp(0.37)
    }

    #[test]
    fn confounder_draw_examples() {
        let e = sids_cells();
        assert!((confounder_draw(&e, 2.3, 0.0, 0.0) - e.odds_ratio()).abs() < 1e-12);
        let (t, tx, ty) = (logit(0.25), ln(2.0), ln(2.0));
        let got = confounder_draw(&e, t, tx, ty);
        assert!((got - e.odds_ratio() / brute_force_r(t, tx, ty)).abs() < 1e-10);
        assert!(brute_force_r(t, tx, ty) > 1.0 && got < e.odds_ratio());
    }

    #[test]
    fn selection_draw_examples() {
        let e0 = XyCells([2.0, 1.0, 1.0, 2.0]);
        assert_eq!(selection_draw(&e0, SelectionBias::Density(&SelectionCoefs::default())), 4.0);
        let s = SelectionCoefs { beta_sty: ln(2.0), ..Default::default() };
        assert!((selection_draw(&e0, SelectionBias::Density(&s)) - 2.0).abs() < 1e-12);
        let nondiff = BetaXBlock { x: 0.4, tx: -1.2, xy: 0.0, txy: 0.0 };
        assert!((selection_draw(&e0, SelectionBias::Stratum(&nondiff)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0], &[0.5], None).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!(summarize(&[2.0; 10], &[0.5], Some(0.1)), Err(McError::ZeroVariance));
        let mut v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let s = summarize(&v, &[0.975, 0.025], None).unwrap();
        assert_eq!(s.percentiles, vec![(0.025, 25.0), (0.975, 975.0)]);
        v[0] = f64::NAN;
        assert_eq!(summarize(&v, &[0.5], None).unwrap().dropped, 1);
        v[1] = f64::INFINITY;
        assert!(matches!(summarize(&v, &[0.5], None), Err(McError::TooManyNonFinite { dropped: 2, .. })));
        assert_eq!(summarize(&[1.0], &[0.5], None), Err(McError::TooFewDraws(1)));
    }

    #[test]
    fn sampler_is_deterministic_and_chunk_order_free() {
        let mut cfg = SamplerConfig { draws: 10_000, seed: 42, ..Default::default() };
        let a = run_sampler(AnalysisKind::Misclassification, &sids_table(), &sids_panel(), &cfg, &Sequential).unwrap();
        let b = run_sampler(AnalysisKind::Misclassification, &sids_table(), &sids_panel(), &cfg, &Sequential).unwrap();
        assert_eq!(a, b);
        struct Reversed;
        impl ChunkExecutor for Reversed {
            fn run(
                &self,
                chunks: usize,
                job: &(dyn Fn(usize) -> Result<DrawChunk, McError> + Sync),
            ) -> Vec<Result<DrawChunk, McError>> {
                (0..chunks).rev().map(job).collect()
            }
        }
        let c = run_sampler(AnalysisKind::Misclassification, &sids_table(), &sids_panel(), &cfg, &Reversed).unwrap();
        assert_eq!(a, c);
        cfg.seed = 43;
        let d = run_sampler(AnalysisKind::Misclassification, &sids_table(), &sids_panel(), &cfg, &Sequential).unwrap();
        assert_ne!(a.targets, d.targets);
    }

    #[test]
    fn point_mass_bias_prior_gives_identical_bias_rows() {
        let eps = 1e-300;
        let panel = PriorPanel::loglinear(
            &[
                PriorSpec::normal(Coef::T, logit(0.1), eps).unwrap(),
                PriorSpec::normal(Coef::TX, ln(13.5), eps).unwrap(),
                PriorSpec::normal(Coef::TY, 0.0, eps).unwrap(),
                PriorSpec::normal(Coef::TXY, 0.0, eps).unwrap(),
            ],
            Design::CaseControl,
        )
        .unwrap();
        let cfg = SamplerConfig { draws: 2000, ..Default::default() };
        let d = run_sampler(AnalysisKind::Misclassification, &sids_table(), &panel, &cfg, &Sequential).unwrap();
        let means = [logit(0.1), ln(13.5), 0.0, 0.0];
        for i in 0..d.len() {
            for (v, m) in d.bias_row(i).iter().zip(means) {
                assert!((v - m).abs() < 1e-140);
            }
        }
        let s = summarize(&d.targets, &[0.025, 0.975], None).unwrap();
        assert!(s.percentiles[0].1 < s.median && s.median < s.percentiles[1].1);
    }

    #[test]
    fn sampler_rejects_bad_inputs() {
        let cfg = SamplerConfig { draws: 0, ..Default::default() };
        assert!(matches!(
            run_sampler(AnalysisKind::Misclassification, &sids_table(), &sids_panel(), &cfg, &Sequential),
            Err(McError::Config(_))
        ));
        let cfg = SamplerConfig { draws: 10, ..Default::default() };
        assert_eq!(
            run_sampler(AnalysisKind::Misclassification, &sids_table(), &PriorPanel::flat_loglinear(), &cfg, &Sequential),
            Err(McError::ImproperBiasPrior(Coef::T))
        );
    }

    #[test]
    fn ignorance_degenerate_and_unbounded() {
        let m = [logit(0.1), ln(13.5), 0.0, 0.0];
        let b: Vec<(f64, f64)> = m.iter().map(|&v| (v, v)).collect();
        let iv = ignorance_interval(&sids_cells(), &b, AnalysisKind::Misclassification).unwrap();
        assert_eq!(iv.lo, iv.hi);
        assert!((iv.lo - 1.19).abs() < 0.005);
        let mut open = b.clone();
        open[2] = (f64::NEG_INFINITY, f64::INFINITY);
        let iv = ignorance_interval(&sids_cells(), &open, AnalysisKind::Misclassification).unwrap();
        assert!(iv.unbounded_lo && iv.unbounded_hi);
        assert_eq!((iv.lo, iv.hi), (0.0, f64::INFINITY));
        assert_eq!(
            ignorance_interval(&sids_cells(), &b[..2], AnalysisKind::Misclassification),
            Err(McError::BadBox)
        );
    }

    #[test]
    fn ignorance_contains_interior_points() {
        let sd = [0.4, 0.5, 0.5f64.sqrt(), 0.125f64.sqrt()];
        let m = [logit(0.1), ln(13.5), 0.0, 0.0];
        let b: Vec<(f64, f64)> = m.iter().zip(sd).map(|(&c, s)| (c - 1.96 * s, c + 1.96 * s)).collect();
        let iv = ignorance_interval(&sids_cells(), &b, AnalysisKind::Misclassification).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let x: Vec<f64> = b.iter().map(|&(a, c)| rng.random_range(a..=c)).collect();
            let v = AnalysisKind::Misclassification.target(&sids_cells(), &x);
            assert!(v >= iv.lo * (1.0 - 1e-12) && v <= iv.hi * (1.0 + 1e-12));
        }
    }
}
