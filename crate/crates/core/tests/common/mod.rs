#![allow(dead_code)]

use relaxbias_core::math::{ln, logit};
use relaxbias_core::tables::{RawCell, RawGroup};
use relaxbias_core::{Axis, Coef, Design, PriorPanel, PriorSpec, StratifiedCountTable};

pub fn sids_table() -> StratifiedCountTable {
    xy_table([173.0, 602.0, 134.0, 663.0])
}

/// Cells in the order (x1y1, x0y1, x1y0, x0y0).
pub fn xy_table(c: [f64; 4]) -> StratifiedCountTable {
    StratifiedCountTable::complete(
        &[Axis::X, Axis::Y],
        &[(&[1, 1], c[0]), (&[0, 1], c[1]), (&[1, 0], c[2]), (&[0, 0], c[3])],
    )
    .unwrap()
}

/// X-Y table with T latent in every cell.
pub fn latent_t(c: [f64; 4]) -> StratifiedCountTable {
    let cells = [((1, 1), c[0]), ((0, 1), c[1]), ((1, 0), c[2]), ((0, 0), c[3])]
        .iter()
        .map(|&((x, y), n)| RawCell::new(&[(Axis::X, x), (Axis::Y, y)], n))
        .collect();
    StratifiedCountTable::load(&[Axis::T, Axis::X, Axis::Y], &[RawGroup { latent: vec![Axis::T], cells }]).unwrap()
}

/// Validated counts by (w, x, y) in the order w1 then w0, each
/// (x1y1, x0y1, x1y0, x0y0); then unvalidated counts in the same x-y order.
pub fn mixed(axis: Axis, known: [f64; 8], missing: [f64; 4]) -> StratifiedCountTable {
    let xy = [(1u8, 1u8), (0, 1), (1, 0), (0, 0)];
    let mut k = Vec::new();
    for (wi, w) in [1u8, 0].iter().enumerate() {
        for (j, &(x, y)) in xy.iter().enumerate() {
            k.push(RawCell::new(&[(axis, *w), (Axis::X, x), (Axis::Y, y)], known[wi * 4 + j]));
        }
    }
    let m = xy.iter().zip(missing).map(|(&(x, y), n)| RawCell::new(&[(Axis::X, x), (Axis::Y, y)], n)).collect();
    StratifiedCountTable::load(
        &[axis, Axis::X, Axis::Y],
        &[RawGroup { latent: vec![], cells: k }, RawGroup { latent: vec![axis], cells: m }],
    )
    .unwrap()
}

pub fn validation_table() -> StratifiedCountTable {
    mixed(
        Axis::W,
        [29.0, 17.0, 21.0, 16.0, 22.0, 143.0, 12.0, 168.0],
        [122.0, 442.0, 101.0, 479.0],
    )
}

pub fn sids_specs() -> Vec<PriorSpec> {
    vec![
        PriorSpec::normal(Coef::T, logit(0.1), 0.16).unwrap(),
        PriorSpec::normal(Coef::TX, ln(13.5), 0.25).unwrap(),
        PriorSpec::normal(Coef::TY, 0.0, 0.50).unwrap(),
        PriorSpec::normal(Coef::TXY, 0.0, 0.125).unwrap(),
    ]
}

pub fn sids_panel() -> PriorPanel {
    PriorPanel::loglinear(&sids_specs(), Design::CaseControl).unwrap()
}

pub fn sids_means() -> [f64; 4] {
    [logit(0.1), ln(13.5), 0.0, 0.0]
}

/// Largest gap between an empirical CDF and a reference CDF.
pub fn kolmogorov(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|a, b| a.total_cmp(b));
    let n = draws.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}
