//! Count tables over binary variables, with per-group observedness.
//!
//! A table declares an ordered list of axes. Its cells are split into
//! groups; each group marks a subset of the axes as latent (unobserved),
//! and holds one count for every level combination of the remaining axes.
//! Counts are reals because imputation produces fractional counts.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Axis {
    T,
    W,
    X,
    Y,
    S,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::T, Axis::W, Axis::X, Axis::Y, Axis::S];

    pub fn name(self) -> &'static str {
        match self {
            Axis::T => "T",
            Axis::W => "W",
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::S => "S",
        }
    }

    pub fn from_name(name: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("axis {0} declared twice")]
    DuplicateAxis(Axis),
    #[error("axis {0} is not declared on this table")]
    UnknownAxis(Axis),
    #[error("level {level} for axis {axis} is not binary")]
    BadLevel { axis: Axis, level: u8 },
    #[error("cell {0} appears twice in one group")]
    DuplicateCell(CellLabel),
    #[error("cell {0} has a negative count")]
    NegativeCount(CellLabel),
    #[error("cell {0} has a non-finite count")]
    NonFiniteCount(CellLabel),
    #[error("cell {0} is missing from group {1}")]
    MissingCell(CellLabel, usize),
    #[error("cell index must name exactly the observed axes of its group")]
    IncompleteIndex,
    #[error("every cell count is zero")]
    AllZero,
    #[error("table has no cell groups")]
    NoGroups,
    #[error("axis {0} is latent in at least one group")]
    AxisLatent(Axis),
    #[error("table is not a single fully observed 2x2 over the requested axes")]
    NotTwoByTwo,
    #[error("zero cell in 2x2 table; enable the continuity correction explicitly")]
    ZeroCell,
}

/// Human-readable cell coordinates for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellLabel(pub Vec<(Axis, u8)>);

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (axis, level)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{axis}={level}")?;
        }
        f.write_str("}")
    }
}

/// One cell as supplied by a caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCell {
    pub at: Vec<(Axis, u8)>,
    pub count: f64,
}

impl RawCell {
    pub fn new(at: &[(Axis, u8)], count: f64) -> Self {
        RawCell { at: at.to_vec(), count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGroup {
    pub latent: Vec<Axis>,
    pub cells: Vec<RawCell>,
}

/// Cells sharing an observedness pattern. Counts are stored densely; bit
/// `i` of a cell's offset is the level of `observed[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGroup {
    observed: Vec<Axis>,
    latent: Vec<Axis>,
    counts: Vec<f64>,
}

impl CellGroup {
    pub fn observed(&self) -> &[Axis] {
        &self.observed
    }

    pub fn latent(&self) -> &[Axis] {
        &self.latent
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn is_observed(&self, axis: Axis) -> bool {
        self.observed.contains(&axis)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Level of `axis` at dense offset `offset`, if the axis is observed.
    pub fn level_at(&self, offset: usize, axis: Axis) -> Option<u8> {
        self.observed
            .iter()
            .position(|&a| a == axis)
            .map(|i| ((offset >> i) & 1) as u8)
    }

    pub fn offset_of(&self, at: &[(Axis, u8)]) -> Option<usize> {
        if at.len() != self.observed.len() {
            return None;
        }
        let mut offset = 0;
        for (i, axis) in self.observed.iter().enumerate() {
            let level = at.iter().find(|(a, _)| a == axis)?.1;
            if level > 1 {
                return None;
            }
            offset |= (level as usize) << i;
        }
        Some(offset)
    }

    pub fn count(&self, at: &[(Axis, u8)]) -> Option<f64> {
        self.offset_of(at).map(|o| self.counts[o])
    }

    pub fn label(&self, offset: usize) -> CellLabel {
        CellLabel(
            self.observed
                .iter()
                .enumerate()
                .map(|(i, &a)| (a, ((offset >> i) & 1) as u8))
                .collect(),
        )
    }

    fn collapse(&self, axis: Axis) -> CellGroup {
        let bit = self.observed.iter().position(|&a| a == axis).unwrap();
        let mut observed = self.observed.clone();
        observed.remove(bit);
        let mut counts = alloc::vec![0.0; 1 << observed.len()];
        for (offset, &c) in self.counts.iter().enumerate() {
            let low = offset & ((1 << bit) - 1);
            let high = (offset >> (bit + 1)) << bit;
            counts[low | high] += c;
        }
        CellGroup { observed, latent: self.latent.clone(), counts }
    }
}

/// Observed counts indexed by binary variables. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedCountTable {
    axes: Vec<Axis>,
    groups: Vec<CellGroup>,
}

impl StratifiedCountTable {
    /// Validate and build a table from raw cell groups.
    pub fn load(axes: &[Axis], groups: &[RawGroup]) -> Result<Self, TableError> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(TableError::DuplicateAxis(*a));
            }
        }
        if groups.is_empty() {
            return Err(TableError::NoGroups);
        }
        let mut built = Vec::with_capacity(groups.len());
        for (gi, raw) in groups.iter().enumerate() {
            for l in &raw.latent {
                if !axes.contains(l) {
                    return Err(TableError::UnknownAxis(*l));
                }
            }
            let observed: Vec<Axis> =
                axes.iter().copied().filter(|a| !raw.latent.contains(a)).collect();
            let latent: Vec<Axis> =
                axes.iter().copied().filter(|a| raw.latent.contains(a)).collect();
            let mut counts = alloc::vec![f64::NAN; 1 << observed.len()];
            let mut group = CellGroup { observed, latent, counts: Vec::new() };
            for cell in &raw.cells {
                for &(axis, level) in &cell.at {
                    if !axes.contains(&axis) {
                        return Err(TableError::UnknownAxis(axis));
                    }
                    if level > 1 {
                        return Err(TableError::BadLevel { axis, level });
                    }
                }
                let offset = group.offset_of(&cell.at).ok_or(TableError::IncompleteIndex)?;
                let label = group.label(offset);
                if !counts[offset].is_nan() {
                    return Err(TableError::DuplicateCell(label));
                }
                if !cell.count.is_finite() {
                    return Err(TableError::NonFiniteCount(label));
                }
                if cell.count < 0.0 {
                    return Err(TableError::NegativeCount(label));
                }
                counts[offset] = cell.count;
            }
            if let Some(missing) = counts.iter().position(|c| c.is_nan()) {
                return Err(TableError::MissingCell(group.label(missing), gi));
            }
            group.counts = counts;
            built.push(group);
        }
        let table = StratifiedCountTable { axes: axes.to_vec(), groups: built };
        if table.total() <= 0.0 {
            return Err(TableError::AllZero);
        }
        Ok(table)
    }

    /// Single fully observed group from `(levels, count)` pairs.
    pub fn complete(axes: &[Axis], cells: &[(&[u8], f64)]) -> Result<Self, TableError> {
        let raw = cells
            .iter()
            .map(|(levels, count)| {
                if levels.len() != axes.len() {
                    return Err(TableError::IncompleteIndex);
                }
                Ok(RawCell {
                    at: axes.iter().copied().zip(levels.iter().copied()).collect(),
                    count: *count,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::load(axes, &[RawGroup { latent: Vec::new(), cells: raw }])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn has_axis(&self, axis: Axis) -> bool {
        self.axes.contains(&axis)
    }

    pub fn groups(&self) -> &[CellGroup] {
        &self.groups
    }

    pub fn total(&self) -> f64 {
        self.groups.iter().map(CellGroup::total).sum()
    }

    /// True if `axis` is latent in at least one group.
    pub fn is_latent_anywhere(&self, axis: Axis) -> bool {
        self.groups.iter().any(|g| g.latent.contains(&axis))
    }

    /// Sum counts over `axis`, which must be observed in every group.
    pub fn collapse(&self, axis: Axis) -> Result<Self, TableError> {
        if !self.has_axis(axis) {
            return Err(TableError::UnknownAxis(axis));
        }
        if self.is_latent_anywhere(axis) {
            return Err(TableError::AxisLatent(axis));
        }
        Ok(StratifiedCountTable {
            axes: self.axes.iter().copied().filter(|&a| a != axis).collect(),
            groups: self.groups.iter().map(|g| g.collapse(axis)).collect(),
        })
    }

    /// Relabel an axis, e.g. treating a validation measurement as the truth.
    pub fn rename_axis(&self, from: Axis, to: Axis) -> Result<Self, TableError> {
        if !self.has_axis(from) {
            return Err(TableError::UnknownAxis(from));
        }
        if from != to && self.has_axis(to) {
            return Err(TableError::DuplicateAxis(to));
        }
        let swap = |a: Axis| if a == from { to } else { a };
        Ok(StratifiedCountTable {
            axes: self.axes.iter().copied().map(swap).collect(),
            groups: self
                .groups
                .iter()
                .map(|g| CellGroup {
                    observed: g.observed.iter().copied().map(swap).collect(),
                    latent: g.latent.iter().copied().map(swap).collect(),
                    counts: g.counts.clone(),
                })
                .collect(),
        })
    }

    /// Merge every group into one by summing over the cells each group
    /// observes. Requires all groups to observe the same axes.
    pub fn pool_groups(&self) -> Result<Self, TableError> {
        let first = &self.groups[0];
        let mut counts = first.counts.clone();
        for g in &self.groups[1..] {
            if g.observed != first.observed {
                return Err(TableError::AxisLatent(
                    *first
                        .observed
                        .iter()
                        .find(|a| !g.observed.contains(a))
                        .or_else(|| g.observed.iter().find(|a| !first.observed.contains(a)))
                        .unwrap_or(&first.observed[0]),
                ));
            }
            for (c, v) in counts.iter_mut().zip(&g.counts) {
                *c += v;
            }
        }
        Ok(StratifiedCountTable {
            axes: first.observed.clone(),
            groups: alloc::vec![CellGroup {
                observed: first.observed.clone(),
                latent: Vec::new(),
                counts,
            }],
        })
    }

    /// View a single fully observed two-axis table as a 2x2.
    pub fn two_by_two(&self, row: Axis, col: Axis) -> Result<TwoByTwo, TableError> {
        if self.groups.len() != 1 || self.axes.len() != 2 || !self.groups[0].latent.is_empty() {
            return Err(TableError::NotTwoByTwo);
        }
        let g = &self.groups[0];
        let get = |r: u8, c: u8| g.count(&[(row, r), (col, c)]).ok_or(TableError::NotTwoByTwo);
        TwoByTwo::new(get(1, 1)?, get(1, 0)?, get(0, 1)?, get(0, 0)?)
    }
}

/// A 2x2 table; row is the first variable, column the second.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoByTwo {
    pub n11: f64,
    pub n10: f64,
    pub n01: f64,
    pub n00: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Continuity {
    #[default]
    None,
    AddHalf,
}

impl TwoByTwo {
    pub fn new(n11: f64, n10: f64, n01: f64, n00: f64) -> Result<Self, TableError> {
        let t = TwoByTwo { n11, n10, n01, n00 };
        for (i, v) in t.cells().into_iter().enumerate() {
            let label = CellLabel(alloc::vec![(Axis::Y, 1 - (i / 2) as u8), (Axis::X, 1 - (i % 2) as u8)]);
            if !v.is_finite() {
                return Err(TableError::NonFiniteCount(label));
            }
            if v < 0.0 {
                return Err(TableError::NegativeCount(label));
            }
        }
        if n11 + n10 + n01 + n00 <= 0.0 {
            return Err(TableError::AllZero);
        }
        Ok(t)
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.n11, self.n10, self.n01, self.n00]
    }

    pub fn total(&self) -> f64 {
        self.cells().iter().sum()
    }

    pub fn transpose(&self) -> TwoByTwo {
        TwoByTwo { n11: self.n11, n10: self.n01, n01: self.n10, n00: self.n00 }
    }

    fn adjusted(&self, correction: Continuity) -> Result<TwoByTwo, TableError> {
        match correction {
            Continuity::AddHalf => Ok(TwoByTwo {
                n11: self.n11 + 0.5,
                n10: self.n10 + 0.5,
                n01: self.n01 + 0.5,
                n00: self.n00 + 0.5,
            }),
            Continuity::None if self.cells().iter().any(|&c| c <= 0.0) => Err(TableError::ZeroCell),
            Continuity::None => Ok(*self),
        }
    }

    /// Cross-product ratio `n11 n00 / (n10 n01)`.
    pub fn odds_ratio(&self, correction: Continuity) -> Result<f64, TableError> {
        let t = self.adjusted(correction)?;
        Ok(t.n11 * t.n00 / (t.n10 * t.n01))
    }

    /// Large-sample standard error of the log odds ratio.
    pub fn wald_log_or_se(&self) -> Result<f64, TableError> {
        let t = self.adjusted(Continuity::None)?;
        Ok(crate::math::sqrt(1.0 / t.n11 + 1.0 / t.n10 + 1.0 / t.n01 + 1.0 / t.n00))
    }

    /// Wald interval for the odds ratio, `exp(ln OR ± z se)`.
    pub fn wald_interval(&self, level: f64) -> Result<(f64, f64), TableError> {
        let or = self.odds_ratio(Continuity::None)?;
        let se = self.wald_log_or_se()?;
        let z = crate::math::normal_quantile(0.5 + level / 2.0);
        let l = crate::math::ln(or);
        Ok((crate::math::exp(l - z * se), crate::math::exp(l + z * se)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sids_table() -> StratifiedCountTable {
        StratifiedCountTable::complete(
            &[Axis::X, Axis::Y],
            &[(&[1, 1], 173.0), (&[0, 1], 602.0), (&[1, 0], 134.0), (&[0, 0], 663.0)],
        )
        .unwrap()
    }

    #[test]
    fn loads_sids_table() {
        let t = sids_table();
        assert_eq!(t.total(), 1572.0);
        assert_eq!(t.groups()[0].count(&[(Axis::X, 1), (Axis::Y, 1)]), Some(173.0));
    }

    #[test]
    fn missing_cell_rejected() {
        let err = StratifiedCountTable::load(
            &[Axis::X, Axis::Y],
            &[RawGroup { latent: vec![], cells: vec![RawCell::new(&[(Axis::X, 1), (Axis::Y, 1)], 5.0)] }],
        )
        .unwrap_err();
        assert!(matches!(err, TableError::MissingCell(..)));
    }

    #[test]
    fn duplicate_and_negative_rejected() {
        let dup = StratifiedCountTable::complete(
            &[Axis::X],
            &[(&[1], 1.0), (&[1], 2.0)],
        );
        assert!(matches!(dup, Err(TableError::DuplicateCell(_))));
        let neg = StratifiedCountTable::complete(&[Axis::X], &[(&[1], 1.0), (&[0], -2.0)]);
        assert!(matches!(neg, Err(TableError::NegativeCount(_))));
        let zero = StratifiedCountTable::complete(&[Axis::X], &[(&[1], 0.0), (&[0], 0.0)]);
        assert!(matches!(zero, Err(TableError::AllZero)));
    }

    #[test]
    fn collapse_over_x_gives_y_margins() {
        let y = sids_table().collapse(Axis::X).unwrap();
        assert_eq!(y.axes(), &[Axis::Y]);
        assert_eq!(y.groups()[0].count(&[(Axis::Y, 1)]), Some(775.0));
        assert_eq!(y.groups()[0].count(&[(Axis::Y, 0)]), Some(797.0));
    }

    #[test]
    fn collapse_of_imputed_table_with_half_probabilities() {
        let mut cells = vec![];
        for (x, y, a) in [(1u8, 1u8, 173.0), (0, 1, 602.0), (1, 0, 134.0), (0, 0, 663.0)] {
            for t in [0u8, 1] {
                cells.push(RawCell::new(&[(Axis::T, t), (Axis::X, x), (Axis::Y, y)], a * 0.5));
            }
        }
        let txy = StratifiedCountTable::load(
            &[Axis::T, Axis::X, Axis::Y],
            &[RawGroup { latent: vec![], cells }],
        )
        .unwrap();
        let ty = txy.collapse(Axis::X).unwrap();
        let g = &ty.groups()[0];
        assert_eq!(g.count(&[(Axis::T, 1), (Axis::Y, 1)]), Some(387.5));
        assert_eq!(g.count(&[(Axis::T, 0), (Axis::Y, 1)]), Some(387.5));
        assert_eq!(g.count(&[(Axis::T, 1), (Axis::Y, 0)]), Some(398.5));
        assert_eq!(g.count(&[(Axis::T, 0), (Axis::Y, 0)]), Some(398.5));
        assert_eq!(ty.total(), txy.total());
    }

    #[test]
    fn collapse_latent_or_absent_axis_errors() {
        let t = StratifiedCountTable::load(
            &[Axis::T, Axis::X],
            &[RawGroup {
                latent: vec![Axis::T],
                cells: vec![RawCell::new(&[(Axis::X, 0)], 1.0), RawCell::new(&[(Axis::X, 1)], 2.0)],
            }],
        )
        .unwrap();
        assert_eq!(t.collapse(Axis::T), Err(TableError::AxisLatent(Axis::T)));
        assert_eq!(t.collapse(Axis::Y), Err(TableError::UnknownAxis(Axis::Y)));
        let x_only = t.collapse(Axis::X).unwrap();
        assert_eq!(x_only.total(), 3.0);
    }

    #[test]
    fn odds_ratio_and_se_for_sids_table() {
        let t = sids_table().two_by_two(Axis::Y, Axis::X).unwrap();
        assert_eq!(t, TwoByTwo::new(173.0, 602.0, 134.0, 663.0).unwrap());
        let or = t.odds_ratio(Continuity::None).unwrap();
        assert!((or - 1.42).abs() < 0.005);
        let se = t.wald_log_or_se().unwrap();
        assert!((se - 0.128).abs() < 0.0005);
        let (lo, hi) = t.wald_interval(0.95).unwrap();
        assert!((lo - 1.11).abs() < 0.005 && (hi - 1.83).abs() < 0.005);
    }

    #[test]
    fn odds_ratio_simple_cases() {
        let ones = TwoByTwo::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(ones.odds_ratio(Continuity::None).unwrap(), 1.0);
        let fours = TwoByTwo::new(4.0, 4.0, 4.0, 4.0).unwrap();
        assert_eq!(fours.wald_log_or_se().unwrap(), 1.0);
        let imputed = TwoByTwo::new(162.33, 612.67, 142.92, 654.08).unwrap();
        assert!((imputed.odds_ratio(Continuity::None).unwrap() - 1.21).abs() < 0.005);
    }

    #[test]
    fn zero_cell_needs_explicit_correction() {
        let t = TwoByTwo::new(0.0, 3.0, 2.0, 5.0).unwrap();
        assert_eq!(t.odds_ratio(Continuity::None), Err(TableError::ZeroCell));
        assert_eq!(t.wald_log_or_se(), Err(TableError::ZeroCell));
        let or = t.odds_ratio(Continuity::AddHalf).unwrap();
        assert!((or - 0.5 * 5.5 / (3.5 * 2.5)).abs() < 1e-15);
    }

    #[test]
    fn rename_and_pool() {
        let mixed = StratifiedCountTable::load(
            &[Axis::W, Axis::X],
            &[
                RawGroup {
                    latent: vec![],
                    cells: vec![
                        RawCell::new(&[(Axis::W, 1), (Axis::X, 1)], 3.0),
                        RawCell::new(&[(Axis::W, 0), (Axis::X, 1)], 1.0),
                        RawCell::new(&[(Axis::W, 1), (Axis::X, 0)], 2.0),
                        RawCell::new(&[(Axis::W, 0), (Axis::X, 0)], 4.0),
                    ],
                },
                RawGroup {
                    latent: vec![Axis::W],
                    cells: vec![RawCell::new(&[(Axis::X, 1)], 6.0), RawCell::new(&[(Axis::X, 0)], 7.0)],
                },
            ],
        )
        .unwrap();
        let renamed = mixed.rename_axis(Axis::W, Axis::T).unwrap();
        assert_eq!(renamed.axes(), &[Axis::T, Axis::X]);
        assert!(renamed.is_latent_anywhere(Axis::T));
        assert!(mixed.pool_groups().is_err());
        let x = renamed.groups()[0].clone();
        assert_eq!(x.count(&[(Axis::T, 1), (Axis::X, 0)]), Some(2.0));
    }
}
