//! Damped Newton ascent on smooth objectives with an analytic gradient and
//! a finite-difference Hessian, plus the profile-likelihood root search
//! built on it.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::fit::{FitError, FitOptions};
use crate::math::{abs, sqrt};

pub(crate) trait Smooth {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, FitError>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FitError>;
}

/// A term `-weight * |x[index] - at|` contained in the objective.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kink {
    pub index: usize,
    pub at: f64,
    pub weight: f64,
}

const KINK_BAND: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Coordinates held at a kink at the optimum.
    pub pinned: Vec<usize>,
    /// Negative Hessian over the unpinned coordinates at the optimum.
    pub information: DMatrix<f64>,
    pub active: Vec<usize>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// Effective ascent gradient with kinks resolved; returns pinned coordinates.
fn resolve_kinks(x: &mut [f64], g: &mut [f64], kinks: &[Kink]) -> Vec<usize> {
    let mut pinned = Vec::new();
    for k in kinks {
        if x[k.index] == k.at {
            let smooth = g[k.index];
            if abs(smooth) <= k.weight {
                pinned.push(k.index);
                g[k.index] = 0.0;
            } else {
                g[k.index] = smooth - k.weight * sign(smooth);
            }
        }
    }
    pinned
}

pub(crate) fn numeric_information(
    obj: &dyn Smooth,
    x: &[f64],
    active: &[usize],
    rel_step: f64,
) -> Result<DMatrix<f64>, FitError> {
    let m = active.len();
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut probe = x.to_vec();
    for (col, &j) in active.iter().enumerate() {
        let step = rel_step * 1f64.max(abs(x[j]));
        probe[j] = x[j] + step;
        let gp = obj.gradient(&probe)?;
        probe[j] = x[j] - step;
        let gm = obj.gradient(&probe)?;
        probe[j] = x[j];
        for (row, &i) in active.iter().enumerate() {
            h[(row, col)] = -(gp[i] - gm[i]) / (2.0 * step);
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    Ok(sym)
}

fn solve_damped(info: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = info.clone().cholesky() {
        return ch.solve(g);
    }
    let scale = info.diagonal().iter().fold(0.0f64, |a, v| a.max(abs(*v))).max(1e-12);
    let mut lambda = 1e-8 * scale;
    loop {
        let damped = info + DMatrix::<f64>::identity(info.nrows(), info.ncols()) * lambda;
        if let Some(ch) = damped.cholesky() {
            return ch.solve(g);
        }
        lambda *= 10.0;
        if lambda > 1e12 * scale {
            // Steepest ascent as a last resort.
            return g / scale;
        }
    }
}

pub(crate) fn maximize(
    obj: &dyn Smooth,
    start: &[f64],
    kinks: &[Kink],
    opts: &FitOptions,
) -> Result<Outcome, FitError> {
    let n = obj.dim();
    let mut x = start.to_vec();
    let mut iterations = 0;
    loop {
        for k in kinks {
            if abs(x[k.index] - k.at) < KINK_BAND {
                x[k.index] = k.at;
            }
        }
        let mut g = obj.gradient(&x)?;
        let pinned = resolve_kinks(&mut x, &mut g, kinks);
        let active: Vec<usize> = (0..n).filter(|i| !pinned.contains(i)).collect();
        let gmax = active.iter().fold(0.0f64, |a, &i| a.max(abs(g[i])));
        if !gmax.is_finite() {
            return Err(FitError::NonFinite);
        }
        let converged_by_gradient = gmax < opts.gradient_tol;
        if converged_by_gradient || active.is_empty() {
            return finish(obj, x, gmax, iterations, pinned, active, opts);
        }
        if iterations >= opts.max_iterations {
            return Err(FitError::NonConvergence { iterations, gradient_norm: gmax });
        }
        iterations += 1;

        let info = numeric_information(obj, &x, &active, opts.hessian_step)?;
        let gv = DVector::from_iterator(active.len(), active.iter().map(|&i| g[i]));
        let dir = solve_damped(&info, &gv);
        let f0 = obj.value(&x)?;
        let slack = 1e-13 * 1f64.max(abs(f0));
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = x.clone();
            for (k, &i) in active.iter().enumerate() {
                cand[i] = x[i] + alpha * dir[k];
            }
            for kink in kinks {
                let (old, new) = (x[kink.index] - kink.at, cand[kink.index] - kink.at);
                if old != 0.0 && sign(old) != sign(new) {
                    cand[kink.index] = kink.at;
                }
            }
            if let Ok(f) = obj.value(&cand) {
                if f.is_finite() && f >= f0 - slack {
                    accepted = Some(cand);
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else {
            if gmax < 1e3 * opts.gradient_tol {
                return finish(obj, x, gmax, iterations, pinned, active, opts);
            }
            return Err(FitError::NonConvergence { iterations, gradient_norm: gmax });
        };
        let step = x.iter().zip(&next).fold(0.0f64, |a, (p, q)| a.max(abs(p - q)));
        x = next;
        if step < opts.step_tol {
            let mut g = obj.gradient(&x)?;
            let pinned = resolve_kinks(&mut x, &mut g, kinks);
            let active: Vec<usize> = (0..n).filter(|i| !pinned.contains(i)).collect();
            let gmax = active.iter().fold(0.0f64, |a, &i| a.max(abs(g[i])));
            return finish(obj, x, gmax, iterations, pinned, active, opts);
        }
    }
}

fn finish(
    obj: &dyn Smooth,
    x: Vec<f64>,
    gradient_norm: f64,
    iterations: usize,
    pinned: Vec<usize>,
    active: Vec<usize>,
    opts: &FitOptions,
) -> Result<Outcome, FitError> {
    let information = numeric_information(obj, &x, &active, opts.hessian_step)?;
    let value = obj.value(&x)?;
    Ok(Outcome { x, value, gradient_norm, iterations, pinned, information, active })
}

/// Eigen check on the diagonally scaled negative Hessian, so that a very
/// tight prior on one coefficient does not mask or fake a flat direction.
/// On failure returns the smallest scaled eigenvalue and the coordinate
/// dominating its eigenvector.
pub(crate) fn check_definite(info: &DMatrix<f64>) -> Result<(), (f64, usize)> {
    let n = info.nrows();
    if n == 0 {
        return Ok(());
    }
    let diag: Vec<f64> = (0..n).map(|i| info[(i, i)]).collect();
    let max_diag = diag.iter().fold(0.0f64, |a, &v| a.max(v));
    if let Some(i) = (0..n).find(|&i| !(diag[i] > 1e-10 * max_diag) || !diag[i].is_finite()) {
        return Err((diag[i], i));
    }
    let scale: Vec<f64> = diag.iter().map(|&v| 1.0 / sqrt(v)).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| info[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled);
    let (mut min_i, mut min_v) = (0, f64::INFINITY);
    let mut max_v = 0.0f64;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < min_v {
            min_v = v;
            min_i = i;
        }
        max_v = max_v.max(abs(v));
    }
    if min_v > 1e-8 * max_v {
        return Ok(());
    }
    let vec = eig.eigenvectors.column(min_i);
    let dominant = (0..vec.len())
        .max_by(|&a, &b| abs(vec[a]).partial_cmp(&abs(vec[b])).unwrap())
        .unwrap_or(0);
    Err((min_v, dominant))
}

pub(crate) fn invert(info: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    info.clone().cholesky().map(|c| c.inverse())
}

/// Numerical gradient of a scalar functional by central differences.
pub(crate) fn functional_gradient(
    f: &dyn Fn(&[f64]) -> Result<f64, FitError>,
    x: &[f64],
    coords: &[usize],
) -> Result<Vec<f64>, FitError> {
    let mut probe = x.to_vec();
    let mut out = vec![0.0; coords.len()];
    for (k, &j) in coords.iter().enumerate() {
        let step = 1e-6 * 1f64.max(abs(x[j]));
        probe[j] = x[j] + step;
        let up = f(&probe)?;
        probe[j] = x[j] - step;
        let down = f(&probe)?;
        probe[j] = x[j];
        out[k] = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// Objective restricted to `f(x) = target` by solving for one pivot
/// coordinate; the free coordinates are all others.
struct Restricted<'a> {
    inner: &'a dyn Smooth,
    functional: &'a dyn Fn(&[f64]) -> Result<f64, FitError>,
    pivot: usize,
    target: f64,
    anchor: Vec<f64>,
}

impl Restricted<'_> {
    fn embed(&self, y: &[f64]) -> Result<Vec<f64>, FitError> {
        let mut x = Vec::with_capacity(self.anchor.len());
        let mut it = y.iter();
        for i in 0..self.anchor.len() {
            if i == self.pivot {
                x.push(self.anchor[i]);
            } else {
                x.push(*it.next().unwrap());
            }
        }
        // 1-D Newton on the pivot with a numeric slope.
        for _ in 0..100 {
            let gap = (self.functional)(&x)? - self.target;
            if abs(gap) < 1e-13 * 1f64.max(abs(self.target)) {
                return Ok(x);
            }
            let slope = functional_gradient(self.functional, &x, &[self.pivot])?[0];
            if slope == 0.0 || !slope.is_finite() {
                return Err(FitError::ProfileFailed("functional is flat in its pivot coefficient"));
            }
            x[self.pivot] -= gap / slope;
        }
        Err(FitError::ProfileFailed("could not solve the functional constraint"))
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .filter(|(i, _)| *i != self.pivot)
            .map(|(_, v)| *v)
            .collect()
    }
}

impl Smooth for Restricted<'_> {
    fn dim(&self) -> usize {
        self.anchor.len() - 1
    }

    fn value(&self, y: &[f64]) -> Result<f64, FitError> {
        self.inner.value(&self.embed(y)?)
    }

    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>, FitError> {
        let x = self.embed(y)?;
        let g = self.inner.gradient(&x)?;
        let all: Vec<usize> = (0..x.len()).collect();
        let dg = functional_gradient(self.functional, &x, &all)?;
        let ratio = g[self.pivot] / dg[self.pivot];
        Ok((0..x.len()).filter(|&i| i != self.pivot).map(|i| g[i] - ratio * dg[i]).collect())
    }
}

/// Profile interval endpoints on the functional scale: where the signed
/// root of `2 (max - profile)` crosses `-z` and `+z`.
pub(crate) fn profile_bounds(
    obj: &dyn Smooth,
    functional: &dyn Fn(&[f64]) -> Result<f64, FitError>,
    xhat: &[f64],
    fhat: f64,
    se: f64,
    z: f64,
    opts: &FitOptions,
) -> Result<(f64, f64), FitError> {
    let psi_hat = functional(xhat)?;
    let all: Vec<usize> = (0..xhat.len()).collect();
    let dg = functional_gradient(functional, xhat, &all)?;
    let pivot = (0..dg.len())
        .max_by(|&a, &b| abs(dg[a]).partial_cmp(&abs(dg[b])).unwrap())
        .ok_or(FitError::NoFreeCoefficients)?;
    if dg[pivot] == 0.0 {
        return Err(FitError::ProfileFailed("functional does not depend on any free coefficient"));
    }
    if !(se > 0.0) {
        return Err(FitError::ProfileFailed("zero Wald standard error"));
    }

    let signed_root = |psi: f64, warm: &mut Vec<f64>| -> Result<f64, FitError> {
        let restricted = Restricted { inner: obj, functional, pivot, target: psi, anchor: warm.clone() };
        let start = restricted.project(warm);
        let out = maximize(&restricted, &start, &[], opts)?;
        let full = restricted.embed(&out.x)?;
        *warm = full;
        let drop = (fhat - out.value).max(0.0);
        Ok(sign(psi - psi_hat) * sqrt(2.0 * drop))
    };

    let mut bounds = [0.0; 2];
    for (k, dir) in [-1.0f64, 1.0].into_iter().enumerate() {
        let target = dir * z;
        let far = psi_hat + dir * 10.0 * se;
        let mut warm = xhat.to_vec();
        let r_far = signed_root(far, &mut warm)?;
        if dir * r_far < z {
            return Err(FitError::ProfileBracket);
        }
        let (mut inner, mut outer) = (psi_hat, far);
        let mut warm_inner = xhat.to_vec();
        for _ in 0..200 {
            if abs(outer - inner) <= 1e-9 * se {
                break;
            }
            let mid = 0.5 * (inner + outer);
            let mut w = warm_inner.clone();
            let r = signed_root(mid, &mut w)?;
            if dir * (r - target) < 0.0 {
                inner = mid;
                warm_inner = w;
            } else {
                outer = mid;
            }
        }
        bounds[k] = 0.5 * (inner + outer);
    }
    Ok((bounds[0], bounds[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: [f64; 2],
        precision: [[f64; 2]; 2],
    }

    impl Smooth for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> Result<f64, FitError> {
            let d = [x[0] - self.center[0], x[1] - self.center[1]];
            let p = &self.precision;
            Ok(-0.5 * (d[0] * (p[0][0] * d[0] + p[0][1] * d[1]) + d[1] * (p[1][0] * d[0] + p[1][1] * d[1])))
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FitError> {
            let d = [x[0] - self.center[0], x[1] - self.center[1]];
            let p = &self.precision;
            Ok(vec![-(p[0][0] * d[0] + p[0][1] * d[1]), -(p[1][0] * d[0] + p[1][1] * d[1])])
        }
    }

    #[test]
    fn newton_solves_quadratic_in_one_step() {
        let q = Quadratic { center: [1.0, -2.0], precision: [[2.0, 0.5], [0.5, 1.0]] };
        let out = maximize(&q, &[0.0, 0.0], &[], &FitOptions::default()).unwrap();
        assert!(out.iterations <= 2);
        assert!((out.x[0] - 1.0).abs() < 1e-10 && (out.x[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn profile_equals_wald_for_quadratic() {
        let q = Quadratic { center: [1.0, -2.0], precision: [[2.0, 0.5], [0.5, 1.0]] };
        let opts = FitOptions::default();
        let out = maximize(&q, &[0.0, 0.0], &[], &opts).unwrap();
        let cov = invert(&out.information).unwrap();
        let se = sqrt(cov[(0, 0)]);
        let f = |x: &[f64]| -> Result<f64, FitError> { Ok(x[0]) };
        let z = 1.959_963_984_540_054;
        let (lo, hi) = profile_bounds(&q, &f, &out.x, out.value, se, z, &opts).unwrap();
        assert!((lo - (1.0 - z * se)).abs() < 1e-7, "{lo}");
        assert!((hi - (1.0 + z * se)).abs() < 1e-7, "{hi}");
    }

    struct Lasso;
    impl Smooth for Lasso {
        fn dim(&self) -> usize {
            1
        }
        // -(x - 0.3)^2 / 2 - 2 |x|: optimum pinned at 0.
        fn value(&self, x: &[f64]) -> Result<f64, FitError> {
            Ok(-(x[0] - 0.3) * (x[0] - 0.3) / 2.0 - 2.0 * abs(x[0]))
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FitError> {
            Ok(vec![-(x[0] - 0.3) - 2.0 * sign(x[0])])
        }
    }

    #[test]
    fn kink_pins_coordinate() {
        let kinks = [Kink { index: 0, at: 0.0, weight: 2.0 }];
        let out = maximize(&Lasso, &[1.5], &kinks, &FitOptions::default()).unwrap();
        assert_eq!(out.x[0], 0.0);
        assert_eq!(out.pinned, vec![0]);
    }

    #[test]
    fn definiteness_check_flags_flat_direction() {
        let flat = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(check_definite(&flat).is_err());
        let good = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(check_definite(&good).is_ok());
    }
}
