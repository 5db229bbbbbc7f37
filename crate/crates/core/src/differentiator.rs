//! Stable differentiation of noisy samples of `g = Au`.
//!
//! For `a > 1` the regularizer is a central difference of half-width `h` in
//! the interior and a one-sided difference within `h` of either endpoint, with
//! `h` chosen to minimize `delta/h + M h^(a-1)`. That same expression is the
//! certified bound returned alongside the reconstruction.

use crate::error::{Error, Result};
use crate::grid::{check_positive, GridFunction, HolderParams, NoisyData};

/// Largest step allowed by the step rule; keeps both one-sided zones and an
/// interior zone on `[0, 1]`.
pub const MAX_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerOutput {
    pub u_delta: GridFunction,
    /// Step length actually used; an exact multiple of the grid spacing.
    pub h_used: f64,
    /// `h_used` in grid nodes.
    pub step_nodes: usize,
    /// Certified bound `delta / h_used + M h_used^(a-1)` on the central zone
    /// `h <= x <= 1 - h`.
    pub eta: f64,
    /// Bound for the one-sided zones: `2 delta / h_used + M h_used / 2`.
    /// A forward difference sees the full `2 delta` swing of the noise, and its
    /// consistency error is controlled by `sup|v'| <= M` rather than by the
    /// Hölder seminorm of `v'`.
    pub endpoint_bound: f64,
}

impl RegularizerOutput {
    /// `max(eta, endpoint_bound)`: holds at every node for every `v` in the class.
    pub fn uniform_bound(&self) -> f64 {
        self.eta.max(self.endpoint_bound)
    }

    /// Nodes where the central difference was used.
    pub fn central_nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.step_nodes..=self.u_delta.len() - 1 - self.step_nodes
    }
}

fn require_smooth_regime(params: &HolderParams) -> Result<()> {
    if params.a > 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentTooSmall(params.a))
    }
}

/// Unclipped minimizer of `delta/h + M h^(a-1)`: `(delta / ((a-1) M))^(1/a)`.
pub fn optimal_step(delta: f64, params: &HolderParams) -> Result<f64> {
    require_smooth_regime(params)?;
    check_positive("delta", delta)?;
    Ok((delta / ((params.a - 1.0) * params.m)).powf(1.0 / params.a))
}

/// [`optimal_step`] clamped to `[min_step, MAX_STEP]`, where `min_step` is the
/// spacing of the data grid.
pub fn step_size(delta: f64, params: &HolderParams, min_step: f64) -> Result<f64> {
    let raw = optimal_step(delta, params)?;
    check_positive("grid spacing", min_step)?;
    if min_step > MAX_STEP {
        return Err(Error::GridTooCoarse(format!(
            "spacing {min_step} exceeds the maximum step {MAX_STEP}"
        )));
    }
    Ok(raw.clamp(min_step, MAX_STEP))
}

/// Number of grid spacings in `h`, or an error if `h` is off the lattice.
fn lattice_steps(h: f64, n: usize) -> Result<usize> {
    let spacing = 1.0 / (n - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::NonPositive { name: "h", value: h });
    }
    if h > 0.5 {
        return Err(Error::StepTooLarge(h));
    }
    let steps = (h / spacing).round();
    if steps < 1.0 || (steps * spacing - h).abs() > 1e-9 * spacing {
        return Err(Error::OffLattice { h, spacing });
    }
    Ok(steps as usize)
}

/// Applies the difference regularizer with half-width `h` to the data.
pub fn differentiate(data: &NoisyData, h: f64) -> Result<GridFunction> {
    let g = data.g_delta.values();
    let n = g.len();
    let m = lattice_steps(h, n)?;
    differentiate_nodes(g, m)
}

fn differentiate_nodes(g: &[f64], m: usize) -> Result<GridFunction> {
    let n = g.len();
    let h = m as f64 / (n - 1) as f64;
    let out = (0..n)
        .map(|k| {
            if k < m {
                (g[k + m] - g[k]) / h
            } else if k + m > n - 1 {
                (g[k] - g[k - m]) / h
            } else {
                (g[k + m] - g[k - m]) / (2.0 * h)
            }
        })
        .collect();
    GridFunction::new(out)
}

/// `delta / h + M h^(a-1)`.
pub fn error_bound(delta: f64, params: &HolderParams, h: f64) -> Result<f64> {
    require_smooth_regime(params)?;
    check_positive("delta", delta)?;
    check_positive("h", h)?;
    Ok(delta / h + params.m * h.powf(params.a - 1.0))
}

/// [`step_size`] on an `n`-node grid, snapped to the nearest positive
/// multiple of the spacing and returned as a count of spacings.
pub fn step_nodes(delta: f64, params: &HolderParams, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    let spacing = 1.0 / (n - 1) as f64;
    let h = step_size(delta, params, spacing)?;
    Ok(((h / spacing).round() as usize).max(1))
}

/// Step rule, lattice snapping, differentiation and certified bound in one call.
pub fn regularize(data: &NoisyData, params: &HolderParams) -> Result<RegularizerOutput> {
    require_smooth_regime(params)?;
    let n = data.g_delta.len();
    let spacing = data.g_delta.spacing();
    if spacing > MAX_STEP {
        return Err(Error::GridTooCoarse(format!(
            "{n} nodes give spacing {spacing} > {MAX_STEP}"
        )));
    }
    let step_nodes = step_nodes(data.delta, params, n)?;
    let h_used = step_nodes as f64 / (n - 1) as f64;
    let u_delta = differentiate_nodes(data.g_delta.values(), step_nodes)?;
    let eta = error_bound(data.delta, params, h_used)?;
    let endpoint_bound = 2.0 * data.delta / h_used + params.m * h_used / 2.0;
    Ok(RegularizerOutput {
        u_delta,
        h_used,
        step_nodes,
        eta,
        endpoint_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{add_noise, integrate, NoiseModel};
    use std::f64::consts::PI;

    fn scan_minimizer(delta: f64, a: f64, m: f64) -> f64 {
        // fine log-spaced scan of the bound over h
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200_000 {
            let h = 10f64.powf(-6.0 + 6.0 * i as f64 / 200_000.0);
            let v = delta / h + m * h.powf(a - 1.0);
            if v < best.0 {
                best = (v, h);
            }
        }
        best.1
    }

    #[test]
    fn step_size_examples() {
        let p = HolderParams::new(2.0, 1.0).unwrap();
        let h = step_size(1e-4, &p, 1e-3).unwrap();
        assert!((h - 0.01).abs() < 1e-15);
        assert!((scan_minimizer(1e-4, 2.0, 1.0) - 0.01).abs() < 1e-6);

        let p = HolderParams::new(2.0, 4.0).unwrap();
        assert!((step_size(4e-4, &p, 1e-3).unwrap() - 0.01).abs() < 1e-15);
        assert!((scan_minimizer(4e-4, 2.0, 4.0) - 0.01).abs() < 1e-6);

        let p = HolderParams::new(1.5, 0.001).unwrap();
        let raw = optimal_step(0.1, &p).unwrap();
        assert!((raw - 200f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((raw - 34.2).abs() < 0.05);
        assert_eq!(step_size(0.1, &p, 1e-3).unwrap(), 0.25);
    }

    #[test]
    fn step_size_rejects() {
        let lip = HolderParams::new(1.0, 1.0).unwrap();
        assert!(matches!(step_size(1e-3, &lip, 0.01), Err(Error::ExponentTooSmall(_))));
        let p = HolderParams::new(2.0, 1.0).unwrap();
        assert!(matches!(step_size(0.0, &p, 0.01), Err(Error::NonPositive { .. })));
        assert!(matches!(step_size(1e-3, &p, 0.5), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn step_is_stationary() {
        for (delta, a, m) in [(1e-4, 2.0, 1.0), (1e-3, 1.5, 2.0), (1e-6, 1.2, 0.5)] {
            let p = HolderParams::new(a, m).unwrap();
            let h = optimal_step(delta, &p).unwrap();
            let f = |h: f64| delta / h + m * h.powf(a - 1.0);
            assert!(f(h * 1.01) > f(h));
            assert!(f(h * 0.99) > f(h));
        }
    }

    #[test]
    fn differentiate_examples() {
        let g = GridFunction::from_fn(101, |x| x * x / 2.0).unwrap();
        let d = NoisyData::new(g, 1e-9).unwrap();
        let out = differentiate(&d, 0.1).unwrap();
        assert!((out.values()[50] - 0.5).abs() < 1e-14);

        let c = NoisyData::new(GridFunction::new(vec![3.25; 21]).unwrap(), 0.1).unwrap();
        let out = differentiate(&c, 0.1).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));

        let s = GridFunction::from_fn(101, |x| (2.0 * PI * x).sin()).unwrap();
        let d = NoisyData::new(s, 1e-9).unwrap();
        let out = differentiate(&d, 0.01).unwrap();
        let expected = (PI).cos() * (2.0 * PI * 0.01).sin() / 0.01;
        let direct = ((2.0 * PI * 0.51).sin() - (2.0 * PI * 0.49).sin()) / 0.02;
        assert!((expected - direct).abs() < 1e-12);
        assert!((out.values()[50] - expected).abs() < 1e-12);
        assert!((out.values()[50] - -6.27905).abs() < 5e-6);
    }

    #[test]
    fn differentiate_zones() {
        let g = GridFunction::from_fn(11, |x| x * x * x).unwrap();
        let d = NoisyData::new(g.clone(), 1e-3).unwrap();
        let out = differentiate(&d, 0.2).unwrap();
        let v = g.values();
        assert!((out.values()[0] - (v[2] - v[0]) / 0.2).abs() < 1e-12);
        assert!((out.values()[1] - (v[3] - v[1]) / 0.2).abs() < 1e-12);
        assert!((out.values()[2] - (v[4] - v[0]) / 0.4).abs() < 1e-12);
        assert!((out.values()[8] - (v[10] - v[6]) / 0.4).abs() < 1e-12);
        assert!((out.values()[9] - (v[9] - v[7]) / 0.2).abs() < 1e-12);
        assert!((out.values()[10] - (v[10] - v[8]) / 0.2).abs() < 1e-12);
    }

    #[test]
    fn differentiate_rejects() {
        let d = NoisyData::new(GridFunction::zeros(11).unwrap(), 0.1).unwrap();
        assert!(matches!(differentiate(&d, 0.15), Err(Error::OffLattice { .. })));
        assert!(matches!(differentiate(&d, 0.6), Err(Error::StepTooLarge(_))));
        assert!(matches!(differentiate(&d, 0.0), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn error_bound_examples() {
        let p = HolderParams::new(2.0, 1.0).unwrap();
        assert!((error_bound(1e-4, &p, 0.01).unwrap() - 0.02).abs() < 1e-15);
        assert!((error_bound(1e-2, &p, 0.1).unwrap() - 0.2).abs() < 1e-15);
        let tiny = HolderParams::new(2.0, 1e-300).unwrap();
        assert!((error_bound(0.3, &tiny, 0.1).unwrap() - 3.0).abs() < 1e-12);
        assert!(error_bound(1e-2, &p, 0.0).is_err());
        assert!(error_bound(-1e-2, &p, 0.1).is_err());
    }

    #[test]
    fn regularize_quadratic_exact() {
        let g = GridFunction::from_fn(1001, |x| x * x / 2.0).unwrap();
        let d = NoisyData::new(g, 1e-6).unwrap();
        let p = HolderParams::new(2.0, 1.0).unwrap();
        let out = regularize(&d, &p).unwrap();
        assert_eq!(out.step_nodes, 1);
        let m = out.step_nodes;
        for k in m..=1000 - m {
            assert!((out.u_delta.values()[k] - out.u_delta.node(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn regularize_alternating_is_bounded() {
        let z = GridFunction::zeros(1001).unwrap();
        let d = add_noise(&z, 1e-4, NoiseModel::Alternating, 0).unwrap();
        let p = HolderParams::new(2.0, 1.0).unwrap();
        let out = regularize(&d, &p).unwrap();
        let m = out.step_nodes;
        for k in m..=1000 - m {
            assert!(out.u_delta.values()[k].abs() <= 1e-4 / out.h_used);
        }
    }

    #[test]
    fn regularize_linear_truth_within_eta() {
        let u = GridFunction::from_fn(1001, |x| x).unwrap();
        let g = integrate(&u);
        let d = add_noise(&g, 1e-4, NoiseModel::UniformIid, 11).unwrap();
        let p = HolderParams::new(2.0, 1.0).unwrap();
        let out = regularize(&d, &p).unwrap();
        assert!((out.h_used - 0.01).abs() < 1e-15);
        assert!((out.eta - 0.02).abs() < 1e-12);
        let err = out.u_delta.sub(&u).unwrap();
        let central = out.central_nodes();
        let interior = err.values()[central].iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        assert!(interior <= out.eta);
        // sup|u'| = 1 here, so the one-sided zones obey 2 delta/h + h/2
        assert!(err.sup_norm() <= 2.0 * 1e-4 / out.h_used + out.h_used / 2.0);
    }

    #[test]
    fn regularize_rejects_coarse_grid_and_low_exponent() {
        let d = NoisyData::new(GridFunction::zeros(4).unwrap(), 0.1).unwrap();
        let p = HolderParams::new(2.0, 1.0).unwrap();
        assert!(matches!(regularize(&d, &p), Err(Error::GridTooCoarse(_))));
        let d = NoisyData::new(GridFunction::zeros(101).unwrap(), 0.1).unwrap();
        let lip = HolderParams::new(1.0, 1.0).unwrap();
        assert!(matches!(regularize(&d, &lip), Err(Error::ExponentTooSmall(_))));
    }
}
