//! Sampled functions on the uniform grid over `[0, 1]`.
//!
//! A [`GridFunction`] holds `n >= 2` node values; node `k` sits at
//! `x_k = k / (n - 1)`. Between nodes the function is read as piecewise
//! linear, which makes the trapezoid integral in [`integrate`] exact for the
//! representation.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::{format_float, seeded_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Samples `f` at the `n` grid nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(node_position(k, n))).collect())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        node_position(k, self.values.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    pub fn holder_norm(&self, a: f64) -> Result<f64> {
        discrete_holder_norm(self, a)
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }

    /// `self + scale * other`, node-wise.
    pub fn axpy(&self, scale: f64, other: &GridFunction) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| factor * v).collect())
    }

    /// `sup_k |self_k - other_k|`.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(max_abs_diff(&self.values, &other.values))
    }

    /// Writes the `x,value` CSV form, one row per node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", format_float(self.node(k)), format_float(*v));
        }
        s
    }

    /// Parses the `x,value` CSV form. Lines starting with `#` are skipped.
    /// The `x` column must match the uniform grid implied by the row count.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        let mut saw_header = false;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !saw_header {
                if trimmed != "x,value" {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected header `x,value`, found `{trimmed}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let mut fields = trimmed.split(',');
            let (Some(x), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected two columns".into(),
                });
            };
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad number `{s}`: {e}"),
                })
            };
            rows.push((lineno, parse(x)?, parse(v)?));
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 0,
                msg: "missing header `x,value`".into(),
            });
        }
        let n = rows.len();
        if n < 2 {
            return Err(Error::TooFewNodes { min: 2, got: n });
        }
        let tol = 1e-9 / (n - 1) as f64;
        for (k, (lineno, x, _)) in rows.iter().enumerate() {
            if (x - node_position(k, n)).abs() > tol {
                return Err(Error::Parse {
                    line: *lineno,
                    msg: format!("x = {x} is not node {k} of a uniform {n}-node grid"),
                });
            }
        }
        Self::new(rows.into_iter().map(|(_, _, v)| v).collect())
    }
}

/// Position of node `k` on an `n`-node grid: `k / (n - 1)`, correctly rounded.
pub fn node_position(k: usize, n: usize) -> f64 {
    k as f64 / (n - 1) as f64
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// A-priori smoothness class `{v : ||v||_a <= m}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderParams {
    pub a: f64,
    pub m: f64,
}

impl HolderParams {
    pub fn new(a: f64, m: f64) -> Result<Self> {
        check_exponent(a)?;
        check_positive("M", m)?;
        Ok(Self { a, m })
    }
}

/// Observed data `g_delta` with its noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    pub g_delta: GridFunction,
    pub delta: f64,
}

impl NoisyData {
    pub fn new(g_delta: GridFunction, delta: f64) -> Result<Self> {
        check_positive("delta", delta)?;
        Ok(Self { g_delta, delta })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

fn check_exponent(a: f64) -> Result<()> {
    if a > 0.0 && a <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(a))
    }
}

pub fn sup_norm(f: &GridFunction) -> f64 {
    max_abs(&f.values)
}

/// Discrete Hölder norm.
///
/// For `a <= 1`: `max|f_i| + max_{i != j} |f_i - f_j| / |x_i - x_j|^a`.
/// For `1 < a <= 2`, with forward slopes `s_i = (f_{i+1} - f_i) / Δ` placed at
/// `x_i`: `max|f_i| + max|s_i| + max_{i != j} |s_i - s_j| / |x_i - x_j|^(a-1)`.
pub fn discrete_holder_norm(f: &GridFunction, a: f64) -> Result<f64> {
    check_exponent(a)?;
    if f.len() < 3 {
        return Err(Error::TooFewNodes {
            min: 3,
            got: f.len(),
        });
    }
    let spacing = f.spacing();
    let sup = max_abs(&f.values);
    if a <= 1.0 {
        return Ok(sup + holder_seminorm(&f.values, spacing, a));
    }
    let slopes = forward_slopes(&f.values, spacing);
    Ok(sup + max_abs(&slopes) + holder_seminorm(&slopes, spacing, a - 1.0))
}

pub(crate) fn forward_slopes(values: &[f64], spacing: f64) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]) / spacing).collect()
}

/// `max_{i<j} |f_j - f_i| / ((j - i) Δ)^beta` over equally spaced samples.
///
/// Exact. Lag `d` is skipped once `range(f) / (dΔ)^beta` cannot beat the
/// running maximum; for `beta = 1` only lag 1 is needed, since a difference
/// quotient over a longer lag is a mean of lag-1 quotients.
pub(crate) fn holder_seminorm(f: &[f64], spacing: f64, beta: f64) -> f64 {
    holder_seminorm_argmax(f, spacing, beta).0
}

/// [`holder_seminorm`] together with a maximizing pair `(i, j)`, `i < j`.
pub(crate) fn holder_seminorm_argmax(f: &[f64], spacing: f64, beta: f64) -> (f64, usize, usize) {
    if f.len() < 2 {
        return (0.0, 0, 0);
    }
    let max_lag = if beta == 1.0 { 1 } else { f.len() - 1 };
    let (lo, hi) = f
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let mut best = (0.0_f64, 0, 1);
    for lag in 1..=max_lag {
        let denom = (lag as f64 * spacing).powf(beta);
        if range / denom <= best.0 {
            break;
        }
        for i in 0..f.len() - lag {
            let q = (f[i + lag] - f[i]).abs() / denom;
            if q > best.0 {
                best = (q, i, i + lag);
            }
        }
    }
    best
}

/// `(Av)(x_k) = ∫_0^{x_k} v(s) ds` by the cumulative trapezoid rule.
pub fn integrate(v: &GridFunction) -> GridFunction {
    GridFunction {
        values: integrate_values(&v.values),
    }
}

pub(crate) fn integrate_values(v: &[f64]) -> Vec<f64> {
    let half = 0.5 / (v.len() - 1) as f64;
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in v.windows(2) {
        acc += half * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Independent draws from `[-delta, delta]`.
    UniformIid,
    /// `(-1)^k delta`.
    Alternating,
    /// `(-1)^floor(k / (2 step_nodes)) delta`: alternates at distance
    /// `2 step_nodes`, so a central difference with half-width
    /// `step_nodes` nodes sees `±2 delta` at every interior node.
    StencilWorstCase { step_nodes: usize },
}

/// Perturbs `g` within the sup-norm ball of radius `delta`.
///
/// Uniform draws come from ChaCha8 seeded with `seed` (stream 0). The ball
/// constraint is enforced on the stored floating-point values.
pub fn add_noise(g: &GridFunction, delta: f64, model: NoiseModel, seed: u64) -> Result<NoisyData> {
    check_positive("delta", delta)?;
    let perturbation: Vec<f64> = match model {
        NoiseModel::UniformIid => {
            let mut rng = seeded_rng(seed, 0);
            (0..g.len()).map(|_| rng.gen_range(-delta..=delta)).collect()
        }
        NoiseModel::Alternating => (0..g.len())
            .map(|k| if k % 2 == 0 { delta } else { -delta })
            .collect(),
        NoiseModel::StencilWorstCase { step_nodes } => {
            let block = 2 * step_nodes.max(1);
            (0..g.len())
                .map(|k| if (k / block) % 2 == 0 { delta } else { -delta })
                .collect()
        }
    };
    let values = g
        .values
        .iter()
        .zip(&perturbation)
        .map(|(&base, &e)| within_ball(base, base + e, delta))
        .collect();
    NoisyData::new(GridFunction::new(values)?, delta)
}

/// Steps `y` toward `center` one ulp at a time until `|y - center| <= radius`.
pub(crate) fn within_ball(center: f64, mut y: f64, radius: f64) -> f64 {
    while (y - center).abs() > radius {
        y = if y > center { y.next_down() } else { y.next_up() };
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute_holder(f: &[f64], a: f64) -> f64 {
        let n = f.len();
        let dx = 1.0 / (n - 1) as f64;
        let pairs = |g: &[f64], beta: f64| {
            let mut best = 0.0_f64;
            for i in 0..g.len() {
                for j in 0..g.len() {
                    if i != j {
                        let d = ((i as f64 - j as f64).abs() * dx).powf(beta);
                        best = best.max((g[i] - g[j]).abs() / d);
                    }
                }
            }
            best
        };
        let sup = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if a <= 1.0 {
            sup + pairs(f, a)
        } else {
            let s: Vec<f64> = (0..n - 1).map(|i| (f[i + 1] - f[i]) / dx).collect();
            let smax = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            sup + smax + pairs(&s, a - 1.0)
        }
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(GridFunction::zeros(11).unwrap().sup_norm(), 0.0);
        assert_eq!(GridFunction::from_fn(11, |x| x).unwrap().sup_norm(), 1.0);
        let s = GridFunction::from_fn(101, |x| (2.0 * PI * x).sin()).unwrap();
        assert!((s.sup_norm() - 1.0).abs() <= 1.3e-3);
    }

    #[test]
    fn holder_norm_examples() {
        let c = GridFunction::new(vec![-0.7; 9]).unwrap();
        assert!((discrete_holder_norm(&c, 1.0).unwrap() - 0.7).abs() < 1e-15);
        let id = GridFunction::from_fn(11, |x| x).unwrap();
        assert!((discrete_holder_norm(&id, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((brute_holder(id.values(), 1.0) - 2.0).abs() < 1e-12);
        assert!((discrete_holder_norm(&id, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((brute_holder(id.values(), 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn holder_norm_matches_pair_scan() {
        let f = GridFunction::from_fn(23, |x| (7.0 * x).sin() + 0.3 * (x - 0.4).abs()).unwrap();
        for a in [0.2, 0.5, 1.0, 1.3, 1.5, 2.0] {
            let fast = discrete_holder_norm(&f, a).unwrap();
            let slow = brute_holder(f.values(), a);
            assert!((fast - slow).abs() <= 1e-12 * slow, "a={a}: {fast} vs {slow}");
        }
    }

    #[test]
    fn holder_rejects_bad_inputs() {
        let f = GridFunction::from_fn(5, |x| x).unwrap();
        assert!(matches!(discrete_holder_norm(&f, 0.0), Err(Error::InvalidExponent(_))));
        assert!(matches!(discrete_holder_norm(&f, 2.5), Err(Error::InvalidExponent(_))));
        let two = GridFunction::from_fn(2, |x| x).unwrap();
        assert!(matches!(
            discrete_holder_norm(&two, 1.0),
            Err(Error::TooFewNodes { min: 3, .. })
        ));
    }

    #[test]
    fn integrate_examples() {
        let one = GridFunction::new(vec![1.0; 11]).unwrap();
        let a1 = integrate(&one);
        for k in 0..11 {
            assert!((a1.values()[k] - one.node(k)).abs() < 1e-15);
        }
        let id = GridFunction::from_fn(11, |x| x).unwrap();
        let a2 = integrate(&id);
        for k in 0..11 {
            let x = id.node(k);
            assert!((a2.values()[k] - x * x / 2.0).abs() < 1e-15);
        }
        let s = GridFunction::from_fn(101, |x| (2.0 * PI * x).sin()).unwrap();
        let a3 = integrate(&s);
        assert!(a3.values()[100].abs() < 1e-3);
        for k in 0..101 {
            let x = s.node(k);
            let exact = (1.0 - (2.0 * PI * x).cos()) / (2.0 * PI);
            assert!((a3.values()[k] - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn noise_examples() {
        let g = GridFunction::from_fn(21, |x| x * x).unwrap();
        let alt = add_noise(&g, 0.01, NoiseModel::Alternating, 99).unwrap();
        for k in 0..21 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let expected = g.values()[k] + sign * 0.01;
            assert!((alt.g_delta.values()[k] - expected).abs() <= 2.0 * f64::EPSILON);
            assert!((alt.g_delta.values()[k] - g.values()[k]).abs() <= 0.01);
        }
        let a = add_noise(&g, 0.05, NoiseModel::UniformIid, 7).unwrap();
        let b = add_noise(&g, 0.05, NoiseModel::UniformIid, 7).unwrap();
        assert_eq!(a, b);
        let z = GridFunction::zeros(50).unwrap();
        let u = add_noise(&z, 0.1, NoiseModel::UniformIid, 3).unwrap();
        assert!(u.g_delta.sup_norm() <= 0.1);
        assert!(matches!(
            add_noise(&z, 0.0, NoiseModel::UniformIid, 3),
            Err(Error::NonPositive { .. })
        ));
    }

    #[test]
    fn stencil_worst_case_pattern() {
        let z = GridFunction::zeros(13).unwrap();
        let d = add_noise(&z, 1.0, NoiseModel::StencilWorstCase { step_nodes: 2 }, 0).unwrap();
        let expected = [1., 1., 1., 1., -1., -1., -1., -1., 1., 1., 1., 1., -1.];
        assert_eq!(d.g_delta.values(), &expected);
    }

    #[test]
    fn csv_round_trip_and_rejects() {
        let f = GridFunction::from_fn(7, |x| (3.0 * x).exp() - 1.0 / 3.0).unwrap();
        let text = f.to_csv_string();
        assert!(text.starts_with("x,value\n"));
        let back = GridFunction::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, f);
        assert!(GridFunction::read_csv("x,value\n0,1\n0.3,2\n1,3\n".as_bytes()).is_err());
        assert!(GridFunction::read_csv("a,b\n0,1\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn constructor_rejects() {
        assert!(matches!(GridFunction::new(vec![1.0]), Err(Error::TooFewNodes { .. })));
        assert!(matches!(
            GridFunction::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(HolderParams::new(2.5, 1.0).is_err());
        assert!(HolderParams::new(1.5, 0.0).is_err());
    }
}
