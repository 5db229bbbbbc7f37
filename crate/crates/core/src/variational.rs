//! Variational regularizer: a near-minimizer of
//! `F(v) = ||Av - g_delta|| + delta * phi(v)` over
//! `S_delta = {v : ||Av - g_delta|| <= delta, phi(v) <= c}`.
//!
//! The solver is a projected subgradient method with best-iterate tracking.
//! Every accepted iterate satisfies both constraints, so the returned point is
//! always a member of `S_delta`; its quality is certified after the fact by
//! comparing `F(v_delta)` with `2 (1 + phi(u)) delta` when a synthetic truth
//! `u` is known.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::adversary::{sample_feasible, sup_error_estimate, ClassKind, FeasibleClass};
use crate::error::{Error, Result};
use crate::grid::{
    add_noise, check_positive, discrete_holder_norm, forward_slopes, holder_seminorm_argmax,
    integrate_values, max_abs, GridFunction, HolderParams, NoiseModel, NoisyData,
};
use crate::modulus::{modulus_bruteforce, LatticeCompactum};
use crate::seeded_rng;

/// Largest grid on which Tikhonov starting points are computed densely.
const DENSE_START_LIMIT: usize = 400;

/// Over-relaxation of the feasibility projections.
const RELAXATION: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// Discrete Hölder norm of exponent `a`.
    HolderNorm(f64),
    SupNorm,
}

/// `K_c = {v : phi(v) <= c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactumSpec {
    pub phi: Phi,
    pub c: f64,
}

impl CompactumSpec {
    pub fn new(phi: Phi, c: f64) -> Result<Self> {
        check_positive("c", c)?;
        if let Phi::HolderNorm(a) = phi {
            HolderParams::new(a, c)?;
        }
        Ok(Self { phi, c })
    }

    pub fn eval(&self, v: &GridFunction) -> Result<f64> {
        self.eval_values(v.values())
    }

    pub(crate) fn eval_values(&self, v: &[f64]) -> Result<f64> {
        match self.phi {
            Phi::SupNorm => Ok(max_abs(v)),
            Phi::HolderNorm(a) => discrete_holder_norm(&GridFunction::new(v.to_vec())?, a),
        }
    }

    pub fn contains(&self, v: &GridFunction) -> Result<bool> {
        Ok(self.eval(v)? <= self.c)
    }

    /// The same set viewed as an adversary class with budget `c`.
    pub fn class_kind(&self) -> Result<ClassKind> {
        match self.phi {
            Phi::SupNorm => ClassKind::sup_only(self.c),
            Phi::HolderNorm(a) => Ok(ClassKind::Holder(HolderParams::new(a, self.c)?)),
        }
    }

    fn project(&self, v: &mut [f64]) -> Result<()> {
        match self.phi {
            Phi::SupNorm => v.iter_mut().for_each(|x| *x = x.clamp(-self.c, self.c)),
            // radial retraction onto the ball; feasible but not the nearest point
            Phi::HolderNorm(_) => {
                let mut norm = self.eval_values(v)?;
                while norm > self.c {
                    let shrink = self.c / norm * (1.0 - 4.0 * f64::EPSILON);
                    v.iter_mut().for_each(|x| *x *= shrink);
                    norm = self.eval_values(v)?;
                }
            }
        }
        Ok(())
    }

    /// A subgradient of `phi` at `v`; ties between maximizing nodes are
    /// broken with `rng`.
    fn subgradient(&self, v: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = v.len();
        let mut grad = vec![0.0; n];
        let spacing = 1.0 / (n - 1) as f64;
        let (i, sign) = argmax_abs(v, rng);
        grad[i] += sign;
        match self.phi {
            Phi::SupNorm => {}
            Phi::HolderNorm(a) if a <= 1.0 => {
                let (_, i, j) = holder_seminorm_argmax(v, spacing, a);
                let w = ((j - i) as f64 * spacing).powf(a);
                let s = (v[j] - v[i]).signum();
                grad[j] += s / w;
                grad[i] -= s / w;
            }
            Phi::HolderNorm(a) => {
                let slopes = forward_slopes(v, spacing);
                let (i, sign) = argmax_abs(&slopes, rng);
                grad[i + 1] += sign / spacing;
                grad[i] -= sign / spacing;
                let beta = a - 1.0;
                let (_, i, j) = holder_seminorm_argmax(&slopes, spacing, beta);
                if i != j {
                    let w = ((j - i) as f64 * spacing).powf(beta) * spacing;
                    let s = (slopes[j] - slopes[i]).signum();
                    grad[j + 1] += s / w;
                    grad[j] -= s / w;
                    grad[i + 1] -= s / w;
                    grad[i] += s / w;
                }
            }
        }
        grad
    }
}

/// Index of a largest `|v_k|` (uniformly among exact ties) and its sign.
fn argmax_abs(v: &[f64], rng: &mut ChaCha8Rng) -> (usize, f64) {
    let top = max_abs(v);
    let ties: Vec<usize> = (0..v.len()).filter(|&k| v[k].abs() == top).collect();
    let k = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    };
    (k, if v[k] == 0.0 { 0.0 } else { v[k].signum() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// Cumulative trapezoid integration on the grid of the argument.
    Integration,
    /// Explicit `n x n` matrix acting on node values.
    Matrix(DMatrix<f64>),
}

/// The forward operator `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub operator: Operator,
    /// Whether `A` is injective on the grid space. Trapezoid integration is
    /// not: it annihilates the node-alternating sequence `(-1)^k`.
    pub injective: bool,
}

impl ProblemSpec {
    pub fn integration() -> Self {
        Self {
            operator: Operator::Integration,
            injective: false,
        }
    }

    pub fn matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() < 2 {
            return Err(Error::InvalidOperator(format!(
                "expected a square matrix with at least 2 rows, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidOperator("non-finite matrix entry".into()));
        }
        let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        let injective = m.clone().rank(1e-12 * scale * m.nrows() as f64) == m.nrows();
        Ok(Self {
            operator: Operator::Matrix(m),
            injective,
        })
    }

    /// Reads a square matrix, one row per line, entries separated by commas
    /// or whitespace. Blank lines and `#` comments are skipped.
    pub fn read_matrix<R: BufRead>(input: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("not a number: {s:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected {} entries, got {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        Self::matrix(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::matrix(DMatrix::identity(n, n))
    }

    pub fn check_nodes(&self, n: usize) -> Result<()> {
        match &self.operator {
            Operator::Integration => Ok(()),
            Operator::Matrix(m) if m.ncols() == n => Ok(()),
            Operator::Matrix(m) => Err(Error::GridMismatch {
                left: m.ncols(),
                right: n,
            }),
        }
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        self.check_nodes(v.len())?;
        GridFunction::new(self.apply_values(v.values()))
    }

    pub(crate) fn apply_values(&self, v: &[f64]) -> Vec<f64> {
        match &self.operator {
            Operator::Integration => integrate_values(v),
            Operator::Matrix(m) => (m * DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }

    /// `out += scale * A[row, :]`.
    fn add_row(&self, row: usize, scale: f64, out: &mut [f64]) {
        match &self.operator {
            Operator::Integration => {
                if row == 0 {
                    return;
                }
                let w = scale / (out.len() - 1) as f64;
                out[0] += 0.5 * w;
                out[row] += 0.5 * w;
                for x in &mut out[1..row] {
                    *x += w;
                }
            }
            Operator::Matrix(m) => {
                for (o, a) in out.iter_mut().zip(m.row(row).iter()) {
                    *o += scale * a;
                }
            }
        }
    }

    /// Rows of `A` that are identically zero on an `n`-node grid.
    pub(crate) fn zero_rows(&self, n: usize) -> Vec<bool> {
        match &self.operator {
            Operator::Integration => (0..n).map(|k| k == 0).collect(),
            Operator::Matrix(m) => m.row_iter().map(|r| r.iter().all(|v| *v == 0.0)).collect(),
        }
    }

    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        self.check_nodes(n)?;
        Ok(match &self.operator {
            Operator::Matrix(m) => m.clone(),
            Operator::Integration => {
                let mut m = DMatrix::zeros(n, n);
                let mut row = vec![0.0; n];
                for k in 0..n {
                    row.iter_mut().for_each(|x| *x = 0.0);
                    self.add_row(k, 1.0, &mut row);
                    for (j, v) in row.iter().enumerate() {
                        m[(k, j)] = *v;
                    }
                }
                m
            }
        })
    }
}

fn misfit_values(prob: &ProblemSpec, data: &NoisyData, v: &[f64]) -> f64 {
    crate::grid::max_abs_diff(&prob.apply_values(v), data.g_delta.values())
}

/// `sup|Av - g_delta| + delta * phi(v)`.
pub fn objective(
    v: &GridFunction,
    data: &NoisyData,
    spec: &CompactumSpec,
    prob: &ProblemSpec,
) -> Result<f64> {
    v.ensure_same_grid(&data.g_delta)?;
    prob.check_nodes(v.len())?;
    Ok(misfit_values(prob, data, v.values()) + data.delta * spec.eval(v)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalResult {
    pub v_delta: GridFunction,
    pub objective_value: f64,
    pub misfit: f64,
    pub phi_value: f64,
    /// `2 (1 + phi(u)) delta` when `phi(u)` of a synthetic truth was supplied,
    /// otherwise the best objective found.
    pub certificate_bound: f64,
    /// Subgradient iterations spent, including the feasibility phase.
    pub iterations: usize,
}

impl VariationalResult {
    pub fn certified(&self) -> bool {
        self.objective_value <= self.certificate_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Subgradient iteration budget.
    pub budget: usize,
    /// Seeds tie-breaking among maximizing nodes.
    pub seed: u64,
    /// `phi(u)` of a known truth, enabling the `2 (1 + phi(u)) delta` certificate.
    pub truth_phi: Option<f64>,
}

impl SolverOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            truth_phi: None,
        }
    }

    pub fn with_truth_phi(mut self, phi: f64) -> Self {
        self.truth_phi = Some(phi);
        self
    }
}

struct Problem<'a> {
    data: &'a NoisyData,
    spec: &'a CompactumSpec,
    prob: &'a ProblemSpec,
}

impl Problem<'_> {
    fn misfit(&self, v: &[f64]) -> f64 {
        misfit_values(self.prob, self.data, v)
    }

    fn objective(&self, v: &[f64]) -> Result<f64> {
        Ok(self.misfit(v) + self.data.delta * self.spec.eval_values(v)?)
    }

    fn feasible(&self, v: &[f64]) -> Result<bool> {
        Ok(self.misfit(v) <= self.data.delta && self.spec.eval_values(v)? <= self.spec.c)
    }

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        self.prob
            .apply_values(v)
            .iter()
            .zip(self.data.g_delta.values())
            .map(|(a, g)| a - g)
            .collect()
    }

    fn misfit_subgradient(&self, v: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (k, sign) = argmax_abs(&self.residual(v), rng);
        let mut grad = vec![0.0; v.len()];
        self.prob.add_row(k, sign, &mut grad);
        grad
    }

    /// Starting points: zero and Tikhonov least-squares fits penalizing
    /// values, slopes or curvature, each pulled into `K_c`.
    fn candidates(&self) -> Vec<Vec<f64>> {
        let n = self.data.g_delta.len();
        let mut out = vec![vec![0.0; n]];
        if n > DENSE_START_LIMIT {
            return out;
        }
        let Ok(a) = self.prob.to_matrix(n) else {
            return out;
        };
        let at = a.transpose();
        let normal = &at * &a;
        let rhs = &at * DVector::from_column_slice(self.data.g_delta.values());
        let scale = normal.trace();
        // penalties on values, slopes and curvature, each with a small ridge
        let mut penalties = vec![DMatrix::identity(n, n)];
        for order in 1..=2 {
            if n > order {
                let mut d = DMatrix::<f64>::identity(n, n);
                for _ in 0..order {
                    let rows = d.nrows() - 1;
                    d = DMatrix::from_fn(rows, n, |i, j| d[(i + 1, j)] - d[(i, j)]);
                }
                let p = d.transpose() * d;
                let ridge = p.trace() * 1e-10 / n as f64;
                penalties.push(p + DMatrix::identity(n, n) * ridge);
            }
        }
        for penalty in &penalties {
            let weight = scale / penalty.trace();
            for exp in -6..=12 {
                let system = &normal + penalty * (weight * 10f64.powi(-exp));
                if let Some(chol) = system.cholesky() {
                    let mut v = chol.solve(&rhs).as_slice().to_vec();
                    if v.iter().all(|x| x.is_finite()) && self.spec.project(&mut v).is_ok() {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// `anchor + lambda (x - anchor)` with the largest `lambda` in `[0, 1]`
    /// keeping the data constraint. `K_c` is preserved by convexity.
    fn pull_toward(&self, anchor: &[f64], x: &[f64]) -> Vec<f64> {
        let delta = self.data.delta;
        let along = |l: f64| -> Vec<f64> {
            anchor.iter().zip(x).map(|(a, b)| a + l * (b - a)).collect()
        };
        let base = self.prob.apply_values(anchor);
        let diff: Vec<f64> = x.iter().zip(anchor).map(|(b, a)| b - a).collect();
        let image = self.prob.apply_values(&diff);
        let mut lambda = 1.0_f64;
        for ((b, g), q) in base.iter().zip(self.data.g_delta.values()).zip(&image) {
            let r = b - g;
            if *q > 0.0 {
                lambda = lambda.min((delta - r) / q);
            } else if *q < 0.0 {
                lambda = lambda.min((delta + r) / -q);
            }
        }
        let mut lambda = lambda.max(0.0);
        let mut v = along(lambda);
        while self.misfit(&v) > delta && lambda > 0.0 {
            lambda = if lambda < 1e-300 { 0.0 } else { lambda * (1.0 - 1e-9) - 1e-300 };
            v = along(lambda);
        }
        v
    }
}

/// Projected subgradient descent on `F` over `S_delta`.
///
/// Phase one drives the misfit below `delta` from the best starting point
/// when none is feasible; phase two descends on `F`. After each step the
/// iterate is projected onto `K_c` and, if the data constraint broke, pulled
/// back along the segment to the feasible anchor. The first iterate with the
/// lowest objective is returned. Step `k` has length
/// `c / (10 ||g_1||) / sqrt(k)`.
pub fn minimize(
    data: &NoisyData,
    spec: &CompactumSpec,
    prob: &ProblemSpec,
    options: &SolverOptions,
) -> Result<VariationalResult> {
    let n = data.g_delta.len();
    prob.check_nodes(n)?;
    let problem = Problem { data, spec, prob };
    let mut rng = seeded_rng(options.seed, 0);
    let mut used = 0usize;

    let mut start: Option<(f64, Vec<f64>)> = None;
    let mut closest: Option<(f64, Vec<f64>)> = None;
    for v in problem.candidates() {
        let misfit = problem.misfit(&v);
        if problem.feasible(&v)? {
            let f = problem.objective(&v)?;
            if start.as_ref().is_none_or(|(b, _)| f < *b) {
                start = Some((f, v));
            }
        } else if closest.as_ref().is_none_or(|(b, _)| misfit < *b) {
            closest = Some((misfit, v));
        }
    }

    if start.is_none() {
        // phase one: over-relaxed projections onto the most violated data
        // half-space, each followed by a return into K_c. Rows of
        // A that vanish leave their residual fixed and are skipped.
        let fixed = prob.zero_rows(n);
        let (_, mut x) = closest.expect("zero is always a candidate");
        let stuck = problem
            .residual(&x)
            .iter()
            .zip(&fixed)
            .any(|(r, &f)| f && r.abs() > data.delta);
        while used < options.budget && !stuck {
            used += 1;
            let mut residual = problem.residual(&x);
            residual.iter_mut().zip(&fixed).for_each(|(r, &f)| {
                if f {
                    *r = 0.0;
                }
            });
            let (k, sign) = argmax_abs(&residual, &mut rng);
            let mut g = vec![0.0; n];
            prob.add_row(k, sign, &mut g);
            let norm2 = g.iter().map(|v| v * v).sum::<f64>();
            if norm2 == 0.0 {
                break;
            }
            let step = RELAXATION * (residual[k].abs() - data.delta) / norm2;
            x.iter_mut().zip(&g).for_each(|(v, d)| *v -= step * d);
            spec.project(&mut x)?;
            if problem.feasible(&x)? {
                start = Some((problem.objective(&x)?, x));
                break;
            }
        }
    }
    let Some((mut best_f, anchor)) = start else {
        return Err(Error::Infeasible(format!(
            "no point with misfit <= {} and phi <= {} found within {} iterations",
            data.delta, spec.c, options.budget
        )));
    };

    let mut best = anchor.clone();
    let mut x = anchor.clone();
    let mut step0 = None;
    let mut k = 0usize;
    while used < options.budget {
        used += 1;
        k += 1;
        let mut g = problem.misfit_subgradient(&x, &mut rng);
        let gphi = spec.subgradient(&x, &mut rng);
        g.iter_mut().zip(&gphi).for_each(|(a, b)| *a += data.delta * b);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let step0 = *step0.get_or_insert(spec.c / (10.0 * norm));
        let step = step0 / (k as f64).sqrt();
        x.iter_mut().zip(&g).for_each(|(v, d)| *v -= step * d);
        spec.project(&mut x)?;
        if problem.misfit(&x) > data.delta {
            x = problem.pull_toward(&anchor, &x);
        }
        if !problem.feasible(&x)? {
            x = best.clone();
            continue;
        }
        let f = problem.objective(&x)?;
        if f < best_f {
            best_f = f;
            best.clone_from(&x);
        }
    }

    let misfit = problem.misfit(&best);
    let phi_value = spec.eval_values(&best)?;
    let objective_value = misfit + data.delta * phi_value;
    let certificate_bound = match options.truth_phi {
        Some(p) => 2.0 * (1.0 + p) * data.delta,
        None => objective_value,
    };
    Ok(VariationalResult {
        v_delta: GridFunction::new(best)?,
        objective_value,
        misfit,
        phi_value,
        certificate_bound,
        iterations: used,
    })
}

/// [`minimize`] with both constraints re-verified on the output.
pub fn regularize_variational(
    data: &NoisyData,
    spec: &CompactumSpec,
    prob: &ProblemSpec,
    options: &SolverOptions,
) -> Result<VariationalResult> {
    let result = minimize(data, spec, prob, options)?;
    if !(result.misfit <= data.delta && result.phi_value <= spec.c) {
        return Err(Error::Infeasible(format!(
            "output violates constraints: misfit {} (delta {}), phi {} (c {})",
            result.misfit, data.delta, result.phi_value, spec.c
        )));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// `None` uses exact data `g = Au`.
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub budget: usize,
    /// Ensemble size for the worst-case column; 0 leaves it NaN.
    pub ensemble: usize,
    /// Coarse compactum for the `omega(2 delta)` column; `None` leaves it NaN.
    pub lattice: Option<LatticeCompactum>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub delta: f64,
    pub misfit: f64,
    pub phi: f64,
    pub objective: f64,
    pub sup_err_truth: f64,
    pub sup_err_ensemble: f64,
    pub omega_2delta: f64,
}

impl StudyRow {
    pub const HEADER: &'static str =
        "delta,misfit,phi,objective,sup_err_truth,sup_err_ensemble,omega_2delta";

    pub fn fields(&self) -> [f64; 7] {
        [
            self.delta,
            self.misfit,
            self.phi,
            self.objective,
            self.sup_err_truth,
            self.sup_err_ensemble,
            self.omega_2delta,
        ]
    }
}

/// Runs the variational regularizer on synthetic data for each `delta`, in
/// the given order.
///
/// The ensemble column is the worst error of `v_delta` over certified
/// members of `S_delta` (integration operator only). The last column is the
/// exact lattice modulus `omega(2 delta)` on `config.lattice`.
pub fn convergence_study(
    u_true: &GridFunction,
    deltas: &[f64],
    spec: &CompactumSpec,
    prob: &ProblemSpec,
    config: &StudyConfig,
) -> Result<Vec<StudyRow>> {
    prob.check_nodes(u_true.len())?;
    let phi_u = spec.eval(u_true)?;
    if phi_u > spec.c {
        return Err(Error::NoFeasiblePoint(format!(
            "truth has phi = {phi_u} > c = {}",
            spec.c
        )));
    }
    let g = prob.apply(u_true)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let data = match config.noise {
            Some(model) => add_noise(&g, delta, model, config.seed)?,
            None => NoisyData::new(g.clone(), delta)?,
        };
        let options = SolverOptions::new(config.budget, config.seed).with_truth_phi(phi_u);
        let result = regularize_variational(&data, spec, prob, &options)?;
        let sup_err_truth = result.v_delta.sup_distance(u_true)?;

        let sup_err_ensemble = if config.ensemble > 0 && prob.operator == Operator::Integration {
            let class = FeasibleClass::new(spec.class_kind()?, data.clone()).with_anchor(u_true.clone());
            let ensemble = sample_feasible(&class, config.ensemble, config.seed)?;
            if ensemble.is_empty() {
                f64::NAN
            } else {
                sup_error_estimate(&result.v_delta, &class, &ensemble)?.value
            }
        } else {
            f64::NAN
        };

        let omega_2delta = match &config.lattice {
            Some(lattice) if prob.check_nodes(lattice.nodes).is_ok() => {
                modulus_bruteforce(lattice, 2.0 * delta, prob)?
            }
            _ => f64::NAN,
        };

        rows.push(StudyRow {
            delta,
            misfit: result.misfit,
            phi: result.phi_value,
            objective: result.objective_value,
            sup_err_truth,
            sup_err_ensemble,
            omega_2delta,
        });
    }
    Ok(rows)
}
