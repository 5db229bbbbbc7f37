//! Probes of the feasible set `S_delta = {v : ||Av - g_delta|| <= delta, ||v||_class <= M}`.
//!
//! Everything here produces *certified* objects: each returned function has
//! passed [`is_feasible`] on its stored floating-point values. Worst-case
//! errors estimated over an ensemble are lower bounds on the true supremum,
//! and the separation of a feasible pair lower-bounds the error of every
//! reconstruction method at half its value.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    check_positive, discrete_holder_norm, integrate_values, max_abs, max_abs_diff, GridFunction,
    HolderParams, NoisyData,
};
use crate::{format_float, seeded_rng};

/// Bisection steps when locating the boundary of the class ball along a ray.
const BISECTION_STEPS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassKind {
    /// `||v||_a <= M` with the discrete Hölder norm.
    Holder(HolderParams),
    /// `sup|v| <= M`.
    SupOnly { m: f64 },
}

impl ClassKind {
    pub fn sup_only(m: f64) -> Result<Self> {
        check_positive("M", m)?;
        Ok(Self::SupOnly { m })
    }

    pub fn budget(&self) -> f64 {
        match self {
            Self::Holder(p) => p.m,
            Self::SupOnly { m } => *m,
        }
    }

    pub fn norm(&self, v: &GridFunction) -> Result<f64> {
        match self {
            Self::Holder(p) => discrete_holder_norm(v, p.a),
            Self::SupOnly { .. } => Ok(v.sup_norm()),
        }
    }

    fn norm_values(&self, v: &[f64]) -> Result<f64> {
        match self {
            Self::Holder(p) => discrete_holder_norm(&GridFunction::new(v.to_vec())?, p.a),
            Self::SupOnly { .. } => Ok(max_abs(v)),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Holder(_) => "holder",
            Self::SupOnly { .. } => "sup-only",
        }
    }
}

/// A feasible set: class constraint plus data constraint around `g_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleClass {
    pub kind: ClassKind,
    pub data: NoisyData,
    /// Known member used to seed samplers and probes. Defaults to zero.
    pub anchor: Option<GridFunction>,
}

impl FeasibleClass {
    pub fn new(kind: ClassKind, data: NoisyData) -> Self {
        Self {
            kind,
            data,
            anchor: None,
        }
    }

    pub fn with_anchor(mut self, anchor: GridFunction) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn delta(&self) -> f64 {
        self.data.delta
    }

    pub fn nodes(&self) -> usize {
        self.data.g_delta.len()
    }

    fn anchor_or_zero(&self) -> Result<GridFunction> {
        match &self.anchor {
            Some(a) => {
                a.ensure_same_grid(&self.data.g_delta)?;
                Ok(a.clone())
            }
            None => GridFunction::zeros(self.nodes()),
        }
    }

    fn misfit_values(&self, v: &[f64]) -> f64 {
        max_abs_diff(&integrate_values(v), self.data.g_delta.values())
    }

    fn membership_values(&self, v: &[f64]) -> Result<Membership> {
        let misfit = self.misfit_values(v);
        let class_norm = self.kind.norm_values(v)?;
        Ok(Membership::new(misfit, class_norm, self))
    }
}

/// Residuals of the two constraints defining `S_delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub misfit: f64,
    pub class_norm: f64,
    pub feasible: bool,
}

impl Membership {
    fn new(misfit: f64, class_norm: f64, class: &FeasibleClass) -> Self {
        Self {
            misfit,
            class_norm,
            feasible: misfit <= class.delta() && class_norm <= class.kind.budget(),
        }
    }
}

pub fn is_feasible(v: &GridFunction, class: &FeasibleClass) -> Result<Membership> {
    v.ensure_same_grid(&class.data.g_delta)?;
    class.membership_values(v.values())
}

/// Two certified members of the same feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialPair {
    pub v1: GridFunction,
    pub v2: GridFunction,
    pub separation: f64,
    pub certificate: [Membership; 2],
    pub class: FeasibleClass,
}

impl AdversarialPair {
    /// Checks both members and records the certificate; fails if either is infeasible.
    pub fn certify(v1: GridFunction, v2: GridFunction, class: FeasibleClass) -> Result<Self> {
        let c1 = is_feasible(&v1, &class)?;
        let c2 = is_feasible(&v2, &class)?;
        for (name, c) in [("v1", c1), ("v2", c2)] {
            if !c.feasible {
                return Err(Error::NoFeasiblePoint(format!(
                    "{name} fails membership: misfit {} (delta {}), norm {} (budget {})",
                    c.misfit,
                    class.delta(),
                    c.class_norm,
                    class.kind.budget()
                )));
            }
        }
        let separation = v1.sup_distance(&v2)?;
        Ok(Self {
            v1,
            v2,
            separation,
            certificate: [c1, c2],
            class,
        })
    }

    /// CSV with columns `x1,v1,x2,v2` (plus `g_delta` when the reference data
    /// is not identically zero) preceded by `# key=value` certificate lines.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let kind = &self.class.kind;
        let _ = writeln!(s, "# class={}", kind.label());
        if let ClassKind::Holder(p) = kind {
            let _ = writeln!(s, "# a={}", format_float(p.a));
        }
        let _ = writeln!(s, "# M={}", format_float(kind.budget()));
        let _ = writeln!(s, "# delta={}", format_float(self.class.delta()));
        let zero_ref = self.class.data.g_delta.values().iter().all(|&g| g == 0.0);
        let _ = writeln!(s, "# reference={}", if zero_ref { "zero" } else { "column" });
        for (name, c) in ["v1", "v2"].iter().zip(&self.certificate) {
            let _ = writeln!(s, "# {name}_misfit={}", format_float(c.misfit));
            let _ = writeln!(s, "# {name}_class_norm={}", format_float(c.class_norm));
        }
        let _ = writeln!(s, "# separation={}", format_float(self.separation));
        s.push_str(if zero_ref { "x1,v1,x2,v2\n" } else { "x1,v1,x2,v2,g_delta\n" });
        for k in 0..self.v1.len() {
            let x = format_float(self.v1.node(k));
            let _ = write!(
                s,
                "{x},{},{x},{}",
                format_float(self.v1.values()[k]),
                format_float(self.v2.values()[k])
            );
            if !zero_ref {
                let _ = write!(s, ",{}", format_float(self.class.data.g_delta.values()[k]));
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`to_csv_string`](Self::to_csv_string) output and re-certifies
    /// both members. The recomputed residuals must match the recorded ones.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut keys = std::collections::HashMap::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut header: Option<usize> = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    keys.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if header.is_none() {
                let width = match t {
                    "x1,v1,x2,v2" => 4,
                    "x1,v1,x2,v2,g_delta" => 5,
                    _ => {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("unexpected header `{t}`"),
                        })
                    }
                };
                header = Some(width);
                columns = vec![Vec::new(); width];
                continue;
            }
            let fields: Vec<&str> = t.split(',').collect();
            if fields.len() != columns.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} columns", columns.len()),
                });
            }
            for (col, f) in columns.iter_mut().zip(fields) {
                col.push(f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad number `{f}`: {e}"),
                })?);
            }
        }
        let num = |k: &str| -> Result<f64> {
            keys.get(k)
                .ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("missing certificate key `{k}`"),
                })?
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line: 0,
                    msg: format!("bad value for `{k}`: {e}"),
                })
        };
        let m = num("M")?;
        let kind = match keys.get("class").map(String::as_str) {
            Some("holder") => ClassKind::Holder(HolderParams::new(num("a")?, m)?),
            Some("sup-only") => ClassKind::sup_only(m)?,
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unknown class {other:?}"),
                })
            }
        };
        if header.is_none() {
            return Err(Error::Parse {
                line: 0,
                msg: "missing column header".into(),
            });
        }
        let v1 = GridFunction::new(columns[1].clone())?;
        let v2 = GridFunction::new(columns[3].clone())?;
        let g = match columns.get(4) {
            Some(col) => GridFunction::new(col.clone())?,
            None => GridFunction::zeros(v1.len())?,
        };
        let class = FeasibleClass::new(kind, NoisyData::new(g, num("delta")?)?);
        let pair = Self::certify(v1, v2, class)?;
        for (name, c) in ["v1", "v2"].iter().zip(&pair.certificate) {
            for (field, value) in [("misfit", c.misfit), ("class_norm", c.class_norm)] {
                let recorded = num(&format!("{name}_{field}"))?;
                if (recorded - value).abs() > 1e-12 * value.abs().max(1.0) {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("{name}_{field}: recorded {recorded}, recomputed {value}"),
                    });
                }
            }
        }
        if (num("separation")? - pair.separation).abs() > 1e-12 {
            return Err(Error::Parse {
                line: 0,
                msg: "separation does not match the members".into(),
            });
        }
        Ok(pair)
    }
}

/// Minimum grid size for [`sine_pair`]: twenty intervals per period.
pub fn sine_pair_nodes(m: f64, delta: f64) -> Result<usize> {
    Ok(20 * sine_frequency(m, delta)? + 1)
}

pub(crate) fn sine_frequency(m: f64, delta: f64) -> Result<usize> {
    check_positive("M", m)?;
    check_positive("delta", delta)?;
    Ok(((m / (PI * delta)).ceil() as usize).max(1))
}

/// `v1 = 0`, `v2 = M sin(2πkx)` with `k = ceil(M / (π delta))`, in the
/// sup-only class around `g_delta = 0`.
///
/// `sup|A v2| <= M / (πk) <= delta` while the separation stays `M`: the data
/// cannot tell the two apart at any noise level.
pub fn sine_pair(m: f64, delta: f64, nodes: usize) -> Result<AdversarialPair> {
    let mut k = sine_frequency(m, delta)?;
    let class = FeasibleClass::new(
        ClassKind::sup_only(m)?,
        NoisyData::new(GridFunction::zeros(nodes.max(2))?, delta)?,
    );
    // the ceiling can land one short when m / (π delta) is an integer up to rounding
    for _ in 0..2 {
        if nodes < 20 * k {
            return Err(Error::GridTooCoarse(format!(
                "sine pair with k = {k} needs at least {} nodes, got {nodes}",
                20 * k
            )));
        }
        let v2 = GridFunction::from_fn(nodes, |x| m * (2.0 * PI * k as f64 * x).sin())?;
        let v1 = GridFunction::zeros(nodes)?;
        match AdversarialPair::certify(v1, v2, class.clone()) {
            Ok(pair) => return Ok(pair),
            Err(_) => k += 1,
        }
    }
    Err(Error::NoFeasiblePoint(format!(
        "sine pair for M = {m}, delta = {delta} failed certification"
    )))
}

/// Geometry of the triangle used by [`bump_pair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpShape {
    pub height: f64,
    pub half_width: f64,
}

impl BumpShape {
    /// Height `sqrt(delta M / 2)` clipped to `M / 2`; slopes `±M / 2`.
    pub fn for_lipschitz_class(m: f64, delta: f64) -> Result<Self> {
        check_positive("M", m)?;
        check_positive("delta", delta)?;
        let height = (delta * m / 2.0).sqrt().min(m / 2.0);
        Ok(Self {
            height,
            half_width: 2.0 * height / m,
        })
    }

    pub fn sample(&self, nodes: usize) -> Result<GridFunction> {
        let slope = self.height / self.half_width;
        GridFunction::from_fn(nodes, |x| (self.height - slope * (x - 0.5).abs()).max(0.0))
    }
}

/// `v1 = 0` and a centred triangle `v2` in the literal Lipschitz class
/// `||v||_1 <= M` around `g_delta = 0`.
///
/// With height `m = sqrt(delta M / 2)` the integral of `v2` is exactly
/// `delta` and `||v2||_1 = m + M/2 <= M`, so the separation is only `m`,
/// shrinking like `sqrt(delta)`.
pub fn bump_pair(m: f64, delta: f64, nodes: usize) -> Result<AdversarialPair> {
    let shape = BumpShape::for_lipschitz_class(m, delta)?;
    let class = FeasibleClass::new(
        ClassKind::Holder(HolderParams::new(1.0, m)?),
        NoisyData::new(GridFunction::zeros(nodes.max(2))?, delta)?,
    );
    let mut v2 = shape.sample(nodes)?;
    // sampling off the kinks can overshoot either constraint by a rounding hair
    for _ in 0..8 {
        let c = is_feasible(&v2, &class)?;
        if c.feasible {
            break;
        }
        let shrink = (delta / c.misfit).min(m / c.class_norm).min(1.0) * (1.0 - 1e-12);
        v2 = v2.scale(shrink)?;
    }
    AdversarialPair::certify(GridFunction::zeros(nodes)?, v2, class)
}

/// Worst observed error of a reconstruction over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupErrorEstimate {
    /// `max_v sup|reconstruction - v|`: a lower bound on the supremum over `S_delta`.
    pub value: f64,
    pub samples: usize,
}

pub fn sup_error_estimate(
    reconstruction: &GridFunction,
    class: &FeasibleClass,
    ensemble: &[GridFunction],
) -> Result<SupErrorEstimate> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    reconstruction.ensure_same_grid(&class.data.g_delta)?;
    let mut value = 0.0_f64;
    for v in ensemble {
        value = value.max(reconstruction.sup_distance(v)?);
    }
    Ok(SupErrorEstimate {
        value,
        samples: ensemble.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Sine,
    Bump,
    RandomSearch,
}

/// `sin(2π freq x + phase)` on the grid.
pub fn sine_direction(nodes: usize, freq: f64, phase: f64) -> Vec<f64> {
    (0..nodes)
        .map(|k| {
            let x = k as f64 / (nodes - 1) as f64;
            (2.0 * PI * freq * x + phase).sin()
        })
        .collect()
}

/// Unit-height triangle on `[center - half_width, center + half_width]`.
pub fn bump_direction(nodes: usize, center: f64, half_width: f64) -> Vec<f64> {
    (0..nodes)
        .map(|k| {
            let x = k as f64 / (nodes - 1) as f64;
            (1.0 - (x - center).abs() / half_width).max(0.0)
        })
        .collect()
}

fn random_atom(nodes: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let max_freq = ((nodes - 1) / 4).max(1);
    if rng.gen_bool(0.5) {
        let freq = rng.gen_range(1..=max_freq) as f64;
        sine_direction(nodes, freq, rng.gen_range(0.0..2.0 * PI))
    } else {
        let spacing = 1.0 / (nodes - 1) as f64;
        let half_width = rng.gen_range((2.0 * spacing).min(0.5)..=0.5);
        bump_direction(nodes, rng.gen_range(0.0..=1.0), half_width)
    }
}

/// Random sum of one to three sinusoids and triangle bumps.
pub fn random_direction(nodes: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let atoms = rng.gen_range(1..=3);
    let mut dir = vec![0.0; nodes];
    for _ in 0..atoms {
        let weight = rng.gen_range(-1.0..=1.0);
        for (d, a) in dir.iter_mut().zip(random_atom(nodes, rng)) {
            *d += weight * a;
        }
    }
    dir
}

/// Deterministic `index`-th direction of a generator's dictionary.
///
/// `Sine` cycles through frequencies `1, 2, ...` up to Nyquist with phases
/// `0` and `π/2` (the latter reaches the node-alternating pattern); `Bump`
/// walks dyadic widths and centres; `RandomSearch` draws [`random_direction`]
/// from stream `index` of `seed`.
pub fn candidate_direction(generator: Generator, nodes: usize, index: usize, seed: u64) -> Vec<f64> {
    match generator {
        Generator::Sine => {
            let nyquist = ((nodes - 1) / 2).max(1);
            let freq = (index / 2) % nyquist + 1;
            let phase = if index.is_multiple_of(2) { 0.0 } else { PI / 2.0 };
            sine_direction(nodes, freq as f64, phase)
        }
        Generator::Bump => {
            let spacing = 1.0 / (nodes - 1) as f64;
            let max_level = ((0.5 / spacing).log2().floor() as u32).max(1);
            let mut i = index;
            let mut level = 0;
            loop {
                let count = 1usize << level;
                if i < count {
                    break;
                }
                i -= count;
                level = (level + 1) % max_level;
            }
            let half_width = 0.5 / (1u64 << level) as f64;
            let center = (i as f64 + 0.5) / (1u64 << level) as f64;
            bump_direction(nodes, center, half_width)
        }
        Generator::RandomSearch => {
            let mut rng = seeded_rng(seed, index as u64);
            random_direction(nodes, &mut rng)
        }
    }
}

/// Largest `t` in `[0, t_max]` with `base + t dir` feasible, plus its
/// certificate. `base` must be feasible.
fn max_step(class: &FeasibleClass, base: &[f64], dir: &[f64]) -> Result<(f64, Vec<f64>)> {
    let along = |t: f64| -> Vec<f64> { base.iter().zip(dir).map(|(b, d)| b + t * d).collect() };
    let dir_norm = class.kind.norm_values(dir)?;
    if dir_norm == 0.0 {
        return Ok((0.0, base.to_vec()));
    }
    let base_norm = class.kind.norm_values(base)?;
    let mut hi = (class.kind.budget() + base_norm) / dir_norm;

    // the data constraint is linear per node, so its limit is closed-form
    let residual: Vec<f64> = integrate_values(base)
        .iter()
        .zip(class.data.g_delta.values())
        .map(|(a, g)| a - g)
        .collect();
    let image = integrate_values(dir);
    let delta = class.delta();
    for (r, q) in residual.iter().zip(&image) {
        if *q > 0.0 {
            hi = hi.min((delta - r) / q);
        } else if *q < 0.0 {
            hi = hi.min((delta + r) / -q);
        }
    }
    let hi = hi.max(0.0);
    let candidate = along(hi);
    if class.membership_values(&candidate)?.feasible {
        return Ok((hi, candidate));
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + up);
        if class.membership_values(&along(mid))?.feasible {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok((lo, along(lo)))
}

/// Draws up to `count` certified members of `S_delta`.
///
/// Each member is the anchor moved toward a random convex combination of
/// boundary points `anchor ± t_max d` along generator directions, then
/// accepted only if it passes [`is_feasible`]. Member `i` depends only on
/// `(seed, i)`.
pub fn sample_feasible(class: &FeasibleClass, count: usize, seed: u64) -> Result<Vec<GridFunction>> {
    let anchor = class.anchor_or_zero()?;
    let start = is_feasible(&anchor, class)?;
    if !start.feasible {
        return Err(Error::NoFeasiblePoint(format!(
            "seed element has misfit {} (delta {}) and class norm {} (budget {})",
            start.misfit,
            class.delta(),
            start.class_norm,
            class.kind.budget()
        )));
    }
    let nodes = class.nodes();
    let members: Vec<Option<GridFunction>> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<Option<GridFunction>> {
            let mut rng = seeded_rng(seed, i as u64 + 1);
            let atoms = rng.gen_range(1..=2);
            let mut weights: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let reach = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.0..=1.0) };
            let mut member = anchor.values().to_vec();
            for w in weights {
                let mut dir = random_direction(nodes, &mut rng);
                if rng.gen_bool(0.5) {
                    dir.iter_mut().for_each(|d| *d = -*d);
                }
                let (t, _) = max_step(class, anchor.values(), &dir)?;
                for (m, d) in member.iter_mut().zip(&dir) {
                    *m += w * reach * t * d;
                }
            }
            let accepted = class.membership_values(&member)?.feasible;
            accepted.then(|| GridFunction::new(member)).transpose()
        })
        .collect::<Result<_>>()?;
    Ok(members.into_iter().flatten().collect())
}

/// Result of [`diameter_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiameterProbe {
    /// Largest certified separation found; a lower bound on `diam S_delta`.
    pub separation: f64,
    pub pair: Option<AdversarialPair>,
}

/// Searches for far-apart feasible pairs `anchor + t₊d`, `anchor - t₋d`.
///
/// `Sine` and `Bump` first try their closed-form direction (the
/// [`sine_pair`] frequency for the sup-only class, the [`bump_pair`] triangle
/// for Hölder classes); then `budget` further directions from
/// [`candidate_direction`] are tried. The result is a running maximum over a
/// fixed candidate sequence, so it never decreases as the budget grows.
pub fn diameter_probe(
    class: &FeasibleClass,
    generator: Generator,
    budget: usize,
    seed: u64,
) -> Result<DiameterProbe> {
    let nodes = class.nodes();
    let anchor = class.anchor_or_zero()?;
    if !is_feasible(&anchor, class)?.feasible {
        return Ok(DiameterProbe {
            separation: 0.0,
            pair: None,
        });
    }
    let mut directions: Vec<Vec<f64>> = Vec::new();
    match (generator, class.kind) {
        (Generator::Sine, kind) => {
            let k = sine_frequency(kind.budget(), class.delta())?;
            if nodes >= 20 * k {
                directions.push(sine_direction(nodes, k as f64, 0.0));
            }
        }
        (Generator::Bump, kind) => {
            let shape = BumpShape::for_lipschitz_class(kind.budget(), class.delta())?;
            if shape.half_width * (nodes - 1) as f64 >= 1.0 {
                directions.push(bump_direction(nodes, 0.5, shape.half_width));
            }
        }
        (Generator::RandomSearch, _) => {}
    }
    directions.extend((0..budget).map(|i| candidate_direction(generator, nodes, i, seed)));

    let candidates: Vec<Option<(f64, GridFunction, GridFunction)>> = directions
        .par_iter()
        .map(|dir| -> Result<_> {
            let neg: Vec<f64> = dir.iter().map(|d| -d).collect();
            let (tp, up) = max_step(class, anchor.values(), dir)?;
            let (tn, down) = max_step(class, anchor.values(), &neg)?;
            if tp + tn == 0.0 {
                return Ok(None);
            }
            let up = GridFunction::new(up)?;
            let down = GridFunction::new(down)?;
            Ok(Some((up.sup_distance(&down)?, up, down)))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, GridFunction, GridFunction)> = None;
    for c in candidates.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.0 > b.0) {
            best = Some(c);
        }
    }
    match best {
        Some((_, up, down)) => {
            let pair = AdversarialPair::certify(up, down, class.clone())?;
            Ok(DiameterProbe {
                separation: pair.separation,
                pair: Some(pair),
            })
        }
        None => Ok(DiameterProbe {
            separation: 0.0,
            pair: None,
        }),
    }
}
