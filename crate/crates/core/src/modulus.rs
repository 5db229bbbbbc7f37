//! Modulus of continuity of `A^{-1}` on a compactum `K`:
//! `omega(delta) = sup{ ||v - w|| : v, w in K, ||Av - Aw|| <= delta }`.
//!
//! Exact on enumerable lattice compacta, a certified lower bound elsewhere.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;

use crate::adversary::{candidate_direction, sine_direction, sine_frequency, Generator};
use crate::error::{Error, Result};
use crate::grid::{max_abs, max_abs_diff, GridFunction};
use crate::seeded_rng;
use crate::variational::{CompactumSpec, Phi, ProblemSpec};

pub const PAIR_LIMIT: u128 = 10_000_000;
pub const MEMBER_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    /// Every node takes any level independently: `|levels|^nodes` points.
    Product,
    /// Constant functions at each level.
    Constants,
}

/// A finite compactum: lattice points on a small grid filtered by `phi <= c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCompactum {
    pub nodes: usize,
    pub levels: Vec<f64>,
    pub spec: CompactumSpec,
    pub kind: LatticeKind,
}

impl LatticeCompactum {
    pub fn new(nodes: usize, levels: Vec<f64>, spec: CompactumSpec, kind: LatticeKind) -> Result<Self> {
        GridFunction::zeros(nodes)?;
        if levels.is_empty() {
            return Err(Error::TooFewNodes { min: 1, got: 0 });
        }
        if let Some(index) = levels.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let mut levels = levels;
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self {
            nodes,
            levels,
            spec,
            kind,
        })
    }

    /// `count` evenly spaced levels from `lo` to `hi`, endpoints exact.
    pub fn uniform_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![lo];
        }
        let last = (count - 1) as f64;
        (0..count)
            .map(|i| (lo * (last - i as f64) + hi * i as f64) / last)
            .collect()
    }

    /// Lattice size before the `phi <= c` filter.
    pub fn raw_count(&self) -> u128 {
        match self.kind {
            LatticeKind::Constants => self.levels.len() as u128,
            LatticeKind::Product => (self.levels.len() as u128)
                .checked_pow(self.nodes as u32)
                .unwrap_or(u128::MAX),
        }
    }

    pub fn members(&self) -> Result<Vec<GridFunction>> {
        let raw = self.raw_count();
        if raw > MEMBER_LIMIT {
            return Err(Error::LatticeTooLarge {
                members: raw,
                limit: MEMBER_LIMIT,
            });
        }
        let mut out = Vec::new();
        let l = self.levels.len();
        for index in 0..raw as usize {
            let values: Vec<f64> = match self.kind {
                LatticeKind::Constants => vec![self.levels[index]; self.nodes],
                LatticeKind::Product => {
                    let mut rest = index;
                    (0..self.nodes)
                        .map(|_| {
                            let v = self.levels[rest % l];
                            rest /= l;
                            v
                        })
                        .collect()
                }
            };
            if self.spec.eval_values(&values)? <= self.spec.c {
                out.push(GridFunction::new(values)?);
            }
        }
        Ok(out)
    }

    fn nearest_level(&self, x: f64) -> f64 {
        let i = self.levels.partition_point(|&l| l < x);
        match (i.checked_sub(1).map(|j| self.levels[j]), self.levels.get(i)) {
            (Some(lo), Some(&hi)) => {
                if x - lo <= hi - x {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(&hi)) => hi,
            (None, None) => unreachable!("levels are never empty"),
        }
    }

    /// Nearest lattice point (not necessarily inside the `phi` filter).
    pub fn snap(&self, v: &[f64]) -> Vec<f64> {
        match self.kind {
            LatticeKind::Constants => {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                vec![self.nearest_level(mean); self.nodes]
            }
            LatticeKind::Product => v.iter().map(|&x| self.nearest_level(x)).collect(),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive {
            name: "delta",
            value: delta,
        })
    }
}

/// Exact `omega(delta)` on a lattice compactum by pair enumeration.
pub fn modulus_bruteforce(k: &LatticeCompactum, delta: f64, prob: &ProblemSpec) -> Result<f64> {
    check_delta(delta)?;
    prob.check_nodes(k.nodes)?;
    let members = k.members()?;
    let m = members.len() as u128;
    let pairs = m * m.saturating_sub(1) / 2;
    if pairs > PAIR_LIMIT {
        return Err(Error::PairBudgetExceeded {
            pairs,
            limit: PAIR_LIMIT,
        });
    }
    let images: Vec<Vec<f64>> = members.iter().map(|v| prob.apply_values(v.values())).collect();

    // no pair can be farther apart than the per-node spread of the members
    let mut diameter = 0.0_f64;
    for node in 0..k.nodes {
        let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.values()[node]), hi.max(v.values()[node]))
        });
        if hi >= lo {
            diameter = diameter.max(hi - lo);
        }
    }

    // nonnegative floats order the same as their bit patterns
    let best = AtomicU64::new(0.0_f64.to_bits());
    (0..members.len()).into_par_iter().for_each(|i| {
        let mut local = f64::from_bits(best.load(Ordering::Relaxed));
        if local >= diameter {
            return;
        }
        for j in i + 1..members.len() {
            if max_abs_diff(&images[i], &images[j]) <= delta {
                let d = max_abs_diff(members[i].values(), members[j].values());
                if d > local {
                    local = d;
                    if local >= diameter {
                        break;
                    }
                }
            }
        }
        best.fetch_max(local.to_bits(), Ordering::Relaxed);
    });
    Ok(f64::from_bits(best.into_inner()))
}

#[derive(Debug, Clone, Copy)]
pub enum SearchDomain<'a> {
    /// The continuum `{phi <= c}` on an `nodes`-point grid.
    Grid { nodes: usize, spec: CompactumSpec },
    /// Pairs restricted to the members of a lattice compactum.
    Lattice(&'a LatticeCompactum),
}

/// Certified lower bound on `omega(delta)`: the best separation among
/// generated pairs that pass both constraints.
///
/// Candidate `i` uses direction `i / 3` of the sine, bump and random
/// dictionaries in turn. On the grid the pairs are `(-t d, t d)` and
/// `(0, t d)` with the largest admissible `t`; on a lattice a random member
/// `v` is paired with the snapped point `v + s d` for a random scale `s`.
/// The result is a running maximum over a fixed sequence, so it never
/// decreases with the budget.
pub fn modulus_search(
    domain: SearchDomain<'_>,
    delta: f64,
    prob: &ProblemSpec,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    check_delta(delta)?;
    let generator = |i: usize| match i % 3 {
        0 => Generator::Sine,
        1 => Generator::Bump,
        _ => Generator::RandomSearch,
    };
    match domain {
        SearchDomain::Grid { nodes, spec } => {
            GridFunction::zeros(nodes)?;
            prob.check_nodes(nodes)?;
            let mut directions = Vec::new();
            if spec.phi == Phi::SupNorm && delta > 0.0 {
                let k = sine_frequency(spec.c, delta)?;
                if nodes >= 20 * k {
                    directions.push(sine_direction(nodes, k as f64, 0.0));
                }
            }
            directions.extend((0..budget).map(|i| candidate_direction(generator(i), nodes, i / 3, seed)));
            let seps: Vec<f64> = directions
                .par_iter()
                .map(|d| grid_separation(d, &spec, delta, prob))
                .collect::<Result<_>>()?;
            Ok(seps.into_iter().fold(0.0, f64::max))
        }
        SearchDomain::Lattice(k) => {
            prob.check_nodes(k.nodes)?;
            let members = k.members()?;
            if members.is_empty() {
                return Ok(0.0);
            }
            let spread = k.levels[k.levels.len() - 1] - k.levels[0];
            let seps: Vec<f64> = (0..budget)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let mut rng = seeded_rng(seed, i as u64);
                    let v = &members[rng.gen_range(0..members.len())];
                    let mut d = candidate_direction(generator(i), k.nodes, i / 3, seed ^ 0x9e37_79b9);
                    let scale = max_abs(&d);
                    if scale == 0.0 {
                        return Ok(0.0);
                    }
                    let s = spread * rng.gen_range(-1.0..=1.0) / scale;
                    d.iter_mut().zip(v.values()).for_each(|(x, b)| *x = b + s * *x);
                    let w = k.snap(&d);
                    if k.spec.eval_values(&w)? > k.spec.c {
                        return Ok(0.0);
                    }
                    let gap = max_abs_diff(&prob.apply_values(v.values()), &prob.apply_values(&w));
                    Ok(if gap <= delta { max_abs_diff(v.values(), &w) } else { 0.0 })
                })
                .collect::<Result<_>>()?;
            Ok(seps.into_iter().fold(0.0, f64::max))
        }
    }
}

/// Best of the pairs `(-t d, t d)` and `(0, t d)` along `d`, verified.
fn grid_separation(d: &[f64], spec: &CompactumSpec, delta: f64, prob: &ProblemSpec) -> Result<f64> {
    let phi = spec.eval_values(d)?;
    let size = max_abs(d);
    if phi == 0.0 || size == 0.0 {
        return Ok(0.0);
    }
    let image = max_abs(&prob.apply_values(d));
    let mut best = 0.0_f64;
    for (width, sides) in [(2.0, [-1.0, 1.0]), (1.0, [0.0, 1.0])] {
        let mut t = spec.c / phi;
        if image > 0.0 {
            t = t.min(delta / (width * image));
        }
        // shrink by rounding hairs until both members verifiably qualify
        for _ in 0..64 {
            let v: Vec<f64> = d.iter().map(|x| sides[0] * t * x).collect();
            let w: Vec<f64> = d.iter().map(|x| sides[1] * t * x).collect();
            let ok = spec.eval_values(&v)? <= spec.c
                && spec.eval_values(&w)? <= spec.c
                && max_abs_diff(&prob.apply_values(&v), &prob.apply_values(&w)) <= delta;
            if ok {
                best = best.max(max_abs_diff(&v, &w));
                break;
            }
            t *= 1.0 - 1e-12;
        }
    }
    Ok(best)
}
