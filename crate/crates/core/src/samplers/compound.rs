//! Compound Poisson processes coupled through a shared Poisson clock, and
//! truncated Lévy processes (drift + Brownian part + compound Poisson jumps).

use super::{fill_rows, MvnFactor, RngStream};
use crate::error::{invalid, Error, Result};
use crate::levy::{first_moment, JumpTable, LevyDensity, LevyTriplet, TruncatedLevyMeasure};
use crate::orders::DiscreteMeasure;
use crate::sample::SampleMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `S_t = b0 t + sum_{j <= N_t} X_j` with `N` Poisson of rate `intensity`
/// and `X_j` i.i.d. from the jump law.
#[derive(Debug, Clone)]
pub struct CompoundPoissonSpec {
    pub drift: Vec<f64>,
    pub intensity: f64,
    table: Arc<JumpTable>,
}

impl CompoundPoissonSpec {
    /// Jump law given by a discrete probability distribution.
    pub fn new(drift: Vec<f64>, intensity: f64, jumps: &DiscreteMeasure) -> Result<Self> {
        if (jumps.mass() - 1.0).abs() > 1e-12 {
            return invalid(format!("jump distribution must have mass 1, got {}", jumps.mass()));
        }
        Self::from_table(drift, intensity, JumpTable::from_discrete(jumps)?)
    }

    /// Jump law given by a probability density (mass checked to 1e-9).
    pub fn with_density(drift: Vec<f64>, intensity: f64, density: &LevyDensity) -> Result<Self> {
        let table = JumpTable::from_density(density)?;
        if (table.mass() - 1.0).abs() > 1e-9 {
            return invalid(format!("jump density must integrate to 1, got {}", table.mass()));
        }
        Self::from_table(drift, intensity, table)
    }

    /// Intensity `||Fn||` and jump law `Fn / ||Fn||` of a truncated Lévy
    /// measure; `drift0` uses the zero-truncation convention.
    pub fn from_truncated(drift0: Vec<f64>, t: &TruncatedLevyMeasure) -> Result<Self> {
        let mass = t.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return invalid(format!("truncated measure has mass {mass}; need a finite positive mass"));
        }
        Self::from_table(drift0, mass, JumpTable::from_truncated(t)?)
    }

    pub fn from_table(drift: Vec<f64>, intensity: f64, table: JumpTable) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return invalid(format!("intensity must be positive and finite, got {intensity}"));
        }
        if drift.len() != table.dim() {
            return invalid(format!("drift has dimension {}, jumps {}", drift.len(), table.dim()));
        }
        Ok(Self { drift, intensity, table: Arc::new(table) })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn jump_table(&self) -> &JumpTable {
        &self.table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Coupling {
    /// Common jump times, independent jump sizes.
    SharedClock,
    /// Common jump times and one uniform per jump pushed through both
    /// quantile functions (one-dimensional only).
    SharedClockComonotone,
}

/// Two path sets on a common time grid. Row `i` of each matrix stacks the
/// path values at the grid times.
#[derive(Debug, Clone)]
pub struct CoupledPaths {
    pub times: Vec<f64>,
    pub dim: usize,
    pub paths1: SampleMatrix,
    pub paths2: SampleMatrix,
    pub jump_counts1: Vec<u64>,
    pub jump_counts2: Vec<u64>,
}

impl CoupledPaths {
    fn terminal(&self, m: &SampleMatrix) -> SampleMatrix {
        let d = self.dim;
        let off = (self.times.len() - 1) * d;
        let data = m.iter_rows().flat_map(|r| r[off..off + d].to_vec()).collect();
        SampleMatrix::new(d, data).expect("terminal slice")
    }

    pub fn terminal1(&self) -> SampleMatrix {
        self.terminal(&self.paths1)
    }

    pub fn terminal2(&self) -> SampleMatrix {
        self.terminal(&self.paths2)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("time grid must be nonempty, nonnegative and strictly increasing");
    }
    Ok(())
}

/// Simulates two compound Poisson processes driven by one Poisson clock.
pub fn sample_compound_poisson_coupled(
    spec1: &CompoundPoissonSpec,
    spec2: &CompoundPoissonSpec,
    t_grid: &[f64],
    n: usize,
    coupling: Coupling,
    stream: &RngStream,
) -> Result<CoupledPaths> {
    check_grid(t_grid)?;
    let lambda = spec1.intensity;
    if (spec1.intensity - spec2.intensity).abs() > 1e-12 * lambda.max(spec2.intensity) {
        return invalid(format!(
            "coupling needs equal intensities, got {} and {}",
            spec1.intensity, spec2.intensity
        ));
    }
    if spec1.dim() != spec2.dim() {
        return invalid("specs have different dimensions");
    }
    let d = spec1.dim();
    if coupling == Coupling::SharedClockComonotone && d > 1 {
        return Err(Error::Unsupported("comonotone jump coupling is only defined for d = 1".into()));
    }
    let m = t_grid.len();
    let block = m * d;
    let width = 2 * block + 2;
    let data = fill_rows(n, width, stream, |rng, row| {
        let (p1, rest) = row.split_at_mut(block);
        let (p2, counts) = rest.split_at_mut(block);
        let mut cum1 = vec![0.0; d];
        let mut cum2 = vec![0.0; d];
        let mut j1 = vec![0.0; d];
        let mut j2 = vec![0.0; d];
        let mut jumps = 0u64;
        let first: f64 = Exp1.sample(rng);
        let mut next = first / lambda;
        for (k, &t) in t_grid.iter().enumerate() {
            while next <= t {
                let u1: f64 = rng.random();
                let u2: f64 = match coupling {
                    Coupling::SharedClock => rng.random(),
                    Coupling::SharedClockComonotone => u1,
                };
                spec1.table.quantile_into(u1, &mut j1);
                spec2.table.quantile_into(u2, &mut j2);
                for i in 0..d {
                    cum1[i] += j1[i];
                    cum2[i] += j2[i];
                }
                jumps += 1;
                let e: f64 = Exp1.sample(rng);
                next += e / lambda;
            }
            for i in 0..d {
                p1[k * d + i] = spec1.drift[i] * t + cum1[i];
                p2[k * d + i] = spec2.drift[i] * t + cum2[i];
            }
        }
        counts[0] = jumps as f64;
        counts[1] = jumps as f64;
    });
    let mut a = Vec::with_capacity(n * block);
    let mut b = Vec::with_capacity(n * block);
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for row in data.chunks_exact(width) {
        a.extend_from_slice(&row[..block]);
        b.extend_from_slice(&row[block..2 * block]);
        c1.push(row[2 * block] as u64);
        c2.push(row[2 * block + 1] as u64);
    }
    Ok(CoupledPaths {
        times: t_grid.to_vec(),
        dim: d,
        paths1: SampleMatrix::new(block, a)?.with_provenance(stream.provenance("cp-coupled/1")),
        paths2: SampleMatrix::new(block, b)?.with_provenance(stream.provenance("cp-coupled/2")),
        jump_counts1: c1,
        jump_counts2: c2,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevyPathOptions {
    /// Return all grid values (stacked) instead of terminal values only.
    pub full_paths: bool,
}

/// Simulates the Lévy process with triplet `(b, Sigma, Fn)`: drift
/// `b - int x Fn(dx)` (so that `E S_t = b t`), Brownian part with covariance
/// `Sigma`, and compound Poisson jumps of intensity `||Fn||`.
pub fn sample_levy_truncated(
    triplet: &LevyTriplet,
    fn_: &TruncatedLevyMeasure,
    t_grid: &[f64],
    n: usize,
    stream: &RngStream,
    options: LevyPathOptions,
) -> Result<SampleMatrix> {
    check_grid(t_grid)?;
    let d = triplet.dim();
    if fn_.dim() != d {
        return invalid(format!("measure dimension {} differs from triplet dimension {d}", fn_.dim()));
    }
    let mass = fn_.mass();
    if !mass.is_finite() {
        return invalid("measure has infinite mass; truncate it first");
    }
    let compensator = if mass > 0.0 { first_moment(fn_)? } else { vec![0.0; d] };
    let drift0: Vec<f64> = triplet.drift.iter().zip(&compensator).map(|(b, c)| b - c).collect();
    let table = if mass > 0.0 { Some(JumpTable::from_truncated(fn_)?) } else { None };
    let factor = MvnFactor::new(&triplet.sigma)?;
    let m = t_grid.len();
    let width = if options.full_paths { m * d } else { d };
    let data = fill_rows(n, width, stream, |rng, row| {
        let mut level = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut w = vec![0.0; d];
        let mut jump = vec![0.0; d];
        let mut next = match &table {
            Some(_) => {
                let e: f64 = Exp1.sample(rng);
                e / mass
            }
            None => f64::INFINITY,
        };
        let mut prev = 0.0;
        for (k, &t) in t_grid.iter().enumerate() {
            let dt = t - prev;
            if dt > 0.0 {
                factor.sample_into(rng, dt.sqrt(), &mut z, &mut w);
                for i in 0..d {
                    level[i] += drift0[i] * dt + w[i];
                }
            }
            if let Some(tab) = &table {
                while next <= t {
                    tab.quantile_into(rng.random(), &mut jump);
                    for i in 0..d {
                        level[i] += jump[i];
                    }
                    let e: f64 = Exp1.sample(rng);
                    next += e / mass;
                }
            }
            if options.full_paths {
                row[k * d..(k + 1) * d].copy_from_slice(&level);
            } else if k == m - 1 {
                row.copy_from_slice(&level);
            }
            prev = t;
        }
    });
    Ok(SampleMatrix::new(width, data)?.with_provenance(stream.provenance("levy-truncated")))
}
