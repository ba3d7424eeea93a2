//! Monte Carlo sampling of measurement records from the exact branch
//! distribution, and a chi-square check of samples against it.
//!
//! Shots are split into fixed-size shards. Shard `k` draws from a ChaCha8
//! stream seeded with `seed` on stream `k`, so a histogram depends only on
//! the seed and shot count, never on the execution strategy.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::circuit::{simulate, CircuitGraph, Record, RunResult};
use crate::error::{PhotonicError, Result};
use crate::fock::PhotonicState;
use crate::par::{self, Execution};

pub const SHARD_SIZE: u64 = 16_384;

/// Expected count below which bins are pooled before the chi-square test.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub shots: u64,
    pub seed: u64,
    pub counts: BTreeMap<Record, u64>,
}

impl Histogram {
    pub fn frequency(&self, record: &Record) -> f64 {
        self.counts.get(record).copied().unwrap_or(0) as f64 / self.shots as f64
    }
}

/// Cumulative distribution over records in record order.
struct Cdf {
    records: Vec<Record>,
    cumulative: Vec<f64>,
}

impl Cdf {
    fn new(dist: &BTreeMap<Record, f64>) -> Result<Self> {
        let total: f64 = dist.values().sum();
        if !(total > 0.0) {
            return Err(PhotonicError::ZeroNorm);
        }
        let mut acc = 0.0;
        let mut records = Vec::with_capacity(dist.len());
        let mut cumulative = Vec::with_capacity(dist.len());
        for (r, p) in dist {
            acc += p / total;
            records.push(r.clone());
            cumulative.push(acc);
        }
        Ok(Self { records, cumulative })
    }

    fn draw(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.records.len() - 1)
    }
}

/// Draws `shots` records from `dist` (normalized internally).
pub fn sample_distribution(dist: &BTreeMap<Record, f64>, shots: u64, seed: u64, exec: Execution) -> Result<Histogram> {
    if shots == 0 {
        return Err(PhotonicError::InvalidInput("shots must be positive".into()));
    }
    let cdf = Cdf::new(dist)?;
    let shards = shots.div_ceil(SHARD_SIZE) as usize;
    let partial = par::map_range(exec, shards, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let n = SHARD_SIZE.min(shots - k as u64 * SHARD_SIZE);
        let mut counts = vec![0u64; cdf.records.len()];
        for _ in 0..n {
            counts[cdf.draw(rng.random::<f64>())] += 1;
        }
        counts
    });
    let mut counts = BTreeMap::new();
    for shard in partial {
        for (i, n) in shard.into_iter().enumerate() {
            if n > 0 {
                *counts.entry(cdf.records[i].clone()).or_insert(0) += n;
            }
        }
    }
    Ok(Histogram { shots, seed, counts })
}

pub fn sample_result(result: &RunResult, shots: u64, seed: u64, exec: Execution) -> Result<Histogram> {
    sample_distribution(&result.record_distribution(), shots, seed, exec)
}

/// Simulates once, then samples records from the exact distribution.
pub fn sample(circuit: &CircuitGraph, input: &PhotonicState, shots: u64, seed: u64) -> Result<Histogram> {
    sample_with(circuit, input, shots, seed, Execution::default())
}

pub fn sample_with(circuit: &CircuitGraph, input: &PhotonicState, shots: u64, seed: u64, exec: Execution) -> Result<Histogram> {
    let result = simulate(circuit, input)?;
    sample_result(&result, shots, seed, exec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    /// Bins left after pooling sparse ones.
    pub bins: usize,
}

/// Pearson goodness of fit of `hist` against `dist`. Bins expecting fewer
/// than [`MIN_EXPECTED`] counts are pooled.
pub fn chi_square(hist: &Histogram, dist: &BTreeMap<Record, f64>) -> Result<ChiSquareTest> {
    let total: f64 = dist.values().sum();
    if !(total > 0.0) {
        return Err(PhotonicError::ZeroNorm);
    }
    for r in hist.counts.keys() {
        if dist.get(r).copied().unwrap_or(0.0) <= 0.0 {
            return Ok(ChiSquareTest { statistic: f64::INFINITY, dof: 0, p_value: 0.0, bins: 0 });
        }
    }
    let n = hist.shots as f64;
    let mut cells: Vec<(f64, f64)> = dist
        .iter()
        .map(|(r, p)| (n * p / total, hist.counts.get(r).copied().unwrap_or(0) as f64))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for (e, o) in cells {
        if e < MIN_EXPECTED || pending.0 > 0.0 && pending.0 < MIN_EXPECTED {
            pending.0 += e;
            pending.1 += o;
            if pending.0 >= MIN_EXPECTED {
                pooled.push(pending);
                pending = (0.0, 0.0);
            }
        } else {
            pooled.push((e, o));
        }
    }
    if pending.0 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => pooled.push(pending),
        }
    }
    let statistic: f64 = pooled.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1) as u32;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).map_err(|e| PhotonicError::InvalidInput(e.to_string()))?
    };
    Ok(ChiSquareTest { statistic, dof, p_value, bins: pooled.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, v: u32) -> Record {
        let mut r = Record::default();
        r.insert(id, v);
        r
    }

    fn dist() -> BTreeMap<Record, f64> {
        [(rec("D", 0), 0.7), (rec("D", 1), 0.25), (rec("D", 2), 0.05)].into_iter().collect()
    }

    #[test]
    fn strategies_give_identical_histograms() {
        let a = sample_distribution(&dist(), 100_000, 7, Execution::Sequential).unwrap();
        let b = sample_distribution(&dist(), 100_000, 7, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 100_000);
        let c = sample_distribution(&dist(), 100_000, 8, Execution::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_branch_is_certain() {
        let d: BTreeMap<Record, f64> = [(rec("D", 1), 1.0)].into_iter().collect();
        let h = sample_distribution(&d, 1000, 1, Execution::default()).unwrap();
        assert_eq!(h.counts[&rec("D", 1)], 1000);
        let t = chi_square(&h, &d).unwrap();
        assert_eq!(t.dof, 0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn fit_accepts_true_and_rejects_wrong_distribution() {
        let h = sample_distribution(&dist(), 100_000, 3, Execution::default()).unwrap();
        assert!(chi_square(&h, &dist()).unwrap().p_value > 0.001);
        let wrong: BTreeMap<Record, f64> = [(rec("D", 0), 0.6), (rec("D", 1), 0.35), (rec("D", 2), 0.05)].into_iter().collect();
        assert!(chi_square(&h, &wrong).unwrap().p_value < 1e-6);
    }

    #[test]
    fn impossible_record_fails() {
        let h = Histogram { shots: 10, seed: 0, counts: [(rec("X", 1), 10)].into_iter().collect() };
        assert_eq!(chi_square(&h, &dist()).unwrap().p_value, 0.0);
    }

    #[test]
    fn zero_shots_rejected() {
        assert!(sample_distribution(&dist(), 0, 0, Execution::default()).is_err());
    }
}
