//! Specification test of no interference against the network
//! linear-in-means model under a Bernoulli design.
//!
//! The separation `g(y) = (1/n) Σ β₃ᵢ²` is estimated by
//! `ĝ = (1/n) Σ_{i∉T} W_i Y_i²`, where `W_i` depends only on the treated
//! neighbour fraction `T_i` and satisfies `E[W] = E[T W] = 0`,
//! `E[T² W] = 1`. Units with fewer than two neighbours (the set `T`)
//! get weight zero.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervention::Intervention;
use crate::network::Network;

/// Tolerance on `|Y_i| <= 1` for outcomes coming out of float arithmetic.
pub const OUTCOME_BOUND_SLACK: f64 = 1e-9;

const DENOMINATOR_FLOOR: f64 = 1e-12;

pub const MAX_ENUMERATED_DEGREE: usize = 24;

/// Raw moments of `T = Binomial(d, p) / d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractionMoments {
    pub degree: usize,
    pub p: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub var: f64,
}

impl FractionMoments {
    /// Closed forms from the falling-factorial expansion of binomial moments.
    pub fn new(d: usize, p: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::usage("fraction moments need degree >= 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::usage(format!("treatment probability must lie in (0, 1), got {p}")));
        }
        let df = d as f64;
        let f2 = df * (df - 1.0);
        let f3 = f2 * (df - 2.0);
        let f4 = f3 * (df - 3.0);
        let m1 = p;
        let m2 = (df * p + f2 * p.powi(2)) / df.powi(2);
        let m3 = (df * p + 3.0 * f2 * p.powi(2) + f3 * p.powi(3)) / df.powi(3);
        let m4 = (df * p + 7.0 * f2 * p.powi(2) + 6.0 * f3 * p.powi(3) + f4 * p.powi(4)) / df.powi(4);
        Ok(Self {
            degree: d,
            p,
            m1,
            m2,
            m3,
            m4,
            var: p * (1.0 - p) / df,
        })
    }

    /// Moments by brute force over all `2^d` neighbour assignments.
    pub fn enumerated(d: usize, p: f64) -> Result<Self> {
        Self::new(d, p)?;
        if d > MAX_ENUMERATED_DEGREE {
            return Err(Error::usage(format!("enumerated moments need degree <= {MAX_ENUMERATED_DEGREE}")));
        }
        let df = d as f64;
        let mut m = [0.0f64; 4];
        for mask in 0..1u64 << d {
            let k = mask.count_ones() as i32;
            let mass = p.powi(k) * (1.0 - p).powi(d as i32 - k);
            let t = k as f64 / df;
            let mut tp = 1.0;
            for slot in m.iter_mut() {
                tp *= t;
                *slot += mass * tp;
            }
        }
        Ok(Self {
            degree: d,
            p,
            m1: m[0],
            m2: m[1],
            m3: m[2],
            m4: m[3],
            var: m[1] - m[0] * m[0],
        })
    }

    /// `E[T³] − E[T²]E[T]`.
    fn skew_term(&self) -> f64 {
        self.m3 - self.m2 * self.m1
    }

    pub fn weight_denominator(&self) -> f64 {
        self.var * (self.m4 - self.m2 * self.m2) - self.skew_term().powi(2)
    }
}

/// Riesz weight for a variable with the given first four moments.
///
/// `W = [Var(T)(T² − E T²) − (E T³ − E T² E T)(T − E T)] / denominator`.
pub fn weight_general(t: f64, moments: &FractionMoments) -> Result<f64> {
    let den = moments.weight_denominator();
    if den.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::DegenerateWeight {
            degrees: vec![moments.degree],
            p: moments.p,
        });
    }
    let num = moments.var * (t * t - moments.m2) - moments.skew_term() * (t - moments.m1);
    Ok(num / den)
}

/// The weight at `p = 1/2`: `8d² (1 − 1/d)⁻¹ [(T² − E T²) − (T − E T)]`.
pub fn weight_half(t: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::DegenerateWeight { degrees: vec![d], p: 0.5 });
    }
    let df = d as f64;
    let m1 = 0.5;
    let m2 = (df * 0.5 + df * (df - 1.0) * 0.25) / (df * df);
    Ok(8.0 * df * df / (1.0 - 1.0 / df) * ((t * t - m2) - (t - m1)))
}

/// `T_i = |N(i)|⁻¹ Σ_{j∈N(i)} z_j` for every unit.
pub fn fraction_treated(network: &Network, z: &Intervention) -> Result<Vec<f64>> {
    if z.len() != network.n() {
        return Err(Error::usage(format!("intervention has {} units, network {}", z.len(), network.n())));
    }
    (0..network.n())
        .map(|i| {
            let nbrs = network.neighbors(i);
            if nbrs.is_empty() {
                return Err(Error::usage(format!("unit {i} has no neighbours")));
            }
            Ok(nbrs.iter().filter(|&&j| z.get(j)).count() as f64 / nbrs.len() as f64)
        })
        .collect()
}

/// Precomputed per-degree weights for one network and treatment probability.
///
/// `W_i` takes only `d_i + 1` values, so the table is indexed by
/// `(degree, treated-neighbour count)`.
#[derive(Clone, Debug)]
pub struct SeparationEstimator {
    network: Arc<Network>,
    p: f64,
    /// `table[d][k]`: weight of a degree-`d` unit with `k` treated neighbours;
    /// empty for excluded degrees.
    table: Vec<Vec<f64>>,
    excluded: Vec<usize>,
}

impl SeparationEstimator {
    /// Uses the closed-form weight at `p = 1/2` and the general weight otherwise.
    pub fn new(network: Arc<Network>, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::usage(format!("treatment probability must lie in (0, 1), got {p}")));
        }
        let max_d = network.max_degree();
        let mut present = vec![false; max_d + 1];
        for d in network.degrees() {
            present[d] = true;
        }
        let mut table = vec![Vec::new(); max_d + 1];
        let mut bad = Vec::new();
        for d in (2..=max_d).filter(|&d| present[d]) {
            let row: Result<Vec<f64>> = if p == 0.5 {
                (0..=d).map(|k| weight_half(k as f64 / d as f64, d)).collect()
            } else {
                let m = FractionMoments::new(d, p)?;
                (0..=d).map(|k| weight_general(k as f64 / d as f64, &m)).collect()
            };
            match row {
                Ok(r) => table[d] = r,
                Err(Error::DegenerateWeight { .. }) => bad.push(d),
                Err(e) => return Err(e),
            }
        }
        if !bad.is_empty() {
            return Err(Error::DegenerateWeight { degrees: bad, p });
        }
        let excluded = (0..network.n()).filter(|&i| network.degree(i) < 2).collect();
        Ok(Self {
            network,
            p,
            table,
            excluded,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    /// Units with degree below two, which carry weight zero.
    pub fn excluded_units(&self) -> &[usize] {
        &self.excluded
    }

    /// Per-unit weights `W_i` at `z`.
    pub fn weights(&self, z: &Intervention) -> Vec<f64> {
        (0..self.network.n()).map(|i| self.weight(i, z)).collect()
    }

    #[inline]
    pub fn weight(&self, unit: usize, z: &Intervention) -> f64 {
        let nbrs = self.network.neighbors(unit);
        if nbrs.len() < 2 {
            return 0.0;
        }
        let k = nbrs.iter().filter(|&&j| z.get(j)).count();
        self.table[nbrs.len()][k]
    }

    /// `ĝ = (1/n) Σ W_i Y_i²`.
    pub fn estimate(&self, z: &Intervention, y: &[f64]) -> Result<f64> {
        let n = self.network.n();
        if y.len() != n || z.len() != n {
            return Err(Error::usage(format!(
                "outcomes ({}) and intervention ({}) must both have {n} entries",
                y.len(),
                z.len()
            )));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0 + OUTCOME_BOUND_SLACK)) {
            return Err(Error::usage(format!("outcome {v} of unit {i} exceeds the bound 1")));
        }
        Ok(self.estimate_unchecked(z, y))
    }

    pub(crate) fn estimate_unchecked(&self, z: &Intervention, y: &[f64]) -> f64 {
        let total: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &yi)| self.weight(i, z) * yi * yi)
            .sum();
        total / self.network.n() as f64
    }
}

/// `ĝ` for a single observation.
pub fn estimate_separation(network: &Network, z: &Intervention, y: &[f64], p: f64) -> Result<f64> {
    SeparationEstimator::new(Arc::new(network.clone()), p)?.estimate(z, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdVariant {
    /// `τ = (d_max⁵ / n)^{1/4}`, for networks with every degree >= 2.
    Main,
    /// `τ = (|T|/n ∨ d_max^{5/2} / n^{1/2})^{1/2}`.
    General,
}

impl std::str::FromStr for ThresholdVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(Self::Main),
            "general" => Ok(Self::General),
            other => Err(Error::usage(format!("unknown threshold variant {other:?} (main | general)"))),
        }
    }
}

impl std::fmt::Display for ThresholdVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Main => "main",
            Self::General => "general",
        })
    }
}

/// Number of units with degree below two.
pub fn low_degree_count(network: &Network) -> usize {
    network.degrees().iter().filter(|&&d| d < 2).count()
}

pub fn threshold(network: &Network, variant: ThresholdVariant) -> f64 {
    threshold_from_parts(network.n(), network.max_degree(), low_degree_count(network), variant)
}

pub fn threshold_from_parts(n: usize, d_max: usize, low_degree: usize, variant: ThresholdVariant) -> f64 {
    let n = n as f64;
    let d = d_max as f64;
    match variant {
        ThresholdVariant::Main => (d.powi(5) / n).powf(0.25),
        ThresholdVariant::General => rate_term(n, d, low_degree).sqrt(),
    }
}

/// `|T|/n ∨ d_max^{5/2} / n^{1/2}`.
fn rate_term(n: f64, d: f64, low_degree: usize) -> f64 {
    (low_degree as f64 / n).max(d.powf(2.5) / n.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct LimTestResult {
    pub g_hat: f64,
    pub tau: f64,
    pub reject: bool,
    pub excluded_units: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Threshold test `φ = 1{ĝ >= τ}`; equality rejects.
pub fn run_lim_test(network: &Network, z: &Intervention, y: &[f64], p: f64, variant: ThresholdVariant) -> Result<LimTestResult> {
    run_lim_test_detailed(network, z, y, p, variant, false)
}

/// As [`run_lim_test`], optionally reporting the per-unit weights `W_i`.
pub fn run_lim_test_detailed(
    network: &Network,
    z: &Intervention,
    y: &[f64],
    p: f64,
    variant: ThresholdVariant,
    include_weights: bool,
) -> Result<LimTestResult> {
    let est = SeparationEstimator::new(Arc::new(network.clone()), p)?;
    let g_hat = est.estimate(z, y)?;
    let tau = threshold(network, variant);
    Ok(LimTestResult {
        g_hat,
        tau,
        reject: decide(g_hat, tau),
        excluded_units: est.excluded_units().to_vec(),
        weights: include_weights.then(|| est.weights(z)),
    })
}

#[inline]
pub fn decide(g_hat: f64, tau: f64) -> bool {
    g_hat >= tau
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorBounds {
    /// `2⁹ d_max⁵ / n`.
    pub variance: f64,
    /// `2⁵ (|T|/n ∨ d_max^{5/2} / n^{1/2})`.
    pub rmse: f64,
}

pub fn error_bounds(network: &Network) -> ErrorBounds {
    error_bounds_from_parts(network.n(), network.max_degree(), low_degree_count(network))
}

pub fn error_bounds_from_parts(n: usize, d_max: usize, low_degree: usize) -> ErrorBounds {
    let nf = n as f64;
    let d = d_max as f64;
    ErrorBounds {
        variance: 512.0 * d.powi(5) / nf,
        rmse: 32.0 * rate_term(nf, d, low_degree),
    }
}
