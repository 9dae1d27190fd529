//! Adversarial mixtures over nested exposure models and the mixture
//! lower bound on the minimax testing error.
//!
//! Both mixtures are driven by one uniform sign `s_{i,e0}` per unit and
//! coarse exposure. The null mixture uses it directly as the coarse
//! coefficient `α_{i,e0}`. The alternative multiplies it into a fixed
//! sign pattern `v_{e0}` over the split set of `e0`, which has both signs
//! whenever the split set has more than one element.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{Design, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::exposure::ExposureSpec;
use crate::intervention::Intervention;
use crate::model::ExposureOutcomeModel;
use crate::refinement::{check_refinement, RefinementReport};
use crate::risk::{Estimate, TestProcedure};
use crate::rng::{keyed_sign, substream, StreamRng};

/// Factorised laws up to this many coordinates are compared by expanding
/// the full product support.
pub const FULL_EXPANSION_CAP: usize = 12;

/// Widest sign table enumerated by [`mixture_error_sum_exact`].
const MAX_EXACT_SIGN_SLOTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixture {
    Null,
    Alt,
}

/// How the alternative's split-set sign vectors `v_{e0}` are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignPattern {
    /// First element of each split set `+1`, the rest `-1`.
    FirstPositive,
    /// Seeded uniform signs, redrawn until both signs occur.
    Seeded(u64),
}

#[derive(Clone, Debug)]
pub struct MixturePair {
    coarse: ExposureSpec,
    fine: ExposureSpec,
    report: RefinementReport,
    /// `pattern[i][e1]`: entry of `v_{π(e1)}` at `e1`'s split-set position.
    pattern: Vec<Vec<f64>>,
    /// Perturbation: alternative outcome of a unit pinned to a sign.
    forced_alt: Option<(usize, f64)>,
}

/// SUTVA mixtures: constant-effect null against no-interference alternative,
/// with `β₁ = −β₀` under the alternative.
pub fn sutva_mixtures(n: usize) -> Result<MixturePair> {
    if n == 0 {
        return Err(Error::usage("sutva mixtures need n >= 1"));
    }
    let coarse = ExposureSpec::no_effect(n);
    let fine = ExposureSpec::own_treatment(n);
    let report = check_refinement(&coarse, &fine)?;
    general_mixtures(coarse, fine, report, SignPattern::FirstPositive)
}

/// Mixtures for any nested pair of exposure specs.
pub fn general_mixtures(
    coarse: ExposureSpec,
    fine: ExposureSpec,
    report: RefinementReport,
    signs: SignPattern,
) -> Result<MixturePair> {
    report.require()?;
    if report.n() != coarse.n() || fine.n() != coarse.n() {
        return Err(Error::usage("specs and refinement report disagree on n"));
    }
    let mut pattern = Vec::with_capacity(report.n());
    for (i, sets) in report.split_sets.iter().enumerate() {
        let mut row = vec![0.0; report.maps[i].len()];
        let mut rng = match signs {
            SignPattern::Seeded(seed) => Some(substream(seed, i as u64)),
            SignPattern::FirstPositive => None,
        };
        for set in sets {
            let v = match rng.as_mut() {
                None => (0..set.len()).map(|k| if k == 0 { 1.0 } else { -1.0 }).collect(),
                Some(r) => seeded_sign_vector(set.len(), r),
            };
            for (&e1, s) in set.iter().zip(v) {
                row[e1 as usize] = s;
            }
        }
        pattern.push(row);
    }
    Ok(MixturePair {
        coarse,
        fine,
        report,
        pattern,
        forced_alt: None,
    })
}

fn seeded_sign_vector(len: usize, rng: &mut StreamRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        if len == 1 || (v.contains(&1.0) && v.contains(&-1.0)) {
            return v;
        }
    }
}

impl MixturePair {
    pub fn n(&self) -> usize {
        self.coarse.n()
    }

    pub fn coarse(&self) -> &ExposureSpec {
        &self.coarse
    }

    pub fn fine(&self) -> &ExposureSpec {
        &self.fine
    }

    pub fn report(&self) -> &RefinementReport {
        &self.report
    }

    /// The split-set sign vector `v_{e0}` of `unit`.
    pub fn sign_vector(&self, unit: usize, e0: usize) -> Vec<f64> {
        self.report.split_sets[unit][e0]
            .iter()
            .map(|&e1| self.pattern[unit][e1 as usize])
            .collect()
    }

    /// A perturbed copy whose alternative pins `unit`'s outcome to `sign`.
    ///
    /// Only meant to show that the lower bound reacts to a real difference
    /// between the two observed-data laws.
    pub fn with_forced_alt(&self, unit: usize, sign: f64) -> Result<Self> {
        if unit >= self.n() || sign.abs() != 1.0 {
            return Err(Error::usage("forced outcome needs a valid unit and a sign of ±1"));
        }
        Ok(Self {
            forced_alt: Some((unit, sign)),
            ..self.clone()
        })
    }

    /// Number of independent signs per unit (one per coarse exposure).
    pub fn sign_slots(&self) -> Vec<usize> {
        self.report.split_sets.iter().map(Vec::len).collect()
    }

    /// Builds the draw determined by the sign table `signs[i][e0]`.
    pub fn model_from_signs(&self, which: Mixture, signs: &[Vec<f64>]) -> Result<ExposureOutcomeModel> {
        match which {
            Mixture::Null => ExposureOutcomeModel::new(self.coarse.clone(), signs.to_vec()),
            Mixture::Alt => {
                let coeffs = self
                    .report
                    .maps
                    .iter()
                    .enumerate()
                    .map(|(i, map)| {
                        map.iter()
                            .enumerate()
                            .map(|(e1, &e0)| self.alt_coefficient(i, e1, signs[i][e0 as usize]))
                            .collect()
                    })
                    .collect();
                ExposureOutcomeModel::new(self.fine.clone(), coeffs)
            }
        }
    }

    /// Materialises one full draw from the chosen mixture.
    pub fn draw<R: Rng + ?Sized>(&self, which: Mixture, rng: &mut R) -> ExposureOutcomeModel {
        let signs: Vec<Vec<f64>> = self
            .sign_slots()
            .into_iter()
            .map(|k| (0..k).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect())
            .collect();
        self.model_from_signs(which, &signs).expect("mixture draws are bounded")
    }

    #[inline]
    fn alt_coefficient(&self, unit: usize, e1: usize, sign: f64) -> f64 {
        match self.forced_alt {
            Some((u, forced)) if u == unit => forced,
            _ => sign * self.pattern[unit][e1],
        }
    }

    /// Observed outcomes `y(z)` of the draw identified by `key`.
    ///
    /// Coefficients are realised lazily from a counter-based hash of
    /// `(key, unit, coarse exposure)`, so no exposure table is built. Equal
    /// keys give the same potential outcome function at every `z`.
    pub fn observe(&self, which: Mixture, z: &Intervention, key: u64) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let e0 = self.coarse.exposure_of(i, z);
                let s = keyed_sign(key, i, e0);
                match which {
                    Mixture::Null => s,
                    Mixture::Alt => {
                        let e1 = self.fine.exposure_of(i, z) as usize;
                        debug_assert_eq!(self.report.maps[i][e1], e0);
                        self.alt_coefficient(i, e1, s)
                    }
                }
            })
            .collect()
    }

    /// Exact law of `y(z)` under the chosen mixture.
    ///
    /// Each coordinate reads exactly one coefficient, and distinct units
    /// draw their signs independently, so the law factorises. Coordinate
    /// `i` equals `s · c` for a uniform sign `s` and a fixed multiplier
    /// `c`, or is pinned when the pair has been perturbed.
    pub fn marginal(&self, which: Mixture, z: &Intervention) -> MarginalDist {
        let plus = (0..self.n())
            .map(|i| match which {
                Mixture::Null => sign_law(1.0),
                Mixture::Alt => match self.forced_alt {
                    Some((u, forced)) if u == i => point_sign_law(forced),
                    _ => sign_law(self.pattern[i][self.fine.exposure_of(i, z) as usize]),
                },
            })
            .collect();
        MarginalDist::FactorizedSigns(plus)
    }
}

/// `P(s·c = +1)` for uniform `s ∈ {±1}` and fixed `c ∈ {±1}`.
fn sign_law(c: f64) -> f64 {
    0.5 * ((c == 1.0) as u8 as f64) + 0.5 * ((-c == 1.0) as u8 as f64)
}

fn point_sign_law(c: f64) -> f64 {
    (c == 1.0) as u8 as f64
}

/// Distribution of an observed outcome vector.
#[derive(Clone, Debug, PartialEq)]
pub enum MarginalDist {
    /// Independent coordinates on `{−1, +1}`; entry `i` is `P(y_i = +1)`.
    FactorizedSigns(Vec<f64>),
    /// Explicit atoms keyed by the bit patterns of the outcome vector.
    FiniteSupport { n: usize, atoms: BTreeMap<Vec<u64>, f64> },
}

fn key_of(y: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same outcome
    y.iter().map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() }).collect()
}

impl MarginalDist {
    pub fn point_mass(y: &[f64]) -> Self {
        Self::from_atoms(y.len(), vec![(y.to_vec(), 1.0)]).expect("a point mass is a distribution")
    }

    /// Merges duplicate atoms; probabilities must be nonnegative and sum to 1.
    pub fn from_atoms(n: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut total = 0.0;
        for (y, p) in atoms {
            if y.len() != n {
                return Err(Error::usage(format!("atom of length {} in a law over R^{n}", y.len())));
            }
            if !(p >= 0.0) {
                return Err(Error::usage("negative probability"));
            }
            total += p;
            *map.entry(key_of(&y)).or_insert(0.0) += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::usage(format!("atoms sum to {total}, not 1")));
        }
        Ok(Self::FiniteSupport { n, atoms: map })
    }

    pub fn uniform_signs(n: usize) -> Self {
        Self::FactorizedSigns(vec![0.5; n])
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::FactorizedSigns(p) => p.len(),
            Self::FiniteSupport { n, .. } => *n,
        }
    }

    /// Expands into explicit atoms; at most [`DEFAULT_ENUMERATION_CAP`] coordinates.
    pub fn expand(&self) -> Result<Self> {
        match self {
            Self::FiniteSupport { .. } => Ok(self.clone()),
            Self::FactorizedSigns(plus) => {
                let n = plus.len();
                if n > DEFAULT_ENUMERATION_CAP {
                    return Err(Error::usage(format!("cannot expand a product law over {n} coordinates")));
                }
                let mut atoms = BTreeMap::new();
                for mask in 0..1u64 << n {
                    let mut p = 1.0;
                    let mut y = Vec::with_capacity(n);
                    for (k, &q) in plus.iter().enumerate() {
                        if (mask >> k) & 1 == 1 {
                            p *= q;
                            y.push(1.0);
                        } else {
                            p *= 1.0 - q;
                            y.push(-1.0);
                        }
                    }
                    if p > 0.0 {
                        *atoms.entry(key_of(&y)).or_insert(0.0) += p;
                    }
                }
                Ok(Self::FiniteSupport { n, atoms })
            }
        }
    }

    /// `(outcome vector, probability)` pairs; expands factorised laws.
    pub fn atoms(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        match self.expand()? {
            Self::FiniteSupport { atoms, .. } => Ok(atoms
                .into_iter()
                .map(|(k, p)| (k.into_iter().map(f64::from_bits).collect(), p))
                .collect()),
            Self::FactorizedSigns(_) => unreachable!(),
        }
    }
}

fn finite_tv(a: &BTreeMap<Vec<u64>, f64>, b: &BTreeMap<Vec<u64>, f64>) -> f64 {
    let mut l1 = 0.0;
    for (k, &p) in a {
        l1 += (p - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &q) in b {
        if !a.contains_key(k) {
            l1 += q;
        }
    }
    (0.5 * l1).clamp(0.0, 1.0)
}

/// Exact total-variation distance, half the L1 distance between the laws.
///
/// Product laws with at most [`FULL_EXPANSION_CAP`] coordinates are
/// expanded in full. Larger product laws drop the coordinates on which
/// both sides agree, which leaves the distance unchanged, and expand only
/// the rest. Identical coordinate laws therefore give exactly zero.
pub fn tv_distance(p: &MarginalDist, q: &MarginalDist) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::usage(format!("laws over R^{} and R^{}", p.dim(), q.dim())));
    }
    if let (MarginalDist::FactorizedSigns(a), MarginalDist::FactorizedSigns(b)) = (p, q) {
        if a.len() > FULL_EXPANSION_CAP {
            let (da, db): (Vec<f64>, Vec<f64>) = a.iter().zip(b).filter(|(x, y)| x != y).map(|(x, y)| (*x, *y)).unzip();
            if da.is_empty() {
                return Ok(0.0);
            }
            return tv_distance(&MarginalDist::FactorizedSigns(da), &MarginalDist::FactorizedSigns(db));
        }
    }
    match (p.expand()?, q.expand()?) {
        (MarginalDist::FiniteSupport { atoms: a, .. }, MarginalDist::FiniteSupport { atoms: b, .. }) => {
            Ok(finite_tv(&a, &b))
        }
        _ => unreachable!("expand always yields finite support"),
    }
}

/// Per-intervention TV distances and the resulting lower bound.
#[derive(Clone, Debug, Serialize)]
pub struct TvProfile {
    /// `(z, D(z), TV(P₀ᶻ, P₁ᶻ))` for every `z` in the design's support.
    pub per_z: Vec<(Intervention, f64, f64)>,
    pub max_tv: f64,
    /// `1 − E_{z∼D}[TV]`.
    pub risk_bound: f64,
}

pub fn tv_profile(pair: &MixturePair, design: &Design) -> Result<TvProfile> {
    let n = pair.n();
    let per_z = design
        .enumerate(n)?
        .map(|(z, w)| {
            let tv = tv_distance(&pair.marginal(Mixture::Null, &z), &pair.marginal(Mixture::Alt, &z))?;
            Ok((z, w, tv))
        })
        .collect::<Result<Vec<_>>>()?;
    let expected: f64 = per_z.iter().map(|(_, w, tv)| w * tv).sum();
    let max_tv = per_z.iter().map(|t| t.2).fold(0.0, f64::max);
    Ok(TvProfile {
        per_z,
        max_tv,
        risk_bound: 1.0 - expected,
    })
}

/// Lower bound `1 − E_{z∼D}[TV(P₀ᶻ, P₁ᶻ)]` on the minimax testing error.
pub fn risk_lower_bound(pair: &MixturePair, design: &Design) -> Result<f64> {
    Ok(tv_profile(pair, design)?.risk_bound)
}

/// Monte Carlo estimate of `E_{μ₀}E_z[φ] + E_{μ₁}E_z[1 − φ]`.
///
/// Replication `r` reads substream `r` of `seed`: it draws one `z`, one
/// draw from each mixture, and the test's decisions on both.
pub fn mixture_error_sum(proc: &TestProcedure, pair: &MixturePair, reps: usize, seed: u64) -> Result<Estimate> {
    if reps < 2 {
        return Err(Error::usage("mixture_error_sum needs at least 2 replications"));
    }
    let n = pair.n();
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let z = proc.design.sample(n, &mut rng);
            let y0 = pair.observe(Mixture::Null, &z, rng.random());
            let reject_null = proc.decide(&z, &y0, &mut rng);
            let y1 = pair.observe(Mixture::Alt, &z, rng.random());
            let reject_alt = proc.decide(&z, &y1, &mut rng);
            reject_null as u8 as f64 + (!reject_alt) as u8 as f64
        })
        .collect();
    Ok(Estimate::from_samples(&values))
}

/// The same quantity by full enumeration over sign tables and `Ω`.
pub fn mixture_error_sum_exact(proc: &TestProcedure, pair: &MixturePair) -> Result<f64> {
    let n = pair.n();
    let slots: Vec<usize> = pair.sign_slots();
    let total_slots: usize = slots.iter().sum();
    if total_slots > MAX_EXACT_SIGN_SLOTS {
        return Err(Error::usage(format!(
            "exact mixture enumeration over 2^{total_slots} sign tables is too large"
        )));
    }
    let atoms: Vec<(Intervention, f64)> = proc.design.enumerate(n)?.collect();
    let draw_weight = 0.5f64.powi(total_slots as i32);
    let sum = (0..1u64 << total_slots)
        .into_par_iter()
        .map(|mask| -> Result<f64> {
            let mut bit = 0;
            let signs: Vec<Vec<f64>> = slots
                .iter()
                .map(|&k| {
                    (0..k)
                        .map(|_| {
                            let s = if (mask >> bit) & 1 == 1 { 1.0 } else { -1.0 };
                            bit += 1;
                            s
                        })
                        .collect()
                })
                .collect();
            let null = pair.model_from_signs(Mixture::Null, &signs)?;
            let alt = pair.model_from_signs(Mixture::Alt, &signs)?;
            let mut acc = 0.0;
            for (z, w) in &atoms {
                let phi0 = proc.test.rejection_probability(z, &null.evaluate(z));
                let phi1 = proc.test.rejection_probability(z, &alt.evaluate(z));
                acc += w * (phi0 + 1.0 - phi1);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(sum * draw_weight)
}
