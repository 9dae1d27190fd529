//! Type I / Type II / overall testing error for arbitrary testing
//! procedures, by exact enumeration or seeded Monte Carlo.
//!
//! The worst case over a model class is approximated by the maximum over
//! an explicit list of models, so every reported error is a lower bound
//! on the corresponding supremum.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::intervention::Intervention;
use crate::lim::{decide, threshold, SeparationEstimator, ThresholdVariant};
use crate::model::{ExposureOutcomeModel, LimModel, OutcomeModel};
use crate::network::{gen_k_regular, Network};
use crate::rng::{derive_seed, substream};
use crate::separation::SeparationFunctional;

/// Relative slack when checking `g(y) >= δ` for models built to sit
/// exactly on the boundary.
const SEPARATION_SLACK: f64 = 1e-12;

/// Spread below which a two-sample comparison is treated as degenerate.
const DEGENERATE_SPREAD: f64 = 1e-12;

/// A statistical test `φ(z, y)`.
///
/// Returns the probability of rejecting: 0 or 1 for deterministic tests,
/// anything in between for tests that randomise internally. Monte Carlo
/// harnesses realise the decision with the replication's own stream.
pub trait Test: Send + Sync {
    fn rejection_probability(&self, z: &Intervention, y: &[f64]) -> f64;
}

/// A design paired with a test.
#[derive(Clone)]
pub struct TestProcedure {
    pub design: Design,
    pub test: Arc<dyn Test>,
    pub label: String,
}

impl fmt::Debug for TestProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestProcedure")
            .field("design", &self.design)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl TestProcedure {
    pub fn new(design: Design, test: impl Test + 'static, label: impl Into<String>) -> Self {
        Self {
            design,
            test: Arc::new(test),
            label: label.into(),
        }
    }

    /// One realised decision. Always consumes exactly one uniform so
    /// replications stay aligned across tests.
    pub fn decide<R: Rng + ?Sized>(&self, z: &Intervention, y: &[f64], rng: &mut R) -> bool {
        let phi = self.test.rejection_probability(z, y);
        let u: f64 = rng.random();
        u < phi
    }
}

/// Rejects never.
#[derive(Clone, Copy, Debug)]
pub struct NeverReject;

impl Test for NeverReject {
    fn rejection_probability(&self, _: &Intervention, _: &[f64]) -> f64 {
        0.0
    }
}

/// Ignores the data and rejects with probability `q`.
#[derive(Clone, Copy, Debug)]
pub struct CoinFlip {
    pub q: f64,
}

impl Test for CoinFlip {
    fn rejection_probability(&self, _: &Intervention, _: &[f64]) -> f64 {
        self.q
    }
}

/// Naive two-sample test: mean outcome of units with at least half their
/// neighbours treated against the rest, rejecting when the Welch statistic
/// exceeds `critical` in absolute value. Isolated units are ignored.
#[derive(Clone, Debug)]
pub struct DifferenceInMeans {
    pub network: Arc<Network>,
    pub critical: f64,
}

impl Test for DifferenceInMeans {
    fn rejection_probability(&self, z: &Intervention, y: &[f64]) -> f64 {
        let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (i, &yi) in y.iter().enumerate() {
            let nbrs = self.network.neighbors(i);
            if nbrs.is_empty() {
                continue;
            }
            let treated = nbrs.iter().filter(|&&j| z.get(j)).count();
            groups[(2 * treated >= nbrs.len()) as usize].push(yi);
        }
        let stats = groups.map(|g| {
            if g.len() < 2 {
                return None;
            }
            let k = g.len() as f64;
            let mean = g.iter().sum::<f64>() / k;
            let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Some((mean, var / k))
        });
        match stats {
            [Some((m0, v0)), Some((m1, v1))] => {
                let se = (v0 + v1).sqrt();
                let diff = m1 - m0;
                // outcomes are bounded by 1, so anything below this is round-off
                if se > DEGENERATE_SPREAD {
                    ((diff / se).abs() >= self.critical) as u8 as f64
                } else {
                    (diff.abs() > DEGENERATE_SPREAD) as u8 as f64
                }
            }
            _ => 0.0,
        }
    }
}

/// The linear-in-means threshold test `1{ĝ >= τ}`.
#[derive(Clone, Debug)]
pub struct LimThresholdTest {
    estimator: SeparationEstimator,
    tau: f64,
}

impl LimThresholdTest {
    pub fn new(network: Arc<Network>, p: f64, variant: ThresholdVariant) -> Result<Self> {
        let tau = threshold(&network, variant);
        Ok(Self {
            estimator: SeparationEstimator::new(network, p)?,
            tau,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn estimator(&self) -> &SeparationEstimator {
        &self.estimator
    }

    pub fn g_hat(&self, z: &Intervention, y: &[f64]) -> f64 {
        self.estimator.estimate_unchecked(z, y)
    }
}

impl Test for LimThresholdTest {
    fn rejection_probability(&self, z: &Intervention, y: &[f64]) -> f64 {
        decide(self.g_hat(z, y), self.tau) as u8 as f64
    }
}

/// Bernoulli(`p`) design with the LIM threshold test.
pub fn lim_procedure(network: Arc<Network>, p: f64, variant: ThresholdVariant) -> Result<TestProcedure> {
    let design = Design::bernoulli(p)?;
    let label = format!("lim-threshold:{p}");
    Ok(TestProcedure::new(design, LimThresholdTest::new(network, p, variant)?, label))
}

/// Never-reject, coin flips at 0.05 and 0.5, and the naive
/// difference-in-means test, all under `design`.
pub fn baseline_tests(design: &Design, network: Arc<Network>) -> Vec<TestProcedure> {
    vec![
        TestProcedure::new(design.clone(), NeverReject, "never-reject"),
        TestProcedure::new(design.clone(), CoinFlip { q: 0.05 }, "coin-flip:0.05"),
        TestProcedure::new(design.clone(), CoinFlip { q: 0.5 }, "coin-flip:0.5"),
        TestProcedure::new(
            design.clone(),
            DifferenceInMeans {
                network,
                critical: 1.96,
            },
            "diff-in-means",
        ),
    ]
}

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub reps: usize,
    pub exact: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            se: 0.0,
            reps: 0,
            exact: true,
        }
    }

    /// Mean of i.i.d. samples with standard error `sd / √reps`.
    pub fn from_samples(values: &[f64]) -> Self {
        let reps = values.len();
        let r = reps as f64;
        let mean = values.iter().sum::<f64>() / r;
        let var = if reps > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            se: (var / r).sqrt(),
            reps,
            exact: false,
        }
    }

    /// Proportion `k / reps` with binomial standard error.
    pub fn binomial(successes: usize, reps: usize) -> Self {
        let r = reps as f64;
        let p = successes as f64 / r;
        Self {
            value: p,
            se: (p * (1.0 - p) / r).sqrt(),
            reps,
            exact: false,
        }
    }

    /// `1 − value`, same standard error.
    pub fn complement(self) -> Self {
        Self {
            value: 1.0 - self.value,
            ..self
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// How expectations over the design are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    Exact,
    MonteCarlo { reps: usize, seed: u64 },
}

/// `E_{z∼D}[φ(z, y(z))]`.
pub fn rejection_rate(proc: &TestProcedure, model: &OutcomeModel, eval: Evaluation) -> Result<Estimate> {
    let n = model.n();
    match eval {
        Evaluation::Exact => {
            let mut rate = 0.0;
            for (z, w) in proc.design.enumerate(n)? {
                rate += w * proc.test.rejection_probability(&z, &model.evaluate(&z));
            }
            Ok(Estimate::exact(rate))
        }
        Evaluation::MonteCarlo { reps, seed } => {
            if reps < 2 {
                return Err(Error::usage("Monte Carlo needs at least 2 replications"));
            }
            let rejections = (0..reps)
                .into_par_iter()
                .filter(|&r| {
                    let mut rng = substream(seed, r as u64);
                    let z = proc.design.sample(n, &mut rng);
                    let y = model.evaluate(&z);
                    proc.decide(&z, &y, &mut rng)
                })
                .count();
            Ok(Estimate::binomial(rejections, reps))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RiskEstimate {
    /// Largest rejection rate over the null models.
    pub type1: Estimate,
    /// Largest acceptance rate over the alternative models.
    pub type2: Estimate,
    pub overall: f64,
    pub reps: usize,
    pub exact: bool,
    /// Index of the null model attaining `type1`.
    pub worst_null: usize,
    /// Index of the alternative model attaining `type2`.
    pub worst_alt: usize,
}

/// Worst-case errors over explicit model lists; a lower bound on the
/// supremum-based overall testing error.
pub fn risk_profile(
    proc: &TestProcedure,
    nulls: &[OutcomeModel],
    alts: &[OutcomeModel],
    delta: f64,
    separation: SeparationFunctional<'_>,
    eval: Evaluation,
) -> Result<RiskEstimate> {
    if nulls.is_empty() {
        return Err(Error::usage("risk profile needs at least one null model"));
    }
    if alts.is_empty() {
        return Err(Error::usage("risk profile needs at least one alternative model"));
    }
    if delta > separation.max_separation() {
        return Err(Error::usage(format!(
            "separation δ = {delta} exceeds the largest attainable value {}; the alternative is empty",
            separation.max_separation()
        )));
    }
    for (k, m) in alts.iter().enumerate() {
        let g = separation.of(m)?.g;
        if g < delta * (1.0 - SEPARATION_SLACK) {
            return Err(Error::usage(format!(
                "alternative model #{k} has separation {g} < δ = {delta}"
            )));
        }
    }
    let worst = |models: &[OutcomeModel], accept: bool| -> Result<(usize, Estimate)> {
        let mut best: Option<(usize, Estimate)> = None;
        for (k, m) in models.iter().enumerate() {
            let mut e = rejection_rate(proc, m, eval)?;
            if accept {
                e = e.complement();
            }
            if best.is_none_or(|(_, b)| e.value > b.value) {
                best = Some((k, e));
            }
        }
        Ok(best.expect("model list is nonempty"))
    };
    let (worst_null, type1) = worst(nulls, false)?;
    let (worst_alt, type2) = worst(alts, true)?;
    let (reps, exact) = match eval {
        Evaluation::Exact => (0, true),
        Evaluation::MonteCarlo { reps, .. } => (reps, false),
    };
    Ok(RiskEstimate {
        type1,
        type2,
        overall: type1.value + type2.value,
        reps,
        exact,
        worst_null,
        worst_alt,
    })
}

/// Null models for the no-interference hypothesis, as seen by the LIM test:
/// the zero LIM model, SUTVA cube vertices, and seeded interior draws.
pub fn default_null_models(network: &Arc<Network>, seed: u64) -> Result<Vec<OutcomeModel>> {
    let n = network.n();
    let mut rng = substream(seed, 0);
    let sign = |r: &mut crate::rng::StreamRng| if r.random_bool(0.5) { 1.0 } else { -1.0 };
    let random_vertex: Vec<(f64, f64)> = (0..n).map(|_| (sign(&mut rng), sign(&mut rng))).collect();
    let interior: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
        .collect();
    let unzip = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
    let (v0, v1) = unzip(&random_vertex);
    let (i0, i1) = unzip(&interior);
    Ok(vec![
        LimModel::homogeneous(network.clone(), [0.0, 0.0, 0.0])?.into(),
        ExposureOutcomeModel::sutva(&vec![-1.0; n], &vec![1.0; n])?.into(),
        ExposureOutcomeModel::sutva(&v0, &v1)?.into(),
        ExposureOutcomeModel::sutva(&vec![0.0; n], &vec![1.0; n])?.into(),
        ExposureOutcomeModel::sutva(&i0, &i1)?.into(),
    ])
}

/// Linear-in-means alternatives with `g(y) = δ` exactly (up to rounding).
pub fn default_alt_models(network: &Arc<Network>, delta: f64, seed: u64) -> Result<Vec<OutcomeModel>> {
    if !(delta > 0.0 && delta <= 4.0) {
        return Err(Error::usage(format!("δ must lie in (0, 4], got {delta}")));
    }
    let n = network.n();
    let b3 = delta.sqrt();
    let mut models: Vec<OutcomeModel> = Vec::new();
    if b3 <= 1.0 {
        models.push(LimModel::homogeneous(network.clone(), [0.0, 0.0, b3])?.into());
        models.push(LimModel::homogeneous(network.clone(), [0.0, 0.0, -b3])?.into());
    }
    models.push(LimModel::homogeneous(network.clone(), [-b3 / 2.0, 0.0, b3])?.into());
    models.push(LimModel::homogeneous(network.clone(), [b3 / 2.0, 0.0, -b3])?.into());
    let mut rng = substream(seed, 1);
    let mixed = (0..n)
        .map(|_| {
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let room = 1.0 - b3 / 2.0;
            [-s * b3 / 2.0, rng.random_range(-room..=room), s * b3]
        })
        .collect();
    models.push(LimModel::new(network.clone(), mixed)?.into());
    Ok(models)
}

/// Graph family for consistency curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GraphFamily {
    KRegular { k: usize },
}

impl GraphFamily {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Network> {
        match *self {
            GraphFamily::KRegular { k } => gen_k_regular(n, k, seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurveConfig {
    pub family: GraphFamily,
    pub ns: Vec<usize>,
    pub delta: f64,
    pub p: f64,
    pub variant: ThresholdVariant,
    pub reps: usize,
    pub seed: u64,
}

/// One row of the CSV schema `n, delta, type1, type1_se, type2, type2_se,
/// overall, reps, seed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub delta: f64,
    pub type1: f64,
    pub type1_se: f64,
    pub type2: f64,
    pub type2_se: f64,
    pub overall: f64,
    pub reps: usize,
    pub seed: u64,
}

pub type AltBuilder<'a> = dyn Fn(&Arc<Network>, f64, u64) -> Result<Vec<OutcomeModel>> + Sync + 'a;

/// Estimated LIM-test errors across growing networks, rows ordered by `n`.
pub fn consistency_curve(cfg: &CurveConfig, alt_builder: &AltBuilder<'_>) -> Result<Vec<CurveRow>> {
    if !(cfg.delta > 0.0) {
        return Err(Error::usage(format!("δ must be positive, got {}", cfg.delta)));
    }
    if cfg.delta > 4.0 {
        return Err(Error::usage(format!(
            "δ = {} exceeds 4, the largest linear-in-means separation; the alternative is empty",
            cfg.delta
        )));
    }
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    ns.into_iter()
        .map(|n| {
            let row_seed = derive_seed(cfg.seed, n as u64);
            let network = Arc::new(cfg.family.generate(n, derive_seed(row_seed, 0))?);
            let proc = lim_procedure(network.clone(), cfg.p, cfg.variant)?;
            let nulls = default_null_models(&network, derive_seed(row_seed, 1))?;
            let alts = alt_builder(&network, cfg.delta, derive_seed(row_seed, 2))?;
            let risk = risk_profile(
                &proc,
                &nulls,
                &alts,
                cfg.delta,
                SeparationFunctional::LinearInMeans,
                Evaluation::MonteCarlo {
                    reps: cfg.reps,
                    seed: derive_seed(row_seed, 3),
                },
            )?;
            Ok(CurveRow {
                n,
                delta: cfg.delta,
                type1: risk.type1.value,
                type1_se: risk.type1.se,
                type2: risk.type2.value,
                type2_se: risk.type2.se,
                overall: risk.overall,
                reps: cfg.reps,
                seed: cfg.seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::ExposureSpec;
    use crate::refinement::check_refinement;

    fn sutva_model(n: usize) -> OutcomeModel {
        ExposureOutcomeModel::sutva(&vec![-0.5; n], &vec![0.5; n]).unwrap().into()
    }

    #[test]
    fn never_reject_rate_is_zero() {
        let proc = TestProcedure::new(Design::bernoulli(0.5).unwrap(), NeverReject, "never");
        let m = sutva_model(6);
        assert_eq!(rejection_rate(&proc, &m, Evaluation::Exact).unwrap().value, 0.0);
        let mc = rejection_rate(&proc, &m, Evaluation::MonteCarlo { reps: 1000, seed: 1 }).unwrap();
        assert_eq!((mc.value, mc.se), (0.0, 0.0));
    }

    #[test]
    fn coin_flip_rate() {
        let q = 0.05;
        let proc = TestProcedure::new(Design::bernoulli(0.5).unwrap(), CoinFlip { q }, "coin");
        let m = sutva_model(4);
        assert!((rejection_rate(&proc, &m, Evaluation::Exact).unwrap().value - q).abs() < 1e-15);
        let reps = 100_000;
        let mc = rejection_rate(&proc, &m, Evaluation::MonteCarlo { reps, seed: 3 }).unwrap();
        assert!((mc.value - q).abs() <= 3.0 * (q * (1.0 - q) / reps as f64).sqrt());
    }

    #[test]
    fn coin_flip_profile_sums_to_one() {
        let q = 0.3;
        let proc = TestProcedure::new(Design::bernoulli(0.5).unwrap(), CoinFlip { q }, "coin");
        let coarse = ExposureSpec::no_effect(3);
        let report = check_refinement(&coarse, &ExposureSpec::own_treatment(3)).unwrap();
        let nulls = vec![sutva_model(3)];
        let alts: Vec<OutcomeModel> = vec![ExposureOutcomeModel::sutva(&[-1.0; 3], &[1.0; 3]).unwrap().into()];
        let r = risk_profile(&proc, &nulls, &alts, 4.0, SeparationFunctional::Refinement(&report), Evaluation::Exact);
        // own-treatment models are not in the no-effect null; only the alt list is checked
        let r = r.unwrap();
        assert!((r.overall - 1.0).abs() < 1e-15);
        assert!(risk_profile(&proc, &nulls, &[], 1.0, SeparationFunctional::Refinement(&report), Evaluation::Exact).is_err());
    }

    #[test]
    fn alternatives_below_delta_are_rejected() {
        let g = Arc::new(Network::cycle(6).unwrap());
        let proc = lim_procedure(g.clone(), 0.5, ThresholdVariant::Main).unwrap();
        let nulls = default_null_models(&g, 1).unwrap();
        let weak: Vec<OutcomeModel> = vec![LimModel::homogeneous(g, [0.0, 0.0, 0.5]).unwrap().into()];
        let err = risk_profile(&proc, &nulls, &weak, 1.0, SeparationFunctional::LinearInMeans, Evaluation::Exact)
            .unwrap_err();
        assert!(err.to_string().contains("#0"));
    }

    #[test]
    fn default_alts_sit_on_delta() {
        let g = Arc::new(gen_k_regular(20, 4, 1).unwrap());
        for delta in [0.3, 1.0, 2.5, 4.0] {
            for m in default_alt_models(&g, delta, 7).unwrap() {
                let s = SeparationFunctional::LinearInMeans.of(&m).unwrap();
                assert!((s.g - delta).abs() < 1e-12, "δ={delta} g={}", s.g);
            }
        }
        assert!(default_alt_models(&g, 4.5, 0).is_err());
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let g = Arc::new(gen_k_regular(12, 3, 4).unwrap());
        let proc = lim_procedure(g.clone(), 0.5, ThresholdVariant::Main).unwrap();
        let m: OutcomeModel = ExposureOutcomeModel::sutva(
            &(0..12).map(|i| if i % 3 == 0 { 0.2 } else { -0.9 }).collect::<Vec<_>>(),
            &(0..12).map(|i| if i % 2 == 0 { 1.0 } else { 0.1 }).collect::<Vec<_>>(),
        )
        .unwrap()
        .into();
        let exact = rejection_rate(&proc, &m, Evaluation::Exact).unwrap();
        let mc = rejection_rate(&proc, &m, Evaluation::MonteCarlo { reps: 100_000, seed: 11 }).unwrap();
        assert!((0.0..=1.0).contains(&exact.value));
        assert!(mc.covers(exact.value, 3.0), "exact {} mc {} ± {}", exact.value, mc.value, mc.se);
    }

    #[test]
    fn curve_rejects_trivial_delta_and_sorts_rows() {
        let mut cfg = CurveConfig {
            family: GraphFamily::KRegular { k: 4 },
            ns: vec![200, 100],
            delta: 4.5,
            p: 0.5,
            variant: ThresholdVariant::Main,
            reps: 20,
            seed: 1,
        };
        assert!(consistency_curve(&cfg, &default_alt_models).is_err());
        cfg.delta = 1.0;
        let rows = consistency_curve(&cfg, &default_alt_models).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![100, 200]);
        cfg.ns = vec![100];
        assert_eq!(consistency_curve(&cfg, &default_alt_models).unwrap().len(), 1);
    }

    #[test]
    fn difference_in_means_detects_spillover_shift() {
        let g = Arc::new(gen_k_regular(200, 4, 2).unwrap());
        let test = DifferenceInMeans { network: g.clone(), critical: 1.96 };
        let z = Design::bernoulli(0.5).unwrap().sample(200, &mut substream(0, 0));
        let y: Vec<f64> = (0..200)
            .map(|i| {
                let t = g.neighbors(i).iter().filter(|&&j| z.get(j)).count();
                if 2 * t >= 4 { 1.0 } else { -1.0 }
            })
            .collect();
        assert_eq!(test.rejection_probability(&z, &y), 1.0);
        assert_eq!(test.rejection_probability(&z, &vec![0.3; 200]), 0.0);
    }
}
