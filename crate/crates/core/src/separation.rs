//! Separation functionals `g` measuring distance from the null model.

use serde::Serialize;

use crate::design::DEFAULT_ENUMERATION_CAP;
use crate::error::{Error, Result};
use crate::exposure::ExposureSpec;
use crate::intervention::Intervention;
use crate::model::{ExposureOutcomeModel, LimModel, OutcomeModel};
use crate::refinement::{check_refinement, RefinementReport};

/// A separation value together with the largest value any bounded model
/// can attain. `δ > max_g` leaves the separated alternative empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationValue {
    pub g: f64,
    pub max_g: f64,
}

impl SeparationValue {
    /// Whether the model lies in the `δ`-separated alternative.
    pub fn separated(&self, delta: f64) -> bool {
        self.g >= delta
    }

    /// `δ` is non-trivial up to and including `max_g`.
    pub fn is_nontrivial(&self, delta: f64) -> bool {
        delta <= self.max_g
    }
}

/// Brute-force refinement separation: for each unit and coarse exposure,
/// the largest squared gap between outcomes over interventions sharing it.
pub fn refinement_separation_exact(model: &ExposureOutcomeModel, coarse: &ExposureSpec) -> Result<SeparationValue> {
    let n = model.n();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::usage(format!("exact separation needs n <= {DEFAULT_ENUMERATION_CAP}, got {n}")));
    }
    let report = check_refinement(coarse, model.spec())?;
    report.require()?;

    // (min, max) of y_i over each coarse exposure class
    let mut ranges: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|i| vec![(f64::INFINITY, f64::NEG_INFINITY); coarse.exposure_count(i) as usize])
        .collect();
    for idx in 0..1u64 << n {
        let z = Intervention::from_index(n, idx);
        for (i, unit_ranges) in ranges.iter_mut().enumerate() {
            let y = model.outcome(i, &z);
            let r = &mut unit_ranges[coarse.exposure_of(i, &z) as usize];
            r.0 = r.0.min(y);
            r.1 = r.1.max(y);
        }
    }
    let total: f64 = ranges
        .iter()
        .flatten()
        .map(|&(lo, hi)| (hi - lo) * (hi - lo))
        .sum();
    Ok(SeparationValue {
        g: total / n as f64,
        max_g: report.max_separation(),
    })
}

/// Refinement separation from coefficients:
/// `(1/n) Σ_i Σ_{e0} (max − min of β over the split set of e0)²`.
pub fn refinement_separation_coeff(model: &ExposureOutcomeModel, report: &RefinementReport) -> Result<SeparationValue> {
    report.require()?;
    let n = model.n();
    if report.n() != n {
        return Err(Error::usage(format!("report covers {} units, model has {n}", report.n())));
    }
    let mut total = 0.0;
    for (i, sets) in report.split_sets.iter().enumerate() {
        let coeffs = &model.coeffs()[i];
        if coeffs.len() != report.maps[i].len() {
            return Err(Error::usage(format!("unit {i}: model and report disagree on the fine exposure set")));
        }
        for set in sets {
            let (lo, hi) = set
                .iter()
                .map(|&e| coeffs[e as usize])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
            total += (hi - lo) * (hi - lo);
        }
    }
    Ok(SeparationValue {
        g: if n == 0 { 0.0 } else { total / n as f64 },
        max_g: report.max_separation(),
    })
}

/// `(1/n) Σ β₃ᵢ²`, with `max_g = 4`.
pub fn lim_separation(model: &LimModel) -> SeparationValue {
    let n = model.n();
    let total: f64 = model.beta().iter().map(|b| b[2] * b[2]).sum();
    SeparationValue {
        g: if n == 0 { 0.0 } else { total / n as f64 },
        max_g: 4.0,
    }
}

/// Which separation functional applies to an alternative model.
#[derive(Clone, Copy, Debug)]
pub enum SeparationFunctional<'a> {
    /// No interference against linear-in-means.
    LinearInMeans,
    /// Nested exposure models with the given refinement report.
    Refinement(&'a RefinementReport),
}

impl SeparationFunctional<'_> {
    pub fn of(&self, model: &OutcomeModel) -> Result<SeparationValue> {
        match (self, model) {
            (Self::LinearInMeans, OutcomeModel::Lim(m)) => Ok(lim_separation(m)),
            (Self::Refinement(report), OutcomeModel::Exposure(m)) => refinement_separation_coeff(m, report),
            (Self::LinearInMeans, OutcomeModel::Exposure(_)) => {
                Err(Error::usage("the linear-in-means separation applies to lim models only"))
            }
            (Self::Refinement(_), OutcomeModel::Lim(_)) => {
                Err(Error::usage("refinement separation applies to exposure models only"))
            }
        }
    }

    pub fn max_separation(&self) -> f64 {
        match self {
            Self::LinearInMeans => 4.0,
            Self::Refinement(r) => r.max_separation(),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::network::Network;

    #[test]
    fn sutva_extreme_effect_has_separation_four() {
        let m = ExposureOutcomeModel::sutva(&[-1.0; 6], &[1.0; 6]).unwrap();
        let coarse = ExposureSpec::no_effect(6);
        let exact = refinement_separation_exact(&m, &coarse).unwrap();
        assert_eq!(exact.g, 4.0);
        assert_eq!(exact.max_g, 4.0);
        let report = check_refinement(&coarse, m.spec()).unwrap();
        assert_eq!(refinement_separation_coeff(&m, &report).unwrap().g, 4.0);
    }

    #[test]
    fn null_members_have_zero_separation() {
        let m = ExposureOutcomeModel::sutva(&[0.3, -0.2, 1.0], &[0.3, -0.2, 1.0]).unwrap();
        let coarse = ExposureSpec::no_effect(3);
        assert_eq!(refinement_separation_exact(&m, &coarse).unwrap().g, 0.0);
    }

    #[test]
    fn stratified_on_four_cycle_matches_hand_formula() {
        // unit coefficients indexed by 2·t + z_i, t ∈ {0,1,2}
        let g = Arc::new(Network::cycle(4).unwrap());
        let coeffs = vec![
            vec![0.1, 0.5, -0.3, 0.2, 0.9, -1.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0, -1.0, 1.0, 1.0, 1.0],
            vec![0.25, -0.25, 0.5, 0.0, 0.75, 0.0],
        ];
        let m = ExposureOutcomeModel::new(ExposureSpec::stratified(g), coeffs.clone()).unwrap();
        let coarse = ExposureSpec::own_treatment(4);
        // z_i = 0 split set {0, 2, 4}; z_i = 1 split set {1, 3, 5}
        let by_hand: f64 = coeffs
            .iter()
            .map(|c| {
                let r0 = [c[0], c[2], c[4]];
                let r1 = [c[1], c[3], c[5]];
                let spread = |r: [f64; 3]| {
                    let hi = r.iter().cloned().fold(f64::MIN, f64::max);
                    let lo = r.iter().cloned().fold(f64::MAX, f64::min);
                    (hi - lo).powi(2)
                };
                spread(r0) + spread(r1)
            })
            .sum::<f64>()
            / 4.0;
        let exact = refinement_separation_exact(&m, &coarse).unwrap();
        assert!((exact.g - by_hand).abs() < 1e-12);
        assert_eq!(exact.max_g, 8.0);
    }

    #[test]
    fn lim_separation_values() {
        let g = Arc::new(Network::cycle(4).unwrap());
        assert_eq!(lim_separation(&LimModel::homogeneous(g.clone(), [0.3, 0.2, 0.0]).unwrap()).g, 0.0);
        assert_eq!(lim_separation(&LimModel::homogeneous(g.clone(), [0.0, 0.0, 1.0]).unwrap()).g, 1.0);
        let m = LimModel::new(g, vec![[-1.0, 0.0, 2.0], [0.0; 3], [0.0; 3], [0.0; 3]]).unwrap();
        let s = lim_separation(&m);
        assert_eq!(s.g, 1.0);
        assert_eq!(s.max_g, 4.0);
    }

    #[test]
    fn not_a_refinement_is_an_error() {
        let m = ExposureOutcomeModel::new(ExposureSpec::no_effect(3), vec![vec![0.0]; 3]).unwrap();
        let coarse = ExposureSpec::own_treatment(3);
        assert!(matches!(refinement_separation_exact(&m, &coarse), Err(Error::NotRefinement(_))));
    }

    #[test]
    fn functional_dispatch_checks_model_kind() {
        let g = Arc::new(Network::cycle(4).unwrap());
        let lim: OutcomeModel = LimModel::homogeneous(g, [0.0, 0.0, 0.5]).unwrap().into();
        assert_eq!(SeparationFunctional::LinearInMeans.of(&lim).unwrap().g, 0.25);
        let sutva: OutcomeModel = ExposureOutcomeModel::sutva(&[0.0; 4], &[0.0; 4]).unwrap().into();
        assert!(SeparationFunctional::LinearInMeans.of(&sutva).is_err());
    }
}
