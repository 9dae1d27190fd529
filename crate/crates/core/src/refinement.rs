//! Refinement maps between exposure mappings and their split sets.
//!
//! `χ¹` refines `χ⁰` at unit `i` when some `π_i` satisfies `χ⁰_i = π_i ∘ χ¹_i`.
//! Structured specs depend only on the treatments of a small local set of
//! units, so the check enumerates assignments to the union of both local
//! supports. That is exact and independent of `n`. Tabulated specs fall
//! back to enumerating all of `Ω`.

use serde::Serialize;

use crate::design::DEFAULT_ENUMERATION_CAP;
use crate::error::{Error, Result};
use crate::exposure::{ExposureId, ExposureSpec};
use crate::intervention::Intervention;

/// Widest local support enumerated per unit.
const MAX_LOCAL_SUPPORT: usize = 24;

/// Two interventions with equal fine exposure but different coarse exposure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RefinementWitness {
    pub unit: usize,
    pub z: Intervention,
    pub z_prime: Intervention,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub is_refinement: bool,
    /// `maps[i][e1] = π_i(e1)`.
    pub maps: Vec<Vec<ExposureId>>,
    /// `split_sets[i][e0]`: the fine exposures mapping to `e0`, ascending.
    pub split_sets: Vec<Vec<Vec<ExposureId>>>,
    /// `positions[i][e1]`: index of `e1` inside its split set.
    pub positions: Vec<Vec<usize>>,
    /// `S_i`: number of coarse exposures whose split set has size > 1.
    pub split_counts: Vec<usize>,
    pub s_avg: f64,
    pub witness: Option<RefinementWitness>,
}

impl RefinementReport {
    fn failed(witness: RefinementWitness) -> Self {
        Self {
            is_refinement: false,
            maps: Vec::new(),
            split_sets: Vec::new(),
            positions: Vec::new(),
            split_counts: Vec::new(),
            s_avg: 0.0,
            witness: Some(witness),
        }
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }

    /// `4 · S_avg`, the largest separation any bounded model can reach.
    pub fn max_separation(&self) -> f64 {
        4.0 * self.s_avg
    }

    /// Fails with [`Error::NotRefinement`] carrying the witness.
    pub fn require(&self) -> Result<&Self> {
        if self.is_refinement {
            Ok(self)
        } else {
            let w = self.witness.as_ref().expect("failed reports carry a witness");
            Err(Error::NotRefinement(format!(
                "unit {}: z = {} and z' = {} share a fine exposure but not a coarse one",
                w.unit, w.z, w.z_prime
            )))
        }
    }
}

/// Checks whether `fine` refines `coarse` at every unit.
pub fn check_refinement(coarse: &ExposureSpec, fine: &ExposureSpec) -> Result<RefinementReport> {
    check_refinement_capped(coarse, fine, DEFAULT_ENUMERATION_CAP)
}

pub fn check_refinement_capped(coarse: &ExposureSpec, fine: &ExposureSpec, cap: usize) -> Result<RefinementReport> {
    let n = coarse.n();
    if fine.n() != n {
        return Err(Error::usage(format!("coarse spec has {n} units, fine spec has {}", fine.n())));
    }
    let local = (0..n).all(|i| coarse.local_support(i).is_some() && fine.local_support(i).is_some());
    if !local && n > cap {
        return Err(Error::usage(format!("refinement check over all of Ω needs n <= {cap}, got {n}")));
    }

    let mut maps = Vec::with_capacity(n);
    for i in 0..n {
        let fine_count = fine.exposure_count(i) as usize;
        let mut map: Vec<Option<ExposureId>> = vec![None; fine_count];
        // first intervention seen for each fine exposure, for witnesses
        let mut first_seen: Vec<Option<Intervention>> = vec![None; fine_count];
        let mut visit = |z: Intervention| -> Option<RefinementWitness> {
            let e1 = fine.exposure_of(i, &z) as usize;
            let e0 = coarse.exposure_of(i, &z);
            match map[e1] {
                None => {
                    map[e1] = Some(e0);
                    first_seen[e1] = Some(z);
                    None
                }
                Some(prev) if prev == e0 => None,
                Some(_) => Some(RefinementWitness {
                    unit: i,
                    z: first_seen[e1].clone().expect("recorded with map"),
                    z_prime: z,
                }),
            }
        };

        let witness = if local {
            let mut support = coarse.local_support(i).unwrap();
            support.extend(fine.local_support(i).unwrap());
            support.sort_unstable();
            support.dedup();
            if support.len() > MAX_LOCAL_SUPPORT {
                return Err(Error::usage(format!(
                    "unit {i}: local support of {} units is too wide to enumerate",
                    support.len()
                )));
            }
            (0..1u64 << support.len()).find_map(|mask| {
                let mut z = Intervention::zeros(n);
                for (k, &j) in support.iter().enumerate() {
                    z.set(j, (mask >> k) & 1 == 1);
                }
                visit(z)
            })
        } else {
            (0..1u64 << n).find_map(|idx| visit(Intervention::from_index(n, idx)))
        };
        if let Some(w) = witness {
            return Ok(RefinementReport::failed(w));
        }
        let map = map
            .into_iter()
            .enumerate()
            .map(|(e1, e0)| {
                e0.ok_or_else(|| Error::model(format!("unit {i}: fine exposure {e1} is never realised")))
            })
            .collect::<Result<Vec<_>>>()?;
        maps.push(map);
    }

    let mut split_sets = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut split_counts = Vec::with_capacity(n);
    for (i, map) in maps.iter().enumerate() {
        let mut sets: Vec<Vec<ExposureId>> = vec![Vec::new(); coarse.exposure_count(i) as usize];
        let mut pos = vec![0usize; map.len()];
        for (e1, &e0) in map.iter().enumerate() {
            let set = &mut sets[e0 as usize];
            pos[e1] = set.len();
            set.push(e1 as ExposureId);
        }
        if let Some(e0) = sets.iter().position(Vec::is_empty) {
            return Err(Error::model(format!("unit {i}: coarse exposure {e0} is never realised")));
        }
        split_counts.push(sets.iter().filter(|s| s.len() > 1).count());
        split_sets.push(sets);
        positions.push(pos);
    }
    let s_avg = if n == 0 {
        0.0
    } else {
        split_counts.iter().sum::<usize>() as f64 / n as f64
    };
    Ok(RefinementReport {
        is_refinement: true,
        maps,
        split_sets,
        positions,
        split_counts,
        s_avg,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::exposure::TabulatedSpec;
    use crate::network::Network;

    #[test]
    fn no_effect_to_own_treatment() {
        let r = check_refinement(&ExposureSpec::no_effect(4), &ExposureSpec::own_treatment(4)).unwrap();
        assert!(r.is_refinement);
        assert_eq!(r.split_counts, vec![1; 4]);
        assert_eq!(r.s_avg, 1.0);
        assert_eq!(r.split_sets[0], vec![vec![0, 1]]);
    }

    #[test]
    fn own_treatment_to_stratified_on_path() {
        let g = Arc::new(Network::path(5));
        let r = check_refinement(&ExposureSpec::own_treatment(5), &ExposureSpec::stratified(g.clone())).unwrap();
        assert!(r.is_refinement);
        for i in 0..5 {
            for set in &r.split_sets[i] {
                assert_eq!(set.len(), g.degree(i) + 1);
            }
        }
        assert_eq!(r.s_avg, 2.0);
    }

    #[test]
    fn reversed_order_gives_witness() {
        let r = check_refinement(&ExposureSpec::own_treatment(3), &ExposureSpec::no_effect(3)).unwrap();
        assert!(!r.is_refinement);
        let w = r.witness.clone().unwrap();
        let coarse = ExposureSpec::own_treatment(3);
        assert_ne!(coarse.exposure_of(w.unit, &w.z), coarse.exposure_of(w.unit, &w.z_prime));
        assert!(matches!(r.require(), Err(Error::NotRefinement(_))));
    }

    #[test]
    fn degree_one_units_do_not_split_stratified_into_arbitrary() {
        // arbitrary-neighborhood refines stratified; the converse only holds
        // when every unit has degree <= 1
        let matching = Arc::new(Network::from_edges(4, &[(0, 1), (2, 3)]).unwrap());
        let strat = ExposureSpec::stratified(matching.clone());
        let arb = ExposureSpec::arbitrary_neighborhood(matching).unwrap();
        let r = check_refinement(&arb, &strat).unwrap();
        assert!(r.is_refinement);
        assert_eq!(r.s_avg, 0.0);

        let path = Arc::new(Network::path(3));
        let r = check_refinement(
            &ExposureSpec::arbitrary_neighborhood(path.clone()).unwrap(),
            &ExposureSpec::stratified(path),
        )
        .unwrap();
        assert!(!r.is_refinement);
        assert_eq!(r.witness.unwrap().unit, 1);
    }

    #[test]
    fn tabulated_matches_structured() {
        let g = Arc::new(Network::from_edges(5, &[(0, 1), (1, 2), (2, 3), (1, 4)]).unwrap());
        let coarse = ExposureSpec::own_treatment(5);
        let fine = ExposureSpec::stratified(g);
        let structured = check_refinement(&coarse, &fine).unwrap();
        let tab_fine = ExposureSpec::Tabulated(Arc::new(TabulatedSpec::from_spec(&fine).unwrap()));
        let tabulated = check_refinement(&coarse, &tab_fine).unwrap();
        assert_eq!(structured.maps, tabulated.maps);
        assert_eq!(structured.s_avg, tabulated.s_avg);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        assert!(check_refinement(&ExposureSpec::no_effect(3), &ExposureSpec::own_treatment(4)).is_err());
    }

    #[test]
    fn tabulated_respects_cap() {
        let t = ExposureSpec::Tabulated(Arc::new(TabulatedSpec::from_spec(&ExposureSpec::own_treatment(6)).unwrap()));
        assert!(check_refinement_capped(&ExposureSpec::no_effect(6), &t, 5).is_err());
    }
}
