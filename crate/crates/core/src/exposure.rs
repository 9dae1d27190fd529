//! Exposure mappings `χ_i : Ω → E_i` and their dense integer encodings.
//!
//! Exposure ids are dense per unit, `0..exposure_count(i)`:
//!
//! * `NoEffect`: always `0`.
//! * `OwnTreatment`: `z_i`.
//! * `Stratified`: `2·t + z_i`, with `t` the number of treated neighbours.
//! * `ArbitraryNeighborhood`: bitmask of the treatments on the sorted closed
//!   neighbourhood `{i} ∪ N(i)`; bit `k` is the `k`-th unit of that list.
//! * `Tabulated`: an explicit table over all of `Ω`, indexed by
//!   [`Intervention::index`].

use std::sync::Arc;

use crate::design::DEFAULT_ENUMERATION_CAP;
use crate::error::{Error, Result};
use crate::intervention::Intervention;
use crate::network::Network;

pub type ExposureId = u64;

/// Largest closed neighbourhood an `ArbitraryNeighborhood` spec accepts.
pub const MAX_LOCAL_WIDTH: usize = 32;

#[derive(Clone, Debug)]
pub enum ExposureSpec {
    NoEffect { n: usize },
    OwnTreatment { n: usize },
    Stratified(Arc<Network>),
    ArbitraryNeighborhood(Arc<Network>),
    Tabulated(Arc<TabulatedSpec>),
}

/// Kind tag of an [`ExposureSpec`], used for parsing and reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExposureKind {
    NoEffect,
    OwnTreatment,
    Stratified,
    ArbitraryNeighborhood,
    Tabulated,
}

impl ExposureKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "no-effect" => Ok(Self::NoEffect),
            "own-treatment" | "sutva" => Ok(Self::OwnTreatment),
            "stratified" => Ok(Self::Stratified),
            "arbitrary-neighborhood" | "arbitrary" => Ok(Self::ArbitraryNeighborhood),
            other => Err(Error::usage(format!(
                "unknown exposure kind {other:?} (expected no-effect, own-treatment, stratified, arbitrary-neighborhood)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NoEffect => "no-effect",
            Self::OwnTreatment => "own-treatment",
            Self::Stratified => "stratified",
            Self::ArbitraryNeighborhood => "arbitrary-neighborhood",
            Self::Tabulated => "tabulated",
        }
    }

    pub fn needs_network(self) -> bool {
        matches!(self, Self::Stratified | Self::ArbitraryNeighborhood)
    }
}

impl ExposureSpec {
    pub fn no_effect(n: usize) -> Self {
        Self::NoEffect { n }
    }

    pub fn own_treatment(n: usize) -> Self {
        Self::OwnTreatment { n }
    }

    pub fn stratified(network: Arc<Network>) -> Self {
        Self::Stratified(network)
    }

    pub fn arbitrary_neighborhood(network: Arc<Network>) -> Result<Self> {
        if network.max_degree() + 1 > MAX_LOCAL_WIDTH {
            return Err(Error::usage(format!(
                "arbitrary-neighborhood exposures need max degree < {MAX_LOCAL_WIDTH}, got {}",
                network.max_degree()
            )));
        }
        Ok(Self::ArbitraryNeighborhood(network))
    }

    /// Builds a structured spec of the given kind. Kinds that need a network
    /// fail without one; the others only use its unit count.
    pub fn from_kind(kind: ExposureKind, n: usize, network: Option<Arc<Network>>) -> Result<Self> {
        if let Some(g) = &network {
            if g.n() != n {
                return Err(Error::usage(format!("network has {} units, expected {n}", g.n())));
            }
        }
        match kind {
            ExposureKind::NoEffect => Ok(Self::no_effect(n)),
            ExposureKind::OwnTreatment => Ok(Self::own_treatment(n)),
            ExposureKind::Stratified => network
                .map(Self::stratified)
                .ok_or_else(|| Error::usage("stratified exposures need a network")),
            ExposureKind::ArbitraryNeighborhood => network
                .ok_or_else(|| Error::usage("arbitrary-neighborhood exposures need a network"))
                .and_then(Self::arbitrary_neighborhood),
            ExposureKind::Tabulated => Err(Error::usage("tabulated specs are built from tables, not kinds")),
        }
    }

    pub fn kind(&self) -> ExposureKind {
        match self {
            Self::NoEffect { .. } => ExposureKind::NoEffect,
            Self::OwnTreatment { .. } => ExposureKind::OwnTreatment,
            Self::Stratified(_) => ExposureKind::Stratified,
            Self::ArbitraryNeighborhood(_) => ExposureKind::ArbitraryNeighborhood,
            Self::Tabulated(_) => ExposureKind::Tabulated,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::NoEffect { n } | Self::OwnTreatment { n } => *n,
            Self::Stratified(g) | Self::ArbitraryNeighborhood(g) => g.n(),
            Self::Tabulated(t) => t.n,
        }
    }

    pub fn network(&self) -> Option<&Arc<Network>> {
        match self {
            Self::Stratified(g) | Self::ArbitraryNeighborhood(g) => Some(g),
            _ => None,
        }
    }

    /// `|E_i|`: 1, 2, `2(d_i + 1)`, `2^(d_i + 1)`, or the table's id count.
    pub fn exposure_count(&self, unit: usize) -> u64 {
        match self {
            Self::NoEffect { .. } => 1,
            Self::OwnTreatment { .. } => 2,
            Self::Stratified(g) => 2 * (g.degree(unit) as u64 + 1),
            Self::ArbitraryNeighborhood(g) => 1u64 << (g.degree(unit) + 1),
            Self::Tabulated(t) => t.counts[unit],
        }
    }

    pub fn exposure_of(&self, unit: usize, z: &Intervention) -> ExposureId {
        match self {
            Self::NoEffect { .. } => 0,
            Self::OwnTreatment { .. } => z.get(unit) as u64,
            Self::Stratified(g) => {
                let treated = g.neighbors(unit).iter().filter(|&&j| z.get(j)).count() as u64;
                2 * treated + z.get(unit) as u64
            }
            Self::ArbitraryNeighborhood(g) => g
                .closed_neighborhood(unit)
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, &j)| acc | ((z.get(j) as u64) << k)),
            Self::Tabulated(t) => t.table[unit][z.index() as usize] as u64,
        }
    }

    /// Exposure ids of every unit at `z`.
    pub fn exposures(&self, z: &Intervention) -> Vec<ExposureId> {
        (0..self.n()).map(|i| self.exposure_of(i, z)).collect()
    }

    /// The units whose treatments can affect `unit`'s exposure, sorted.
    /// `None` for tabulated specs, which may depend on all of `z`.
    pub fn local_support(&self, unit: usize) -> Option<Vec<usize>> {
        match self {
            Self::NoEffect { .. } => Some(Vec::new()),
            Self::OwnTreatment { .. } => Some(vec![unit]),
            Self::Stratified(g) | Self::ArbitraryNeighborhood(g) => Some(g.closed_neighborhood(unit)),
            Self::Tabulated(_) => None,
        }
    }
}

/// An exposure mapping given explicitly on every intervention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TabulatedSpec {
    n: usize,
    /// `table[i][z.index()]` is unit `i`'s exposure id.
    table: Vec<Vec<u32>>,
    counts: Vec<u64>,
}

impl TabulatedSpec {
    /// Validates totality over `Ω` and density of ids (`0..count` all occur).
    pub fn new(n: usize, table: Vec<Vec<u32>>) -> Result<Self> {
        Self::with_cap(n, table, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_cap(n: usize, table: Vec<Vec<u32>>, cap: usize) -> Result<Self> {
        if n > cap {
            return Err(Error::usage(format!("tabulated specs need n <= {cap}, got {n}")));
        }
        if table.len() != n {
            return Err(Error::model(format!("table has {} rows, expected {n}", table.len())));
        }
        let size = 1usize << n;
        let mut counts = Vec::with_capacity(n);
        for (i, row) in table.iter().enumerate() {
            if row.len() != size {
                return Err(Error::model(format!("row {i} has {} entries, expected 2^{n} = {size}", row.len())));
            }
            let count = row.iter().copied().max().map_or(0, |m| m as usize + 1);
            let mut seen = vec![false; count];
            for &e in row {
                seen[e as usize] = true;
            }
            if let Some(gap) = seen.iter().position(|&s| !s) {
                return Err(Error::model(format!("unit {i}: exposure id {gap} never occurs; ids must be dense")));
            }
            counts.push(count as u64);
        }
        Ok(Self { n, table, counts })
    }

    /// Tabulates any spec by enumerating `Ω`.
    pub fn from_spec(spec: &ExposureSpec) -> Result<Self> {
        let n = spec.n();
        if n > DEFAULT_ENUMERATION_CAP {
            return Err(Error::usage(format!("cannot tabulate n = {n} > {DEFAULT_ENUMERATION_CAP}")));
        }
        let size = 1u64 << n;
        let mut table = vec![Vec::with_capacity(size as usize); n];
        for idx in 0..size {
            let z = Intervention::from_index(n, idx);
            for (i, row) in table.iter_mut().enumerate() {
                let e = spec.exposure_of(i, &z);
                row.push(u32::try_from(e).map_err(|_| Error::usage("exposure id exceeds u32"))?);
            }
        }
        Self::new(n, table)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[Vec<u32>] {
        &self.table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> Arc<Network> {
        // unit 0 with neighbours {1, 2}
        Arc::new(Network::from_edges(3, &[(0, 1), (0, 2)]).unwrap())
    }

    #[test]
    fn no_effect_is_constant() {
        let spec = ExposureSpec::no_effect(3);
        for idx in 0..8 {
            assert_eq!(spec.exposure_of(1, &Intervention::from_index(3, idx)), 0);
        }
    }

    #[test]
    fn own_treatment_reads_z_i() {
        let spec = ExposureSpec::own_treatment(3);
        assert_eq!(spec.exposure_of(2, &Intervention::from_u8(&[0, 0, 1]).unwrap()), 1);
        assert_eq!(spec.exposure_of(2, &Intervention::from_u8(&[1, 1, 0]).unwrap()), 0);
    }

    #[test]
    fn stratified_ignores_neighbour_identity() {
        let spec = ExposureSpec::stratified(star());
        let a = Intervention::from_u8(&[1, 1, 0]).unwrap();
        let b = Intervention::from_u8(&[1, 0, 1]).unwrap();
        assert_eq!(spec.exposure_of(0, &a), spec.exposure_of(0, &b));
        assert_eq!(spec.exposure_of(0, &a), 3);
        let arb = ExposureSpec::arbitrary_neighborhood(star()).unwrap();
        assert_ne!(arb.exposure_of(0, &a), arb.exposure_of(0, &b));
    }

    #[test]
    fn counts_match_closed_forms_and_are_dense() {
        let g = Arc::new(Network::from_edges(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]).unwrap());
        let specs = [
            ExposureSpec::no_effect(5),
            ExposureSpec::own_treatment(5),
            ExposureSpec::stratified(g.clone()),
            ExposureSpec::arbitrary_neighborhood(g.clone()).unwrap(),
        ];
        for spec in &specs {
            let tab = TabulatedSpec::from_spec(spec).unwrap();
            for i in 0..5 {
                let d = g.degree(i) as u64;
                let expected = match spec.kind() {
                    ExposureKind::NoEffect => 1,
                    ExposureKind::OwnTreatment => 2,
                    ExposureKind::Stratified => 2 * (d + 1),
                    ExposureKind::ArbitraryNeighborhood => 1 << (d + 1),
                    ExposureKind::Tabulated => unreachable!(),
                };
                assert_eq!(spec.exposure_count(i), expected);
                assert_eq!(tab.counts[i], expected, "{:?} unit {i}", spec.kind());
            }
        }
    }

    #[test]
    fn tabulated_rejects_sparse_ids_and_wrong_shapes() {
        assert!(TabulatedSpec::new(1, vec![vec![0, 2]]).is_err());
        assert!(TabulatedSpec::new(1, vec![vec![0]]).is_err());
        assert!(TabulatedSpec::new(2, vec![vec![0; 4]]).is_err());
        assert!(TabulatedSpec::with_cap(3, vec![vec![0; 8]; 3], 2).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(ExposureKind::parse("stratified").unwrap(), ExposureKind::Stratified);
        assert!(ExposureKind::parse("bogus").is_err());
        assert!(ExposureSpec::from_kind(ExposureKind::Stratified, 4, None).is_err());
    }
}
