//! Potential outcome functions: exposure-based tables and linear-in-means.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::{ExposureKind, ExposureSpec, TabulatedSpec};
use crate::intervention::Intervention;
use crate::network::Network;

/// Slack on `|y| <= 1` for sums of coefficients that are bounded exactly
/// in real arithmetic but not in floating point.
const BOUND_SLACK: f64 = 1e-12;

/// `y_i(z) = coeffs[i][χ_i(z)]` with every coefficient in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct ExposureOutcomeModel {
    spec: ExposureSpec,
    coeffs: Vec<Vec<f64>>,
}

impl ExposureOutcomeModel {
    pub fn new(spec: ExposureSpec, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let n = spec.n();
        if coeffs.len() != n {
            return Err(Error::model(format!("{} coefficient rows for {n} units", coeffs.len())));
        }
        for (i, row) in coeffs.iter().enumerate() {
            let expected = spec.exposure_count(i);
            if row.len() as u64 != expected {
                return Err(Error::model(format!(
                    "unit {i}: {} coefficients, exposure set has {expected}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().find(|c| !(c.abs() <= 1.0)) {
                return Err(Error::model(format!("unit {i}: coefficient {c} outside [-1, 1]")));
            }
        }
        Ok(Self { spec, coeffs })
    }

    /// Builds a model by evaluating `f(unit, exposure)` on every exposure.
    pub fn from_fn(spec: ExposureSpec, mut f: impl FnMut(usize, u64) -> f64) -> Result<Self> {
        let coeffs = (0..spec.n())
            .map(|i| (0..spec.exposure_count(i)).map(|e| f(i, e)).collect())
            .collect();
        Self::new(spec, coeffs)
    }

    /// The SUTVA model `y_i(z) = alpha0[i]` if untreated, `alpha1[i]` if treated.
    pub fn sutva(alpha0: &[f64], alpha1: &[f64]) -> Result<Self> {
        if alpha0.len() != alpha1.len() {
            return Err(Error::model("alpha vectors differ in length"));
        }
        let coeffs = alpha0.iter().zip(alpha1).map(|(&a, &b)| vec![a, b]).collect();
        Self::new(ExposureSpec::own_treatment(alpha0.len()), coeffs)
    }

    pub fn spec(&self) -> &ExposureSpec {
        &self.spec
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    #[inline]
    pub fn outcome(&self, unit: usize, z: &Intervention) -> f64 {
        self.coeffs[unit][self.spec.exposure_of(unit, z) as usize]
    }

    pub fn evaluate(&self, z: &Intervention) -> Vec<f64> {
        (0..self.n()).map(|i| self.outcome(i, z)).collect()
    }

    /// `γ · y`; fails if the result leaves the unit ball.
    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|row| row.iter().map(|c| gamma * c).collect())
            .collect();
        Self::new(self.spec.clone(), coeffs)
    }
}

/// `y_i(z) = β₁ + β₂ z_i + β₃ T_i(z)`, `T_i` the treated fraction of neighbours.
#[derive(Clone, Debug)]
pub struct LimModel {
    network: Arc<Network>,
    beta: Vec<[f64; 3]>,
}

impl LimModel {
    /// Rejects degree-0 units and any unit whose outcome can leave `[-1, 1]`.
    ///
    /// The outcome is affine in `z_i ∈ {0,1}` and `T_i ∈ [0,1]`, so it is
    /// bounded iff the four corner values are.
    pub fn new(network: Arc<Network>, beta: Vec<[f64; 3]>) -> Result<Self> {
        if beta.len() != network.n() {
            return Err(Error::model(format!("{} beta triples for {} units", beta.len(), network.n())));
        }
        if let Some(i) = (0..network.n()).find(|&i| network.degree(i) == 0) {
            return Err(Error::model(format!(
                "unit {i} has no neighbours; the linear-in-means model needs degree >= 1"
            )));
        }
        for (i, b) in beta.iter().enumerate() {
            let corners = [b[0], b[0] + b[1], b[0] + b[2], b[0] + b[1] + b[2]];
            if corners.iter().any(|c| !(c.abs() <= 1.0 + BOUND_SLACK)) {
                return Err(Error::model(format!("unit {i}: beta {b:?} lets |y_i| exceed 1")));
            }
        }
        Ok(Self { network, beta })
    }

    /// Every unit shares the triple `b`.
    pub fn homogeneous(network: Arc<Network>, b: [f64; 3]) -> Result<Self> {
        let n = network.n();
        Self::new(network, vec![b; n])
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn beta(&self) -> &[[f64; 3]] {
        &self.beta
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    #[inline]
    pub fn outcome(&self, unit: usize, z: &Intervention) -> f64 {
        let nbrs = self.network.neighbors(unit);
        let treated = nbrs.iter().filter(|&&j| z.get(j)).count();
        let t = treated as f64 / nbrs.len() as f64;
        let [b1, b2, b3] = self.beta[unit];
        b1 + b2 * z.value(unit) + b3 * t
    }

    pub fn evaluate(&self, z: &Intervention) -> Vec<f64> {
        (0..self.n()).map(|i| self.outcome(i, z)).collect()
    }

    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        let beta = self.beta.iter().map(|b| b.map(|x| gamma * x)).collect();
        Self::new(self.network.clone(), beta)
    }
}

/// Any outcome model the crate can evaluate.
#[derive(Clone, Debug)]
pub enum OutcomeModel {
    Exposure(ExposureOutcomeModel),
    Lim(LimModel),
}

impl OutcomeModel {
    pub fn n(&self) -> usize {
        match self {
            Self::Exposure(m) => m.n(),
            Self::Lim(m) => m.n(),
        }
    }

    pub fn evaluate(&self, z: &Intervention) -> Vec<f64> {
        match self {
            Self::Exposure(m) => m.evaluate(z),
            Self::Lim(m) => m.evaluate(z),
        }
    }

    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        Ok(match self {
            Self::Exposure(m) => Self::Exposure(m.scaled(gamma)?),
            Self::Lim(m) => Self::Lim(m.scaled(gamma)?),
        })
    }
}

impl From<ExposureOutcomeModel> for OutcomeModel {
    fn from(m: ExposureOutcomeModel) -> Self {
        Self::Exposure(m)
    }
}

impl From<LimModel> for OutcomeModel {
    fn from(m: LimModel) -> Self {
        Self::Lim(m)
    }
}

/// JSON description of an exposure spec.
///
/// Network-based specs either carry `edges` or borrow the network supplied
/// when the document is resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SpecDoc {
    NoEffect { n: usize },
    OwnTreatment { n: usize },
    Stratified {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<(usize, usize)>>,
    },
    ArbitraryNeighborhood {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<(usize, usize)>>,
    },
    Tabulated { n: usize, table: Vec<Vec<u32>> },
}

impl SpecDoc {
    pub fn resolve(&self, network: Option<&Arc<Network>>) -> Result<ExposureSpec> {
        let net = |n: usize, edges: &Option<Vec<(usize, usize)>>| -> Result<Arc<Network>> {
            match (edges, network) {
                (Some(e), _) => Ok(Arc::new(Network::from_edges(n, e)?)),
                (None, Some(g)) if g.n() == n => Ok(g.clone()),
                (None, Some(g)) => Err(Error::usage(format!("spec has n = {n}, network has {}", g.n()))),
                (None, None) => Err(Error::usage("network-based spec without edges or a network")),
            }
        };
        match self {
            SpecDoc::NoEffect { n } => Ok(ExposureSpec::no_effect(*n)),
            SpecDoc::OwnTreatment { n } => Ok(ExposureSpec::own_treatment(*n)),
            SpecDoc::Stratified { n, edges } => Ok(ExposureSpec::stratified(net(*n, edges)?)),
            SpecDoc::ArbitraryNeighborhood { n, edges } => ExposureSpec::arbitrary_neighborhood(net(*n, edges)?),
            SpecDoc::Tabulated { n, table } => Ok(ExposureSpec::Tabulated(Arc::new(TabulatedSpec::new(*n, table.clone())?))),
        }
    }

    pub fn describe(spec: &ExposureSpec) -> Self {
        let n = spec.n();
        let edges = spec.network().map(|g| g.edges().collect());
        match spec.kind() {
            ExposureKind::NoEffect => SpecDoc::NoEffect { n },
            ExposureKind::OwnTreatment => SpecDoc::OwnTreatment { n },
            ExposureKind::Stratified => SpecDoc::Stratified { n, edges },
            ExposureKind::ArbitraryNeighborhood => SpecDoc::ArbitraryNeighborhood { n, edges },
            ExposureKind::Tabulated => match spec {
                ExposureSpec::Tabulated(t) => SpecDoc::Tabulated { n, table: t.table().to_vec() },
                _ => unreachable!(),
            },
        }
    }
}

/// On-disk model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelDoc {
    Exposure { spec: SpecDoc, coeffs: Vec<Vec<f64>> },
    Lim { beta: Vec<[f64; 3]> },
}

impl ModelDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents serialise")
    }

    /// Validates and builds the model. LIM models need `network`.
    pub fn resolve(&self, network: Option<&Arc<Network>>) -> Result<OutcomeModel> {
        match self {
            ModelDoc::Exposure { spec, coeffs } => {
                Ok(ExposureOutcomeModel::new(spec.resolve(network)?, coeffs.clone())?.into())
            }
            ModelDoc::Lim { beta } => {
                let g = network.ok_or_else(|| Error::usage("a lim model needs a network"))?;
                Ok(LimModel::new(g.clone(), beta.clone())?.into())
            }
        }
    }

    pub fn describe(model: &OutcomeModel) -> Self {
        match model {
            OutcomeModel::Exposure(m) => ModelDoc::Exposure {
                spec: SpecDoc::describe(m.spec()),
                coeffs: m.coeffs().to_vec(),
            },
            OutcomeModel::Lim(m) => ModelDoc::Lim { beta: m.beta().to_vec() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_cycle() -> Arc<Network> {
        Arc::new(Network::cycle(4).unwrap())
    }

    #[test]
    fn lim_pure_spillover_on_extremes() {
        let m = LimModel::homogeneous(four_cycle(), [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.evaluate(&Intervention::ones(4)), vec![1.0; 4]);
        assert_eq!(m.evaluate(&Intervention::zeros(4)), vec![0.0; 4]);
    }

    #[test]
    fn sutva_lookup_matches_2z_minus_1() {
        let m = ExposureOutcomeModel::sutva(&[-1.0; 5], &[1.0; 5]).unwrap();
        for idx in 0..32 {
            let z = Intervention::from_index(5, idx);
            let y = m.evaluate(&z);
            for i in 0..5 {
                assert_eq!(y[i], 2.0 * z.value(i) - 1.0);
            }
        }
    }

    #[test]
    fn bounds_enforced_not_clamped() {
        assert!(ExposureOutcomeModel::sutva(&[1.5], &[0.0]).is_err());
        assert!(ExposureOutcomeModel::sutva(&[f64::NAN], &[0.0]).is_err());
        let g = four_cycle();
        assert!(LimModel::homogeneous(g.clone(), [0.5, 0.0, 0.6]).is_err());
        assert!(LimModel::homogeneous(g.clone(), [-1.0, 0.0, 2.0]).is_ok());
        assert!(LimModel::homogeneous(g.clone(), [0.0, 0.0, 2.0]).is_err());
        assert!(LimModel::homogeneous(g, [0.7, 0.3, -1.0]).is_ok());
    }

    #[test]
    fn lim_rejects_isolated_units() {
        let g = Arc::new(Network::from_edges(3, &[(0, 1)]).unwrap());
        assert!(matches!(LimModel::homogeneous(g, [0.0; 3]), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn coefficient_count_checked() {
        let spec = ExposureSpec::stratified(four_cycle());
        assert!(ExposureOutcomeModel::new(spec.clone(), vec![vec![0.0; 5]; 4]).is_err());
        assert!(ExposureOutcomeModel::new(spec, vec![vec![0.0; 6]; 4]).is_ok());
    }

    #[test]
    fn model_doc_json() {
        let text = r#"{"kind":"exposure","spec":{"type":"stratified","n":3,"edges":[[0,1],[1,2]]},
                       "coeffs":[[0,0,0,0],[0,0,0,0,0.5,0.5],[1,-1,1,-1]]}"#;
        let doc = ModelDoc::from_json(text).unwrap();
        let model = doc.resolve(None).unwrap();
        assert_eq!(model.n(), 3);
        assert_eq!(ModelDoc::from_json(&ModelDoc::describe(&model).to_json()).unwrap(), doc);

        let lim = ModelDoc::from_json(r#"{"kind":"lim","beta":[[0,0,1],[0,0,1],[0,0,1],[0,0,1]]}"#).unwrap();
        assert!(lim.resolve(None).is_err());
        assert!(lim.resolve(Some(&four_cycle())).is_ok());
        assert!(ModelDoc::from_json(r#"{"kind":"other"}"#).is_err());
    }
}
