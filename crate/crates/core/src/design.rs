//! Experimental designs: probability measures over `Ω = {0,1}^n`.

use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::intervention::Intervention;

/// Largest `n` for which exact operations enumerate all of `Ω`.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Design {
    /// Each `z_i` independently treated with probability `p`.
    Bernoulli { p: f64 },
    /// Finitely supported design given atom by atom.
    ExplicitFinite(Vec<(Intervention, f64)>),
}

impl Design {
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::usage(format!("bernoulli probability must lie in (0, 1), got {p}")));
        }
        Ok(Self::Bernoulli { p })
    }

    pub fn explicit(atoms: Vec<(Intervention, f64)>) -> Result<Self> {
        let Some(n) = atoms.first().map(|(z, _)| z.len()) else {
            return Err(Error::usage("explicit design needs at least one atom"));
        };
        if atoms.iter().any(|(z, _)| z.len() != n) {
            return Err(Error::usage("explicit design atoms have mixed lengths"));
        }
        if atoms.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::usage("explicit design probabilities must be nonnegative"));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::usage(format!("explicit design probabilities sum to {total}, not 1")));
        }
        Ok(Self::ExplicitFinite(atoms))
    }

    /// Draws one intervention of length `n`.
    ///
    /// # Panics
    /// If an explicit design's atoms do not have length `n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Intervention {
        match self {
            Self::Bernoulli { p } => Intervention::new((0..n).map(|_| rng.random_bool(*p)).collect()),
            Self::ExplicitFinite(atoms) => {
                assert_eq!(atoms[0].0.len(), n, "explicit design has a different unit count");
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (z, w) in atoms {
                    acc += w;
                    if u < acc {
                        return z.clone();
                    }
                }
                // rounding left u above the accumulated mass
                atoms
                    .iter()
                    .rev()
                    .find(|(_, w)| *w > 0.0)
                    .map(|(z, _)| z.clone())
                    .expect("design has positive mass")
            }
        }
    }

    /// All interventions with their exact probabilities, using the default cap.
    pub fn enumerate(&self, n: usize) -> Result<Enumeration<'_>> {
        self.enumerate_capped(n, DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_capped(&self, n: usize, cap: usize) -> Result<Enumeration<'_>> {
        if n > cap || n > 63 {
            return Err(Error::usage(format!("enumeration over 2^{n} interventions exceeds the cap n <= {cap}")));
        }
        match self {
            Self::Bernoulli { p } => Ok(Enumeration::Bernoulli { n, p: *p, next: 0 }),
            Self::ExplicitFinite(atoms) => {
                if atoms[0].0.len() != n {
                    return Err(Error::usage(format!(
                        "explicit design has {} units, expected {n}",
                        atoms[0].0.len()
                    )));
                }
                Ok(Enumeration::Explicit(atoms.iter()))
            }
        }
    }

    /// Probability of a single intervention.
    pub fn probability(&self, z: &Intervention) -> f64 {
        match self {
            Self::Bernoulli { p } => bernoulli_mass(*p, z.len(), z.treated_count()),
            Self::ExplicitFinite(atoms) => atoms.iter().filter(|(a, _)| a == z).map(|(_, w)| w).sum(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Bernoulli { p } => format!("bernoulli:{p}"),
            Self::ExplicitFinite(atoms) => format!("explicit:{}", atoms.len()),
        }
    }
}

/// `p^k (1-p)^(n-k)` as a direct product.
fn bernoulli_mass(p: f64, n: usize, treated: usize) -> f64 {
    let mut mass = 1.0;
    for _ in 0..treated {
        mass *= p;
    }
    for _ in treated..n {
        mass *= 1.0 - p;
    }
    mass
}

/// Parses the `bernoulli:<p>` design syntax.
impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::usage(format!("design {s:?}: expected bernoulli:<p>")))?;
        match kind.trim() {
            "bernoulli" => {
                let p: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::usage(format!("design {s:?}: bad probability")))?;
                Self::bernoulli(p)
            }
            other => Err(Error::usage(format!("unknown design kind {other:?}"))),
        }
    }
}

/// Iterator over `(z, D(z))`; Bernoulli walks `z` in index order.
pub enum Enumeration<'a> {
    Bernoulli { n: usize, p: f64, next: u64 },
    Explicit(std::slice::Iter<'a, (Intervention, f64)>),
}

impl Iterator for Enumeration<'_> {
    type Item = (Intervention, f64);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Enumeration::Bernoulli { n, p, next } => {
                if *next >= 1u64 << *n {
                    return None;
                }
                let z = Intervention::from_index(*n, *next);
                *next += 1;
                let mass = bernoulli_mass(*p, *n, z.treated_count());
                Some((z, mass))
            }
            Enumeration::Explicit(it) => it.next().cloned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn bernoulli_enumeration_small_cases() {
        let d = Design::bernoulli(0.5).unwrap();
        let atoms: Vec<_> = d.enumerate(2).unwrap().collect();
        assert_eq!(atoms.len(), 4);
        assert!(atoms.iter().all(|(_, w)| *w == 0.25));

        let d = Design::bernoulli(0.25).unwrap();
        let atoms: Vec<_> = d.enumerate(1).unwrap().collect();
        assert_eq!(atoms[0], (Intervention::from_u8(&[0]).unwrap(), 0.75));
        assert_eq!(atoms[1], (Intervention::from_u8(&[1]).unwrap(), 0.25));

        let d = Design::bernoulli(0.3).unwrap();
        let all_ones = d.enumerate(3).unwrap().last().unwrap();
        assert_eq!(all_ones.0, Intervention::ones(3));
        assert!((all_ones.1 - 0.027).abs() < 1e-15);
    }

    #[test]
    fn enumeration_sums_to_one() {
        for p in [0.1, 0.3, 0.5, 0.9] {
            // compensated sum: 2^16 naive additions drift by ~1e-12
            let (mut total, mut comp) = (0.0f64, 0.0f64);
            for (_, w) in Design::bernoulli(p).unwrap().enumerate(16).unwrap() {
                let t = total + w;
                comp += if total.abs() >= w.abs() { (total - t) + w } else { (w - t) + total };
                total = t;
            }
            total += comp;
            assert!((total - 1.0).abs() < 1e-12, "p={p} total={total}");
        }
    }

    #[test]
    fn enumeration_respects_cap() {
        let d = Design::bernoulli(0.5).unwrap();
        assert!(matches!(d.enumerate(21), Err(Error::Usage(_))));
        assert!(d.enumerate_capped(5, 4).is_err());
    }

    #[test]
    fn sample_treated_fraction() {
        let d = Design::bernoulli(0.5).unwrap();
        let mut rng = substream(1, 0);
        let draws = 100_000;
        let treated = (0..draws).filter(|_| d.sample(1, &mut rng).get(0)).count();
        let frac = treated as f64 / draws as f64;
        assert!((frac - 0.5).abs() <= 3.0 * (0.25f64 / draws as f64).sqrt());
    }

    #[test]
    fn sample_is_deterministic_and_degenerate_design_is_constant() {
        let d = Design::bernoulli(0.5).unwrap();
        let a: Vec<_> = (0..5).scan(substream(3, 1), |r, _| Some(d.sample(8, r))).collect();
        let b: Vec<_> = (0..5).scan(substream(3, 1), |r, _| Some(d.sample(8, r))).collect();
        assert_eq!(a, b);

        let z0 = Intervention::from_u8(&[1, 0, 1]).unwrap();
        let point = Design::explicit(vec![(z0.clone(), 1.0)]).unwrap();
        let mut rng = substream(0, 0);
        assert!((0..100).all(|_| point.sample(3, &mut rng) == z0));
    }

    #[test]
    fn parse_and_validation() {
        assert_eq!("bernoulli:0.3".parse::<Design>().unwrap(), Design::Bernoulli { p: 0.3 });
        assert!("bernoulli:1.0".parse::<Design>().is_err());
        assert!("bernoulli:0".parse::<Design>().is_err());
        assert!("cluster:0.5".parse::<Design>().is_err());
        assert!("0.5".parse::<Design>().is_err());
        let z = Intervention::zeros(2);
        assert!(Design::explicit(vec![(z.clone(), 0.4)]).is_err());
        assert!(Design::explicit(vec![(z.clone(), 1.2), (z, -0.2)]).is_err());
    }

    #[test]
    fn coordinates_uncorrelated() {
        let d = Design::bernoulli(0.3).unwrap();
        let mut rng = substream(9, 0);
        let reps = 50_000;
        let (mut m0, mut m1, mut m01) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let z = d.sample(2, &mut rng);
            m0 += z.value(0);
            m1 += z.value(1);
            m01 += z.value(0) * z.value(1);
        }
        let r = reps as f64;
        let (m0, m1, m01) = (m0 / r, m1 / r, m01 / r);
        let se = (0.21f64 / r).sqrt();
        assert!((m0 - 0.3).abs() < 4.0 * se);
        assert!((m1 - 0.3).abs() < 4.0 * se);
        // covariance standard error is about p(1-p)/sqrt(reps)
        assert!((m01 - m0 * m1).abs() < 4.0 * 0.21 / r.sqrt());
    }
}
