use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary treatment vector `z` in `{0,1}^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Intervention {
    bits: Vec<bool>,
}

impl Intervention {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    /// Builds from 0/1 integers; any other value is rejected.
    pub fn from_u8(values: &[u8]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::usage(format!("treatment must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    /// The intervention whose unit `j` is treated iff bit `j` of `index` is set.
    ///
    /// Enumeration of `Ω` throughout the crate walks `index` in `0..2^n`.
    pub fn from_index(n: usize, index: u64) -> Self {
        debug_assert!(n <= 64);
        Self {
            bits: (0..n).map(|j| (index >> j) & 1 == 1).collect(),
        }
    }

    /// Inverse of [`Intervention::from_index`]; only meaningful for `n <= 64`.
    pub fn index(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &b)| acc | ((b as u64) << j))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, unit: usize) -> bool {
        self.bits[unit]
    }

    #[inline]
    pub fn value(&self, unit: usize) -> f64 {
        if self.bits[unit] {
            1.0
        } else {
            0.0
        }
    }

    pub fn set(&mut self, unit: usize, treated: bool) {
        self.bits[unit] = treated;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn treated_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Returns a copy with `unit` toggled.
    pub fn flipped(&self, unit: usize) -> Self {
        let mut out = self.clone();
        out.bits[unit] = !out.bits[unit];
        out
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for idx in 0..32u64 {
            let z = Intervention::from_index(5, idx);
            assert_eq!(z.index(), idx);
        }
        assert_eq!(Intervention::from_index(3, 0b101).to_string(), "101");
    }

    #[test]
    fn rejects_non_binary() {
        assert!(Intervention::from_u8(&[0, 1, 2]).is_err());
        assert_eq!(Intervention::from_u8(&[1, 0]).unwrap().treated_count(), 1);
    }
}
