//! Coarse-grained population states: how many compartments hold each
//! content vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crn::Complex;
use crate::error::{Error, Result};

/// Finite-support map from compartment content to multiplicity.
///
/// Canonical: no content maps to zero, and iteration is in lexicographic
/// content order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PopulationState {
    contents: BTreeMap<Complex, u64>,
}

impl PopulationState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from `(content, multiplicity)` pairs; repeated contents
    /// accumulate and zero multiplicities are dropped.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Complex, u64)>,
    {
        let mut state = PopulationState::new();
        let mut dim = None;
        for (x, n) in pairs {
            match dim {
                None => dim = Some(x.dim()),
                Some(d) if d != x.dim() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: x.dim(),
                    })
                }
                _ => {}
            }
            state.add(x, n)?;
        }
        Ok(state)
    }

    /// One-species convenience: `{content: multiplicity}`.
    pub fn scalar(pairs: &[(u64, u64)]) -> Self {
        Self::from_pairs(pairs.iter().map(|&(x, n)| (Complex(vec![x]), n)))
            .expect("scalar contents share one dimension")
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn multiplicity(&self, x: &Complex) -> u64 {
        self.contents.get(x).copied().unwrap_or(0)
    }

    /// `(content, multiplicity)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&Complex, u64)> + '_ {
        self.contents.iter().map(|(x, &n)| (x, n))
    }

    /// Number of distinct contents.
    pub fn support_len(&self) -> usize {
        self.contents.len()
    }

    /// Adds `count` compartments with content `x`.
    pub fn add(&mut self, x: Complex, count: u64) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let slot = self.contents.entry(x).or_insert(0);
        *slot = slot.checked_add(count).ok_or(Error::CountOverflow)?;
        Ok(())
    }

    /// Removes one compartment with content `x`. Panics if none is present;
    /// callers only remove contents they have just observed.
    pub fn remove_one(&mut self, x: &Complex) {
        let n = self
            .contents
            .get_mut(x)
            .expect("removing a content that is not present");
        *n -= 1;
        if *n == 0 {
            self.contents.remove(x);
        }
    }

    /// Content dimension, if the state is non-empty.
    pub fn dim(&self) -> Option<usize> {
        self.contents.keys().next().map(Complex::dim)
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        for x in self.contents.keys() {
            if x.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.dim(),
                });
            }
        }
        Ok(())
    }

    /// `C(n)`: total number of compartments.
    pub fn total_compartments(&self) -> u64 {
        self.contents.values().sum()
    }

    /// Total molecules of `species` across all compartments.
    pub fn species_total(&self, species: usize) -> Result<u64> {
        self.species_total_where(species, |_| true)
    }

    /// Total molecules of `species` over compartments whose content
    /// satisfies `keep`.
    pub fn species_total_where<P>(&self, species: usize, keep: P) -> Result<u64>
    where
        P: Fn(&Complex) -> bool,
    {
        let mut acc: u64 = 0;
        for (x, &n) in &self.contents {
            if species >= x.dim() {
                return Err(Error::InvalidSpeciesIndex {
                    index: species,
                    species: x.dim(),
                });
            }
            if keep(x) {
                let term = x.get(species).checked_mul(n).ok_or(Error::CountOverflow)?;
                acc = acc.checked_add(term).ok_or(Error::CountOverflow)?;
            }
        }
        Ok(acc)
    }

    /// Substrate held in compartments that contain no enzyme (`Ŝ`).
    pub fn substrate_without_enzyme(&self, enzyme: usize, substrate: usize) -> Result<u64> {
        self.species_total_where(substrate, |x| x.get(enzyme) == 0)
    }

    /// Substrate held in compartments with at least one enzyme.
    pub fn substrate_with_enzyme(&self, enzyme: usize, substrate: usize) -> Result<u64> {
        self.species_total_where(substrate, |x| x.get(enzyme) > 0)
    }

    /// Compartments with a non-zero content (`C_{>0}`).
    pub fn nonempty_compartments(&self) -> u64 {
        self.contents
            .iter()
            .filter(|(x, _)| !x.is_zero())
            .map(|(_, &n)| n)
            .sum()
    }

    /// Per-species totals (zeros of length `d` for the empty state).
    pub fn species_totals(&self, d: usize) -> Result<Vec<u64>> {
        (0..d).map(|i| self.species_total(i)).collect()
    }

    /// Total molecule count across all species and compartments.
    pub fn total_mass(&self) -> u64 {
        self.contents.iter().map(|(x, &n)| x.mass() * n).sum()
    }
}

impl Serialize for PopulationState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.contents.len()))?;
        for (x, n) in &self.contents {
            seq.serialize_element(&(x, n))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for PopulationState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<(Complex, u64)> = Vec::deserialize(d)?;
        PopulationState::from_pairs(pairs).map_err(serde::de::Error::custom)
    }
}
