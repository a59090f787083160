//! Content distribution of newly created compartments.

use serde::{Deserialize, Serialize};

use crate::crn::Complex;
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

/// Default cumulative tail mass discarded when truncating Poisson inflow.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InflowKind {
    PointMass {
        content: Complex,
    },
    Categorical {
        table: Vec<(Complex, f64)>,
    },
    /// Independent Poisson counts per species.
    PoissonProduct {
        rates: Vec<f64>,
        tail_bound: f64,
    },
}

/// A finite (possibly truncated and renormalized) inflow law.
#[derive(Debug, Clone, PartialEq)]
pub struct InflowDistribution {
    kind: InflowKind,
    support: Vec<(Complex, f64)>,
    cumulative: Vec<f64>,
    mean_mass: f64,
    tail_mass: f64,
    truncation: Option<Vec<u64>>,
}

impl InflowDistribution {
    pub fn point_mass(content: Complex) -> Self {
        Self::from_kind(InflowKind::PointMass { content }).expect("point mass is always valid")
    }

    pub fn categorical(table: Vec<(Complex, f64)>) -> Result<Self> {
        Self::from_kind(InflowKind::Categorical { table })
    }

    pub fn poisson_product(rates: Vec<f64>, tail_bound: f64) -> Result<Self> {
        Self::from_kind(InflowKind::PoissonProduct { rates, tail_bound })
    }

    pub fn from_kind(kind: InflowKind) -> Result<Self> {
        let (support, tail_mass, truncation) = match &kind {
            InflowKind::PointMass { content } => (vec![(content.clone(), 1.0)], 0.0, None),
            InflowKind::Categorical { table } => (categorical_support(table)?, 0.0, None),
            InflowKind::PoissonProduct { rates, tail_bound } => {
                let (s, tail, cut) = poisson_support(rates, *tail_bound)?;
                (s, tail, Some(cut))
            }
        };
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for (_, p) in &support {
            acc += p;
            cumulative.push(acc);
        }
        let mean_mass = support
            .iter()
            .map(|(x, p)| p * x.mass() as f64)
            .sum::<f64>();
        if !mean_mass.is_finite() {
            return Err(Error::InfiniteInflowMass);
        }
        Ok(InflowDistribution {
            kind,
            support,
            cumulative,
            mean_mass,
            tail_mass,
            truncation,
        })
    }

    pub fn kind(&self) -> &InflowKind {
        &self.kind
    }

    /// Represented support with normalized probabilities, in content order.
    pub fn support(&self) -> &[(Complex, f64)] {
        &self.support
    }

    /// Mean total molecule count of a new compartment over the represented
    /// support (`λ`).
    pub fn mean_mass(&self) -> f64 {
        self.mean_mass
    }

    /// Probability mass discarded by truncation before renormalizing.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Per-species largest represented count for truncated kinds.
    pub fn truncation(&self) -> Option<&[u64]> {
        self.truncation.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.support[0].0.dim()
    }

    /// `true` for the point mass at the empty content.
    pub fn is_delta_zero(&self) -> bool {
        self.support.len() == 1 && self.support[0].0.is_zero()
    }

    pub fn sample(&self, rng: &mut SimRng) -> Complex {
        let u = rng::uniform(rng) * self.cumulative[self.cumulative.len() - 1];
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.support[k.min(self.support.len() - 1)].0.clone()
    }
}

/// Draws a content from `inflow`.
pub fn inflow_sample(inflow: &InflowDistribution, rng: &mut SimRng) -> Complex {
    inflow.sample(rng)
}

fn categorical_support(table: &[(Complex, f64)]) -> Result<Vec<(Complex, f64)>> {
    if table.is_empty() {
        return Err(Error::InvalidInflow("empty categorical table".into()));
    }
    let d = table[0].0.dim();
    let mut merged: std::collections::BTreeMap<Complex, f64> = Default::default();
    for (x, p) in table {
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.dim(),
            });
        }
        if !(*p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidInflow(format!("probability {p} for {x}")));
        }
        *merged.entry(x.clone()).or_insert(0.0) += p;
    }
    let total: f64 = merged.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInflow(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(merged
        .into_iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(x, p)| (x, p / total))
        .collect())
}

/// Poisson pmf up to the point where the upper tail drops below `tail`.
/// Returns `(pmf[0..=K], tail beyond K)`.
fn poisson_truncated(rate: f64, tail: f64) -> (Vec<f64>, f64) {
    if rate == 0.0 {
        return (vec![1.0], 0.0);
    }
    // Log-space recurrence, continued well past the mode until terms are
    // negligible, so that upper tails can be summed directly.
    let ln_rate = rate.ln();
    let mut ln_p = -rate;
    let mut pmf = vec![ln_p.exp()];
    let mut k = 0u64;
    loop {
        k += 1;
        ln_p += ln_rate - (k as f64).ln();
        let p = ln_p.exp();
        pmf.push(p);
        if k as f64 > rate && p < 1e-40 {
            break;
        }
    }
    let mut suffix = vec![0.0; pmf.len() + 1];
    for i in (0..pmf.len()).rev() {
        suffix[i] = suffix[i + 1] + pmf[i];
    }
    let cut = (0..pmf.len())
        .find(|&i| suffix[i + 1] < tail)
        .unwrap_or(pmf.len() - 1);
    let kept = pmf[..=cut].to_vec();
    (kept, suffix[cut + 1])
}

type PoissonSupport = (Vec<(Complex, f64)>, f64, Vec<u64>);

fn poisson_support(rates: &[f64], tail_bound: f64) -> Result<PoissonSupport> {
    if rates.is_empty() {
        return Err(Error::InvalidInflow("no species rates".into()));
    }
    if !(tail_bound > 0.0 && tail_bound < 1.0) {
        return Err(Error::InvalidInflow(format!(
            "tail bound {tail_bound} not in (0,1)"
        )));
    }
    let per_species_tail = tail_bound / rates.len() as f64;
    let mut marginals = Vec::with_capacity(rates.len());
    let mut kept_mass = 1.0;
    for &r in rates {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidInflow(format!("Poisson rate {r}")));
        }
        let (pmf, tail) = poisson_truncated(r, per_species_tail);
        kept_mass *= 1.0 - tail;
        marginals.push(pmf);
    }
    let tail_mass = 1.0 - kept_mass;
    let cut: Vec<u64> = marginals.iter().map(|m| m.len() as u64 - 1).collect();

    let mut support = vec![(Vec::new(), 1.0)];
    for m in &marginals {
        let mut next = Vec::with_capacity(support.len() * m.len());
        for (prefix, p) in &support {
            for (k, q) in m.iter().enumerate() {
                let mut v: Vec<u64> = prefix.clone();
                v.push(k as u64);
                next.push((v, p * q));
            }
        }
        support = next;
    }
    let total: f64 = support.iter().map(|(_, p)| p).sum();
    let support = support
        .into_iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(v, p)| (Complex(v), p / total))
        .collect();
    Ok((support, tail_mass, cut))
}
