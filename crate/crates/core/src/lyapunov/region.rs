//! Finite sets of population states to check drift conditions on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crn::Complex;
use crate::error::{Error, Result};
use crate::population::PopulationState;
use crate::rng;

pub const DEFAULT_C_MAX: u64 = 8;
pub const DEFAULT_MASS_MAX: u64 = 16;
pub const DEFAULT_SAMPLES: usize = 2_000;
/// Refuse enumerations larger than this.
pub const ENUMERATION_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    /// Every state with `C(n) ≤ c_max` and total mass `≤ mass_max`.
    Enumerate {
        c_max: u64,
        mass_max: u64,
    },
    /// Random states with `C(n) ≤ c_max` and total mass `≤ mass_max`.
    Sample {
        count: usize,
        c_max: u64,
        mass_max: u64,
        #[serde(default)]
        seed: u64,
    },
    Explicit {
        states: Vec<PopulationState>,
    },
}

impl RegionSpec {
    /// Full enumeration for one species, sampling otherwise.
    pub fn default_for(d: usize) -> Self {
        if d == 1 {
            RegionSpec::Enumerate {
                c_max: DEFAULT_C_MAX,
                mass_max: DEFAULT_MASS_MAX,
            }
        } else {
            RegionSpec::Sample {
                count: DEFAULT_SAMPLES,
                c_max: DEFAULT_C_MAX,
                mass_max: DEFAULT_MASS_MAX,
                seed: 0,
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RegionSpec::Enumerate { c_max, mass_max } => {
                format!("all states with C <= {c_max} and total mass <= {mass_max}")
            }
            RegionSpec::Sample {
                count,
                c_max,
                mass_max,
                seed,
            } => format!(
                "{count} sampled states with C <= {c_max} and total mass <= {mass_max} (seed {seed})"
            ),
            RegionSpec::Explicit { states } => format!("{} explicit states", states.len()),
        }
    }

    pub fn states(&self, d: usize) -> Result<Vec<PopulationState>> {
        match self {
            RegionSpec::Enumerate { c_max, mass_max } => enumerate_states(d, *c_max, *mass_max),
            RegionSpec::Sample {
                count,
                c_max,
                mass_max,
                seed,
            } => Ok(sample_states(d, *count, *c_max, *mass_max, *seed)),
            RegionSpec::Explicit { states } => {
                for s in states {
                    s.check_dim(d)?;
                }
                Ok(states.clone())
            }
        }
    }
}

/// All content vectors of dimension `d` with mass at most `m`, in
/// lexicographic order.
fn contents_up_to(d: usize, m: u64) -> Vec<Complex> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; d];
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Complex>) {
        if i == cur.len() {
            out.push(Complex(cur.clone()));
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, m, &mut cur, &mut out);
    out
}

/// Every population state of dimension `d` with at most `c_max`
/// compartments and total mass at most `mass_max`.
pub fn enumerate_states(d: usize, c_max: u64, mass_max: u64) -> Result<Vec<PopulationState>> {
    let contents = contents_up_to(d, mass_max);
    let mut out = Vec::new();
    let mut chosen: Vec<(usize, u64)> = Vec::new();

    // Multisets as non-decreasing sequences of content indices.
    fn rec(
        contents: &[Complex],
        start: usize,
        c_left: u64,
        m_left: u64,
        chosen: &mut Vec<(usize, u64)>,
        out: &mut Vec<PopulationState>,
    ) -> Result<()> {
        if out.len() > ENUMERATION_LIMIT {
            return Err(Error::InvalidParameter {
                name: "region",
                reason: format!("enumeration exceeds {ENUMERATION_LIMIT} states; sample instead"),
            });
        }
        let state =
            PopulationState::from_pairs(chosen.iter().map(|&(i, k)| (contents[i].clone(), k)))?;
        out.push(state);
        if c_left == 0 {
            return Ok(());
        }
        for i in start..contents.len() {
            let m = contents[i].mass();
            if m > m_left {
                continue;
            }
            let max_k = m_left.checked_div(m).map_or(c_left, |k| c_left.min(k));
            for k in 1..=max_k {
                chosen.push((i, k));
                rec(contents, i + 1, c_left - k, m_left - k * m, chosen, out)?;
                chosen.pop();
            }
        }
        Ok(())
    }
    rec(&contents, 0, c_max, mass_max, &mut chosen, &mut out)?;
    Ok(out)
}

/// Random states: `C` uniform on `0..=c_max`, total mass uniform on
/// `0..=mass_max`, each molecule placed in a uniform compartment as a
/// uniform species.
pub fn sample_states(
    d: usize,
    count: usize,
    c_max: u64,
    mass_max: u64,
    seed: u64,
) -> Vec<PopulationState> {
    let mut rng = rng::rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let c = rng.random_range(0..=c_max) as usize;
            if c == 0 {
                return PopulationState::new();
            }
            let m = rng.random_range(0..=mass_max);
            let mut comps = vec![vec![0u64; d]; c];
            for _ in 0..m {
                let i = rng.random_range(0..c);
                let j = rng.random_range(0..d);
                comps[i][j] += 1;
            }
            PopulationState::from_pairs(comps.into_iter().map(|v| (Complex(v), 1)))
                .expect("sampled contents share one dimension")
        })
        .collect()
}
