//! Fragmentation kernels `ψ(x, ·)`: the law of one daughter's content when
//! a compartment with content `x` splits. The co-daughter receives `x − y`.
//!
//! Every kernel is exposed as a labeled-daughter pmf. Kernels defined on
//! unordered pairs `{y, x − y}` put half of a pair's weight on each label
//! (all of it when `y = x − y`).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::crn::{falling_binomial, Complex};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FragmentationKernel {
    /// Each molecule picks a daughter by a fair coin:
    /// `ψ(x, y) = 2^{-|x|} ∏ C(x_i, y_i)`.
    BinomialHalf,
    /// Uniform over unordered daughter pairs `{y, x − y}`.
    UniformUnorderedPairs,
    /// Enzyme-tracking split with substrate retention probability `p`.
    ///
    /// * no enzyme: every molecule splits by a fair coin;
    /// * one enzyme: it goes to the labeled daughter, and each substrate
    ///   follows it independently with probability `p`;
    /// * two or more: every molecule (enzymes included) splits by a fair
    ///   coin, so all enzymes end up together with probability `2^{1−e}`.
    ///
    /// Species other than the enzyme and substrate split by a fair coin.
    EnzymeSubstrate {
        p: f64,
        enzyme: usize,
        substrate: usize,
    },
    /// Explicit pmf per parent content.
    Table {
        entries: BTreeMap<Complex, Vec<(Complex, f64)>>,
    },
}

impl FragmentationKernel {
    pub fn enzyme_substrate(p: f64, enzyme: usize, substrate: usize) -> Result<Self> {
        let k = FragmentationKernel::EnzymeSubstrate {
            p,
            enzyme,
            substrate,
        };
        k.validate(enzyme.max(substrate) + 1)?;
        Ok(k)
    }

    /// Validates parameters against a content dimension `d`. Table entries
    /// are renormalized in place of an error when they sum to within 1e-9 of
    /// one.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            FragmentationKernel::BinomialHalf | FragmentationKernel::UniformUnorderedPairs => {
                Ok(())
            }
            FragmentationKernel::EnzymeSubstrate {
                p,
                enzyme,
                substrate,
            } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidKernel(format!("p = {p} must lie in (0, 1)")));
                }
                if enzyme == substrate {
                    return Err(Error::InvalidKernel(
                        "enzyme and substrate must be different species".into(),
                    ));
                }
                for &i in [enzyme, substrate] {
                    if i >= d {
                        return Err(Error::InvalidSpeciesIndex {
                            index: i,
                            species: d,
                        });
                    }
                }
                Ok(())
            }
            FragmentationKernel::Table { entries } => {
                for (x, pmf) in entries {
                    if x.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: x.dim(),
                        });
                    }
                    let mut total = 0.0;
                    for (y, p) in pmf {
                        if y.dim() != d || !y.le_componentwise(x) {
                            return Err(Error::InvalidKernel(format!(
                                "daughter {y} is not contained in parent {x}"
                            )));
                        }
                        if !(*p >= 0.0) {
                            return Err(Error::InvalidKernel(format!("negative weight for {y}")));
                        }
                        total += p;
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidKernel(format!("pmf for {x} sums to {total}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// `(enzyme, substrate)` indices for the enzyme-tracking kernel.
    pub fn enzyme_layout(&self) -> Option<(usize, usize)> {
        match self {
            FragmentationKernel::EnzymeSubstrate {
                enzyme, substrate, ..
            } => Some((*enzyme, *substrate)),
            _ => None,
        }
    }
}

/// Binomial(n, p) pmf over `0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    if p == 0.0 || q == 0.0 {
        let mut out = vec![0.0; n as usize + 1];
        out[if p == 0.0 { 0 } else { n as usize }] = 1.0;
        return out;
    }
    if n <= 60 {
        return (0..=n)
            .map(|k| falling_binomial(n, k) * p.powi(k as i32) * q.powi((n - k) as i32))
            .collect();
    }
    let (lp, lq) = (p.ln(), q.ln());
    let mut ln_c = 0.0;
    let mut out = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        if k > 0 {
            ln_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        out.push((ln_c + k as f64 * lp + (n - k) as f64 * lq).exp());
    }
    out
}

/// Per-coordinate daughter marginals for kernels that split coordinates
/// independently.
fn product_pmf(marginals: &[Vec<f64>]) -> Vec<(Complex, f64)> {
    let mut acc: Vec<(Vec<u64>, f64)> = vec![(Vec::new(), 1.0)];
    for m in marginals {
        let mut next = Vec::with_capacity(acc.len() * m.len());
        for (prefix, p) in &acc {
            for (k, q) in m.iter().enumerate() {
                if *q == 0.0 {
                    continue;
                }
                let mut v = prefix.clone();
                v.push(k as u64);
                next.push((v, p * q));
            }
        }
        acc = next;
    }
    acc.into_iter().map(|(v, p)| (Complex(v), p)).collect()
}

/// Explicit pmf of one labeled daughter, sorted by content.
pub fn kernel_pmf(kernel: &FragmentationKernel, x: &Complex) -> Result<Vec<(Complex, f64)>> {
    let pmf = match kernel {
        FragmentationKernel::BinomialHalf => {
            let marginals: Vec<_> = x.counts().iter().map(|&xi| binomial_pmf(xi, 0.5)).collect();
            product_pmf(&marginals)
        }
        FragmentationKernel::UniformUnorderedPairs => {
            let labeled = x
                .counts()
                .iter()
                .try_fold(1u64, |acc, &xi| acc.checked_mul(xi + 1))
                .ok_or(Error::CountOverflow)?;
            let self_paired = x.counts().iter().all(|xi| xi % 2 == 0);
            let slots = (labeled + u64::from(self_paired)) as f64;
            let marginals: Vec<_> = x
                .counts()
                .iter()
                .map(|&xi| vec![1.0; xi as usize + 1])
                .collect();
            product_pmf(&marginals)
                .into_iter()
                .map(|(y, _)| {
                    let is_half = y.counts().iter().zip(x.counts()).all(|(a, b)| 2 * a == *b);
                    let w = if is_half { 2.0 } else { 1.0 };
                    (y, w / slots)
                })
                .collect()
        }
        FragmentationKernel::EnzymeSubstrate {
            p,
            enzyme,
            substrate,
        } => {
            let e = x.get(*enzyme);
            let marginals: Vec<_> = x
                .counts()
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    if e == 1 && i == *enzyme {
                        let mut m = vec![0.0, 1.0];
                        m.truncate(xi as usize + 1);
                        m
                    } else if e == 1 && i == *substrate {
                        binomial_pmf(xi, *p)
                    } else {
                        binomial_pmf(xi, 0.5)
                    }
                })
                .collect();
            product_pmf(&marginals)
        }
        FragmentationKernel::Table { entries } => entries
            .get(x)
            .ok_or_else(|| Error::MissingKernelEntry(x.counts().to_vec()))?
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .cloned()
            .collect(),
    };
    let mut merged: BTreeMap<Complex, f64> = BTreeMap::new();
    for (y, p) in pmf {
        *merged.entry(y).or_insert(0.0) += p;
    }
    let total: f64 = merged.values().sum();
    Ok(merged.into_iter().map(|(y, p)| (y, p / total)).collect())
}

fn binomial_draw(rng: &mut SimRng, n: u64, p: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p)
        .expect("probability validated in (0, 1)")
        .sample(rng)
}

/// Draws a split `(y, x − y)`.
pub fn sample_fragmentation(
    kernel: &FragmentationKernel,
    x: &Complex,
    rng: &mut SimRng,
) -> Result<(Complex, Complex)> {
    let y = match kernel {
        FragmentationKernel::BinomialHalf => Complex(
            x.counts()
                .iter()
                .map(|&xi| binomial_draw(rng, xi, 0.5))
                .collect(),
        ),
        FragmentationKernel::UniformUnorderedPairs => {
            let labeled = x
                .counts()
                .iter()
                .try_fold(1u64, |acc, &xi| acc.checked_mul(xi + 1))
                .ok_or(Error::CountOverflow)?;
            let self_paired = x.counts().iter().all(|xi| xi % 2 == 0);
            let k = rng.random_range(0..labeled + u64::from(self_paired));
            if k == labeled {
                Complex(x.counts().iter().map(|xi| xi / 2).collect())
            } else {
                // Mixed-radix decode, last coordinate fastest.
                let mut rem = k;
                let mut v = vec![0; x.dim()];
                for (i, &xi) in x.counts().iter().enumerate().rev() {
                    v[i] = rem % (xi + 1);
                    rem /= xi + 1;
                }
                Complex(v)
            }
        }
        FragmentationKernel::EnzymeSubstrate {
            p,
            enzyme,
            substrate,
        } => {
            let e = x.get(*enzyme);
            Complex(
                x.counts()
                    .iter()
                    .enumerate()
                    .map(|(i, &xi)| {
                        if e == 1 && i == *enzyme {
                            1
                        } else if e == 1 && i == *substrate {
                            binomial_draw(rng, xi, *p)
                        } else {
                            binomial_draw(rng, xi, 0.5)
                        }
                    })
                    .collect(),
            )
        }
        FragmentationKernel::Table { .. } => {
            let pmf = kernel_pmf(kernel, x)?;
            let u: f64 = rng.random::<f64>();
            let mut acc = 0.0;
            let mut chosen = pmf.len() - 1;
            for (i, (_, p)) in pmf.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            pmf[chosen].0.clone()
        }
    };
    let rest = x
        .checked_sub(&y)
        .expect("sampled daughter is contained in the parent");
    Ok((y, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn c(v: &[u64]) -> Complex {
        Complex(v.to_vec())
    }

    fn as_pairs(pmf: &[(Complex, f64)]) -> Vec<(u64, f64)> {
        pmf.iter().map(|(y, p)| (y.get(0), *p)).collect()
    }

    #[test]
    fn binomial_half_small() {
        let pmf = kernel_pmf(&FragmentationKernel::BinomialHalf, &c(&[2])).unwrap();
        assert_eq!(as_pairs(&pmf), vec![(0, 0.25), (1, 0.5), (2, 0.25)]);
    }

    #[test]
    fn uniform_pairs_small() {
        let pmf = kernel_pmf(&FragmentationKernel::UniformUnorderedPairs, &c(&[3])).unwrap();
        assert_eq!(
            as_pairs(&pmf),
            vec![(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]
        );
        let pmf = kernel_pmf(&FragmentationKernel::UniformUnorderedPairs, &c(&[2])).unwrap();
        assert_eq!(as_pairs(&pmf), vec![(0, 0.25), (1, 0.5), (2, 0.25)]);
    }

    #[test]
    fn enzyme_kernel_single_enzyme_is_binomial() {
        let k = FragmentationKernel::enzyme_substrate(0.3, 0, 1).unwrap();
        let pmf = kernel_pmf(&k, &c(&[1, 2])).unwrap();
        let expected = [0.49, 0.42, 0.09];
        assert_eq!(pmf.len(), 3);
        for (t, (y, p)) in pmf.iter().enumerate() {
            assert_eq!(y, &c(&[1, t as u64]));
            assert!((p - expected[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_parent_splits_trivially() {
        let mut rng = rng_from_seed(3);
        for k in [
            FragmentationKernel::BinomialHalf,
            FragmentationKernel::UniformUnorderedPairs,
            FragmentationKernel::enzyme_substrate(0.4, 0, 1).unwrap(),
        ] {
            let x = Complex::zeros(2);
            let (a, b) = sample_fragmentation(&k, &x, &mut rng).unwrap();
            assert!(a.is_zero() && b.is_zero());
        }
    }

    #[test]
    fn table_kernel_requires_entry() {
        let mut entries = BTreeMap::new();
        entries.insert(c(&[2]), vec![(c(&[1]), 1.0)]);
        let k = FragmentationKernel::Table { entries };
        k.validate(1).unwrap();
        assert_eq!(kernel_pmf(&k, &c(&[2])).unwrap(), vec![(c(&[1]), 1.0)]);
        assert_eq!(
            kernel_pmf(&k, &c(&[3])).unwrap_err(),
            Error::MissingKernelEntry(vec![3])
        );
    }

    #[test]
    fn table_kernel_rejects_support_violation() {
        let mut entries = BTreeMap::new();
        entries.insert(c(&[2]), vec![(c(&[3]), 1.0)]);
        assert!(FragmentationKernel::Table { entries }.validate(1).is_err());
    }

    #[test]
    fn enzyme_kernel_validation() {
        assert!(FragmentationKernel::enzyme_substrate(0.0, 0, 1).is_err());
        assert!(FragmentationKernel::enzyme_substrate(1.0, 0, 1).is_err());
        assert!(FragmentationKernel::enzyme_substrate(0.5, 1, 1).is_err());
    }

    #[test]
    fn binomial_half_sampling_frequency() {
        let mut rng = rng_from_seed(99);
        let n = 100_000;
        let x = c(&[4]);
        let hits = (0..n)
            .filter(|_| {
                sample_fragmentation(&FragmentationKernel::BinomialHalf, &x, &mut rng)
                    .unwrap()
                    .0
                    .get(0)
                    == 2
            })
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 6.0 / 16.0).abs() < 0.01, "{freq}");
    }

    #[test]
    fn large_binomial_pmf_normalizes() {
        let pmf = binomial_pmf(5000, 0.3);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}
