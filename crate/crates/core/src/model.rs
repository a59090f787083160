//! The compartment population model and its generator.

use serde::{Deserialize, Serialize};

use crate::crn::{birth_death, mass_action_rate_unchecked, Complex, ReactionNetwork};
use crate::error::{Error, Result};
use crate::inflow::InflowDistribution;
use crate::kernel::{kernel_pmf, FragmentationKernel};
use crate::population::PopulationState;

/// Rate constants of the four compartment-level reactions
/// `0 → C`, `C → 0`, `C → 2C` (per designated molecule) and `2C → C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentRates {
    pub inflow: f64,
    pub exit: f64,
    pub fragmentation: f64,
    pub coagulation: f64,
}

impl CompartmentRates {
    pub fn new(inflow: f64, exit: f64, fragmentation: f64, coagulation: f64) -> Self {
        CompartmentRates {
            inflow,
            exit,
            fragmentation,
            coagulation,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_I", self.inflow),
            ("kappa_E", self.exit),
            ("kappa_F", self.fragmentation),
            ("kappa_C", self.coagulation),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} must be finite and >= 0"),
                });
            }
        }
        Ok(())
    }
}

/// Chemistry inside compartments plus compartment dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentModel {
    chemistry: ReactionNetwork,
    rates: CompartmentRates,
    fragmentation_species: usize,
    inflow: InflowDistribution,
    kernel: FragmentationKernel,
}

impl CompartmentModel {
    pub fn new(
        chemistry: ReactionNetwork,
        rates: CompartmentRates,
        fragmentation_species: usize,
        inflow: InflowDistribution,
        kernel: FragmentationKernel,
    ) -> Result<Self> {
        let d = chemistry.dim();
        rates.validate()?;
        if fragmentation_species >= d {
            return Err(Error::InvalidSpeciesIndex {
                index: fragmentation_species,
                species: d,
            });
        }
        if inflow.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: inflow.dim(),
            });
        }
        kernel.validate(d)?;
        Ok(CompartmentModel {
            chemistry,
            rates,
            fragmentation_species,
            inflow,
            kernel,
        })
    }

    pub fn chemistry(&self) -> &ReactionNetwork {
        &self.chemistry
    }

    pub fn rates(&self) -> CompartmentRates {
        self.rates
    }

    pub fn fragmentation_species(&self) -> usize {
        self.fragmentation_species
    }

    pub fn inflow(&self) -> &InflowDistribution {
        &self.inflow
    }

    pub fn kernel(&self) -> &FragmentationKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.chemistry.dim()
    }

    /// `(enzyme, substrate)` species when the model tracks an enzyme: either
    /// from the enzyme kernel, or two species named `E` and `S`.
    pub fn enzyme_layout(&self) -> Option<(usize, usize)> {
        self.kernel.enzyme_layout().or_else(|| {
            if self.dim() != 2 {
                return None;
            }
            let e = self.chemistry.species_index("E")?;
            let s = self.chemistry.species_index("S")?;
            Some((e, s))
        })
    }

    pub fn check_state(&self, n: &PopulationState) -> Result<()> {
        n.check_dim(self.dim())
    }

    /// Fragmentation propensity of a single compartment with content `x`.
    #[inline]
    pub fn fragmentation_rate(&self, x: &Complex) -> f64 {
        self.rates.fragmentation * x.get(self.fragmentation_species) as f64
    }
}

/// Kind and participants of a population-level event channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    Inflow,
    Internal { content: Complex, reaction: usize },
    Exit { content: Complex },
    Fragmentation { content: Complex },
    CoagulationSame { content: Complex },
    CoagulationPair { first: Complex, second: Complex },
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Inflow => "inflow",
            ChannelKind::Internal { .. } => "internal",
            ChannelKind::Exit { .. } => "exit",
            ChannelKind::Fragmentation { .. } => "fragmentation",
            ChannelKind::CoagulationSame { .. } | ChannelKind::CoagulationPair { .. } => {
                "coagulation"
            }
        }
    }
}

/// A channel with its current total rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub kind: ChannelKind,
    pub rate: f64,
}

/// All event channels with positive rate at `n`.
///
/// Order: inflow; then, per content in canonical order, internal reactions
/// (declaration order), exit and fragmentation; then coagulation, same-content
/// channels and unordered pairs in canonical order.
pub fn event_channels(model: &CompartmentModel, n: &PopulationState) -> Vec<Channel> {
    let mut out = Vec::new();
    let r = model.rates;
    if r.inflow > 0.0 {
        out.push(Channel {
            kind: ChannelKind::Inflow,
            rate: r.inflow,
        });
    }
    for (x, nx) in n.iter() {
        let nx_f = nx as f64;
        for &ri in model.chemistry.active_reactions() {
            let rate =
                nx_f * mass_action_rate_unchecked(&model.chemistry.reactions()[ri], x.counts());
            if rate > 0.0 {
                out.push(Channel {
                    kind: ChannelKind::Internal {
                        content: x.clone(),
                        reaction: ri,
                    },
                    rate,
                });
            }
        }
        if r.exit > 0.0 {
            out.push(Channel {
                kind: ChannelKind::Exit { content: x.clone() },
                rate: r.exit * nx_f,
            });
        }
        let frag = model.fragmentation_rate(x) * nx_f;
        if frag > 0.0 {
            out.push(Channel {
                kind: ChannelKind::Fragmentation { content: x.clone() },
                rate: frag,
            });
        }
    }
    if r.coagulation > 0.0 {
        let support: Vec<_> = n.iter().collect();
        for (i, (x, nx)) in support.iter().enumerate() {
            if *nx >= 2 {
                out.push(Channel {
                    kind: ChannelKind::CoagulationSame {
                        content: (*x).clone(),
                    },
                    rate: r.coagulation * (*nx as f64) * (*nx as f64 - 1.0) / 2.0,
                });
            }
            for (y, ny) in &support[i + 1..] {
                out.push(Channel {
                    kind: ChannelKind::CoagulationPair {
                        first: (*x).clone(),
                        second: (*y).clone(),
                    },
                    rate: r.coagulation * (*nx as f64) * (*ny as f64),
                });
            }
        }
    }
    out
}

/// Result of a generator evaluation: the value over the represented inflow
/// support and a bound on the error due to inflow truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorValue {
    pub value: f64,
    pub truncation_bound: f64,
}

fn with_edit<F>(n: &PopulationState, edit: F) -> Result<PopulationState>
where
    F: FnOnce(&mut PopulationState) -> Result<()>,
{
    let mut m = n.clone();
    edit(&mut m)?;
    Ok(m)
}

/// `LV(n)`, summing the internal-chemistry, inflow, exit, fragmentation and
/// coagulation terms exactly.
///
/// When the inflow law is truncated (non-zero tail mass) and inflow is
/// active, `increment_bound` must bound `|V(n + e_x) − V(n)|` over inflow
/// contents; the reported truncation bound is `2 κ_I · tail · bound`.
pub fn apply_population_generator<V>(
    model: &CompartmentModel,
    v: V,
    n: &PopulationState,
    increment_bound: Option<f64>,
) -> Result<GeneratorValue>
where
    V: Fn(&PopulationState) -> f64,
{
    model.check_state(n)?;
    let r = model.rates;
    let here = v(n);
    let mut total = 0.0;

    for (x, nx) in n.iter() {
        let nx_f = nx as f64;
        let mut term = 0.0;
        for &ri in model.chemistry.active_reactions() {
            let lam = mass_action_rate_unchecked(&model.chemistry.reactions()[ri], x.counts());
            if lam == 0.0 {
                continue;
            }
            let next_x = x
                .apply_delta(model.chemistry.delta(ri))?
                .expect("enabled reaction keeps counts non-negative");
            let m = with_edit(n, |m| {
                m.remove_one(x);
                m.add(next_x, 1)
            })?;
            term += lam * (v(&m) - here);
        }
        total += nx_f * term;

        if r.exit > 0.0 {
            let m = with_edit(n, |m| {
                m.remove_one(x);
                Ok(())
            })?;
            total += r.exit * nx_f * (v(&m) - here);
        }

        let frag = model.fragmentation_rate(x);
        if frag > 0.0 {
            let mut inner = 0.0;
            for (y, p) in kernel_pmf(&model.kernel, x)? {
                let rest = x.checked_sub(&y).expect("kernel respects support");
                let m = with_edit(n, |m| {
                    m.remove_one(x);
                    m.add(y, 1)?;
                    m.add(rest, 1)
                })?;
                inner += p * (v(&m) - here);
            }
            total += frag * nx_f * inner;
        }
    }

    if r.coagulation > 0.0 {
        let support: Vec<_> = n.iter().collect();
        for (i, (x, nx)) in support.iter().enumerate() {
            if *nx >= 2 {
                let merged = x.checked_add(x)?;
                let m = with_edit(n, |m| {
                    m.remove_one(x);
                    m.remove_one(x);
                    m.add(merged, 1)
                })?;
                let pairs = (*nx as f64) * (*nx as f64 - 1.0) / 2.0;
                total += r.coagulation * pairs * (v(&m) - here);
            }
            for (y, ny) in &support[i + 1..] {
                let merged = x.checked_add(y)?;
                let m = with_edit(n, |m| {
                    m.remove_one(x);
                    m.remove_one(y);
                    m.add(merged, 1)
                })?;
                total += r.coagulation * (*nx as f64) * (*ny as f64) * (v(&m) - here);
            }
        }
    }

    let mut truncation_bound = 0.0;
    if r.inflow > 0.0 {
        let mut inner = 0.0;
        for (x, p) in model.inflow.support() {
            let m = with_edit(n, |m| m.add(x.clone(), 1))?;
            inner += p * (v(&m) - here);
        }
        total += r.inflow * inner;
        let tail = model.inflow.tail_mass();
        if tail > 0.0 {
            let bound = increment_bound.ok_or(Error::MissingIncrementBound { tail_mass: tail })?;
            truncation_bound = 2.0 * r.inflow * tail * bound;
        }
    }

    Ok(GeneratorValue {
        value: total,
        truncation_bound,
    })
}

/// Parameters of the one-species model: chemistry `0 ⇄ S` inside
/// compartments, fragmentation proportional to `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model4Params {
    pub kappa_b: f64,
    pub kappa_d: f64,
    pub kappa_i: f64,
    pub kappa_e: f64,
    pub kappa_f: f64,
    pub kappa_c: f64,
    /// Mean content of an inflowing compartment.
    pub lambda: f64,
    /// Whether new compartments always arrive empty.
    pub inflow_is_delta_zero: bool,
}

impl Model4Params {
    /// All six rate constants equal to `k`, empty inflow.
    pub fn uniform(k: f64) -> Self {
        Model4Params {
            kappa_b: k,
            kappa_d: k,
            kappa_i: k,
            kappa_e: k,
            kappa_f: k,
            kappa_c: k,
            lambda: 0.0,
            inflow_is_delta_zero: true,
        }
    }

    /// Reads the parameters back from a model whose chemistry is `0 ⇄ S`.
    pub fn from_model(model: &CompartmentModel) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::NotModel4(format!("{} species", model.dim())));
        }
        let (mut kb, mut kd) = (0.0, 0.0);
        for r in model.chemistry().reactions() {
            match (r.source().get(0), r.product().get(0)) {
                (0, 1) => kb += r.rate_constant(),
                (1, 0) => kd += r.rate_constant(),
                (s, p) => {
                    return Err(Error::NotModel4(format!("reaction {s}S -> {p}S")));
                }
            }
        }
        let rates = model.rates();
        Ok(Model4Params {
            kappa_b: kb,
            kappa_d: kd,
            kappa_i: rates.inflow,
            kappa_e: rates.exit,
            kappa_f: rates.fragmentation,
            kappa_c: rates.coagulation,
            lambda: model.inflow().mean_mass(),
            inflow_is_delta_zero: model.inflow().is_delta_zero(),
        })
    }

    pub fn compartment_rates(&self) -> CompartmentRates {
        CompartmentRates::new(self.kappa_i, self.kappa_e, self.kappa_f, self.kappa_c)
    }

    /// Builds the model with the given inflow law and kernel. `lambda` and
    /// `inflow_is_delta_zero` are ignored in favour of the inflow law.
    pub fn build(
        &self,
        inflow: InflowDistribution,
        kernel: FragmentationKernel,
    ) -> Result<CompartmentModel> {
        CompartmentModel::new(
            birth_death(self.kappa_b, self.kappa_d)?,
            self.compartment_rates(),
            0,
            inflow,
            kernel,
        )
    }

    /// Model with empty inflow and the fair-coin kernel.
    pub fn build_default(&self) -> Result<CompartmentModel> {
        self.build(
            InflowDistribution::point_mass(Complex(vec![0])),
            FragmentationKernel::BinomialHalf,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ones() -> CompartmentModel {
        Model4Params::uniform(1.0).build_default().unwrap()
    }

    #[test]
    fn empty_state_has_only_inflow() {
        let model = Model4Params {
            kappa_i: 2.0,
            ..Model4Params::uniform(1.0)
        }
        .build_default()
        .unwrap();
        let ch = event_channels(&model, &PopulationState::new());
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].kind, ChannelKind::Inflow);
        assert_eq!(ch[0].rate, 2.0);
    }

    #[test]
    fn channel_rates_of_small_state() {
        let model = all_ones();
        let n = PopulationState::scalar(&[(2, 3)]);
        let ch = event_channels(&model, &n);
        let rates: Vec<(&str, f64)> = ch.iter().map(|c| (c.kind.label(), c.rate)).collect();
        assert_eq!(
            rates,
            vec![
                ("inflow", 1.0),
                ("internal", 3.0),
                ("internal", 6.0),
                ("exit", 3.0),
                ("fragmentation", 6.0),
                ("coagulation", 3.0),
            ]
        );
    }

    #[test]
    fn generator_annihilates_constants() {
        let model = all_ones();
        let n = PopulationState::scalar(&[(0, 1), (2, 3), (5, 1)]);
        let g = apply_population_generator(&model, |_| 7.5, &n, None).unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn fragmentation_needs_designated_species() {
        let model = all_ones();
        let n = PopulationState::scalar(&[(0, 4)]);
        assert!(event_channels(&model, &n)
            .iter()
            .all(|c| !matches!(c.kind, ChannelKind::Fragmentation { .. })));
    }

    #[test]
    fn truncated_inflow_requires_bound() {
        let model = Model4Params::uniform(1.0)
            .build(
                InflowDistribution::poisson_product(vec![3.0], 1e-12).unwrap(),
                FragmentationKernel::BinomialHalf,
            )
            .unwrap();
        let n = PopulationState::scalar(&[(1, 1)]);
        let v = |m: &PopulationState| m.total_compartments() as f64;
        assert!(matches!(
            apply_population_generator(&model, v, &n, None),
            Err(Error::MissingIncrementBound { .. })
        ));
        let g = apply_population_generator(&model, v, &n, Some(1.0)).unwrap();
        assert!(g.truncation_bound > 0.0 && g.truncation_bound < 1e-11);
    }

    #[test]
    fn model4_params_roundtrip() {
        let p = Model4Params {
            kappa_b: 0.5,
            kappa_d: 2.0,
            kappa_i: 3.0,
            kappa_e: 0.0,
            kappa_f: 1.5,
            kappa_c: 0.25,
            lambda: 0.0,
            inflow_is_delta_zero: true,
        };
        let back = Model4Params::from_model(&p.build_default().unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let chem = birth_death(1.0, 1.0).unwrap();
        let mu = InflowDistribution::point_mass(Complex(vec![0]));
        let bad_rates = CompartmentRates::new(-1.0, 0.0, 0.0, 0.0);
        assert!(CompartmentModel::new(
            chem.clone(),
            bad_rates,
            0,
            mu.clone(),
            FragmentationKernel::BinomialHalf
        )
        .is_err());
        let ok = CompartmentRates::new(1.0, 1.0, 1.0, 1.0);
        assert!(CompartmentModel::new(chem, ok, 1, mu, FragmentationKernel::BinomialHalf).is_err());
    }
}
