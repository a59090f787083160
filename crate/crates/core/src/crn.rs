//! Plain stochastic reaction networks under mass-action kinetics.
//!
//! A reaction `ν → ν'` fires from state `x` at rate
//! `κ · ∏_j C(x_j, ν_j)`, with `C(x, 0) = 1` and `C(x, y) = 0` for `x < y`.
//! Note that the binomial (not falling-factorial) convention is used: a
//! source `2S` fires at `κ·x(x-1)/2`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::sim::{StopCondition, StopReason};

/// Multiplicities of each species. Used both for complexes (reaction sources
/// and products) and for compartment contents / network states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Complex(pub Vec<u64>);

/// State of a plain network: one count per species.
pub type CrnState = Complex;

impl Complex {
    pub fn new(counts: Vec<u64>) -> Self {
        Complex(counts)
    }

    pub fn zeros(dim: usize) -> Self {
        Complex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, species: usize) -> u64 {
        self.0[species]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Total molecule count.
    pub fn mass(&self) -> u64 {
        self.0.iter().sum()
    }

    /// `true` when every coordinate is at most the matching one in `other`.
    pub fn le_componentwise(&self, other: &Complex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_add(&self, other: &Complex) -> Result<Complex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_add(*b).ok_or(Error::CountOverflow))
            .collect::<Result<Vec<_>>>()
            .map(Complex)
    }

    /// `self - other`; `None` if some coordinate would go negative.
    pub fn checked_sub(&self, other: &Complex) -> Option<Complex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Complex)
    }

    /// Applies an integer displacement. Errors on overflow; `Ok(None)` when
    /// a coordinate would become negative.
    pub fn apply_delta(&self, delta: &[i64]) -> Result<Option<Complex>> {
        let mut out = Vec::with_capacity(self.0.len());
        for (&c, &d) in self.0.iter().zip(delta) {
            if d >= 0 {
                out.push(c.checked_add(d as u64).ok_or(Error::CountOverflow)?);
            } else {
                match c.checked_sub(d.unsigned_abs()) {
                    Some(v) => out.push(v),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(Complex(out)))
    }
}

impl From<Vec<u64>> for Complex {
    fn from(v: Vec<u64>) -> Self {
        Complex(v)
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Binomial coefficient `C(x, y)` as used by mass-action rates.
///
/// Computed exactly in `u128` by the multiplicative recurrence while it fits;
/// once an intermediate product would overflow `u128` the remaining factors
/// are accumulated in `f64`. Values above 2^53 lose integer exactness in the
/// returned `f64` either way.
pub fn falling_binomial(x: u64, y: u64) -> f64 {
    if y > x {
        return 0.0;
    }
    let k = y.min(x - y);
    let mut exact: u128 = 1;
    let mut i = 0u64;
    while i < k {
        let num = (x - i) as u128;
        match exact.checked_mul(num) {
            // Division is exact: after step i the value is C(x, i+1) * (i+1)
            // divided by (i+1).
            Some(v) => exact = v / (i as u128 + 1),
            None => break,
        }
        i += 1;
    }
    let mut value = exact as f64;
    while i < k {
        value *= (x - i) as f64 / (i + 1) as f64;
        i += 1;
    }
    value
}

/// Exact binomial coefficient, `None` on `u128` overflow.
pub fn binomial_exact(x: u64, y: u64) -> Option<u128> {
    if y > x {
        return Some(0);
    }
    let k = y.min(x - y);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((x - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// A single reaction `source → product` with a mass-action rate constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    source: Complex,
    product: Complex,
    rate_constant: f64,
}

impl Reaction {
    pub fn new(source: Complex, product: Complex, rate_constant: f64) -> Result<Self> {
        if source.dim() != product.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                got: product.dim(),
            });
        }
        if !(rate_constant >= 0.0) || !rate_constant.is_finite() {
            return Err(Error::InvalidReaction {
                index: 0,
                reason: format!("rate constant {rate_constant} must be finite and >= 0"),
            });
        }
        if source == product {
            return Err(Error::InvalidReaction {
                index: 0,
                reason: "source and product complexes are identical".into(),
            });
        }
        Ok(Reaction {
            source,
            product,
            rate_constant,
        })
    }

    pub fn source(&self) -> &Complex {
        &self.source
    }

    pub fn product(&self) -> &Complex {
        &self.product
    }

    pub fn rate_constant(&self) -> f64 {
        self.rate_constant
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// Net change `ν' − ν`.
    pub fn delta(&self) -> Vec<i64> {
        self.source
            .0
            .iter()
            .zip(&self.product.0)
            .map(|(&s, &p)| p as i64 - s as i64)
            .collect()
    }
}

/// Propensity of `reaction` in `state`.
pub fn mass_action_rate(reaction: &Reaction, state: &CrnState) -> Result<f64> {
    if reaction.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: reaction.dim(),
            got: state.dim(),
        });
    }
    Ok(mass_action_rate_unchecked(reaction, state.counts()))
}

#[inline]
pub(crate) fn mass_action_rate_unchecked(reaction: &Reaction, counts: &[u64]) -> f64 {
    if reaction.rate_constant == 0.0 {
        return 0.0;
    }
    let mut rate = reaction.rate_constant;
    for (&x, &nu) in counts.iter().zip(&reaction.source.0) {
        match nu {
            0 => {}
            1 => rate *= x as f64,
            _ => {
                if x < nu {
                    return 0.0;
                }
                rate *= falling_binomial(x, nu);
            }
        }
    }
    rate
}

/// Species names plus reactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    #[serde(skip)]
    deltas: Vec<Vec<i64>>,
    /// Reactions with a non-zero rate constant, in declaration order.
    #[serde(skip)]
    active: Vec<usize>,
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self> {
        for (i, name) in species.iter().enumerate() {
            if species[..i].contains(name) {
                return Err(Error::DuplicateSpecies(name.clone()));
            }
        }
        let d = species.len();
        for (index, r) in reactions.iter().enumerate() {
            if r.dim() != d {
                return Err(Error::InvalidReaction {
                    index,
                    reason: format!("complex has {} entries, network has {d} species", r.dim()),
                });
            }
        }
        let deltas = reactions.iter().map(Reaction::delta).collect();
        let active = reactions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rate_constant > 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(ReactionNetwork {
            species,
            reactions,
            deltas,
            active,
        })
    }

    /// Network with species but no reactions.
    pub fn empty(species: Vec<String>) -> Result<Self> {
        Self::new(species, Vec::new())
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn delta(&self, reaction: usize) -> &[i64] {
        &self.deltas[reaction]
    }

    /// Indices of reactions with a positive rate constant.
    pub fn active_reactions(&self) -> &[usize] {
        &self.active
    }

    pub fn check_state(&self, state: &CrnState) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }
}

/// An enabled jump out of a network state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub reaction: usize,
    pub delta: Vec<i64>,
    pub rate: f64,
}

/// Every reaction with a strictly positive rate at `state`, in declaration
/// order.
pub fn enabled_transitions(network: &ReactionNetwork, state: &CrnState) -> Result<Vec<Transition>> {
    network.check_state(state)?;
    Ok(network
        .active_reactions()
        .iter()
        .filter_map(|&r| {
            let rate = mass_action_rate_unchecked(&network.reactions[r], state.counts());
            (rate > 0.0).then(|| Transition {
                reaction: r,
                delta: network.deltas[r].clone(),
                rate,
            })
        })
        .collect())
}

/// `Af(x) = Σ λ_r(x) (f(x + Δ_r) − f(x))` by direct enumeration.
pub fn apply_crn_generator<F>(network: &ReactionNetwork, f: F, state: &CrnState) -> Result<f64>
where
    F: Fn(&CrnState) -> f64,
{
    let here = f(state);
    let mut acc = 0.0;
    for t in enabled_transitions(network, state)? {
        let next = state
            .apply_delta(&t.delta)?
            .expect("positive mass-action rate implies a non-negative successor");
        acc += t.rate * (f(&next) - here);
    }
    Ok(acc)
}

/// One fired reaction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrnEvent {
    pub time: f64,
    pub reaction: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrnSimulationReport {
    pub final_state: CrnState,
    pub final_time: f64,
    pub event_count: u64,
    pub stop_reason: StopReason,
    pub absorbed: bool,
    pub events: Vec<CrnEvent>,
    pub seed: u64,
}

/// Direct-method simulation of a plain network.
///
/// Holding times are exponential at the total rate; the firing reaction is
/// found by scanning active reactions in declaration order against one
/// uniform draw scaled by the total rate.
pub fn simulate_crn(
    network: &ReactionNetwork,
    initial: &CrnState,
    stop: &StopCondition,
    seed: u64,
) -> Result<CrnSimulationReport> {
    network.check_state(initial)?;
    stop.validate()?;
    let mut rng: SimRng = rng::rng_from_seed(seed);
    let mut state = initial.clone();
    let mut time = 0.0;
    let mut events = Vec::new();
    let mut rates = vec![0.0; network.active_reactions().len()];
    let t_max = stop.t_max.unwrap_or(f64::INFINITY);
    let budget = stop.event_budget.unwrap_or(u64::MAX);

    let (stop_reason, absorbed) = loop {
        if let Some(bound) = &stop.observable_bound {
            if bound.reached_crn(&state)? {
                break (StopReason::BoundHit, false);
            }
        }
        if events.len() as u64 >= budget {
            break (StopReason::Budget, false);
        }
        let mut total = 0.0;
        for (slot, &r) in rates.iter_mut().zip(network.active_reactions()) {
            *slot = mass_action_rate_unchecked(&network.reactions[r], state.counts());
            total += *slot;
        }
        if total <= 0.0 {
            break (StopReason::Absorbed, true);
        }
        let dt = rng::exponential(&mut rng, total);
        if time + dt > t_max {
            time = t_max;
            break (StopReason::Time, false);
        }
        time += dt;
        let target = rng::uniform(&mut rng) * total;
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_positive = 0;
        for (k, &rate) in rates.iter().enumerate() {
            if rate > 0.0 {
                last_positive = k;
                acc += rate;
                if target < acc {
                    chosen = Some(k);
                    break;
                }
            }
        }
        // Rounding can leave `target` at or just above the accumulated sum.
        let k = chosen.unwrap_or(last_positive);
        let r = network.active_reactions()[k];
        state = match state.apply_delta(network.delta(r)) {
            Ok(Some(s)) => s,
            Ok(None) => unreachable!("enabled reaction produced a negative count"),
            Err(e) => return Err(e),
        };
        events.push(CrnEvent { time, reaction: r });
    };

    Ok(CrnSimulationReport {
        final_state: state,
        final_time: time,
        event_count: events.len() as u64,
        stop_reason,
        absorbed,
        events,
        seed,
    })
}

/// Convenience constructor used by presets and tests: reactions given as
/// `(source, product, rate)` count vectors.
pub fn network_from_vectors(
    species: &[&str],
    reactions: &[(&[u64], &[u64], f64)],
) -> Result<ReactionNetwork> {
    let rs = reactions
        .iter()
        .enumerate()
        .map(|(index, (s, p, k))| {
            Reaction::new(Complex(s.to_vec()), Complex(p.to_vec()), *k).map_err(|e| match e {
                Error::InvalidReaction { reason, .. } => Error::InvalidReaction { index, reason },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ReactionNetwork::new(species.iter().map(|s| s.to_string()).collect(), rs)
}

/// `0 ⇄ S` with birth `kappa_b` and death `kappa_d`.
pub fn birth_death(kappa_b: f64, kappa_d: f64) -> Result<ReactionNetwork> {
    network_from_vectors(&["S"], &[(&[0], &[1], kappa_b), (&[1], &[0], kappa_d)])
}

/// `E → 2E`, `E + S → E + 2S`, both at rate 1 (species order `E, S`).
pub fn enzyme_autocatalysis() -> Result<ReactionNetwork> {
    network_from_vectors(
        &["E", "S"],
        &[(&[1, 0], &[2, 0], 1.0), (&[1, 1], &[1, 2], 1.0)],
    )
}

/// `0 → S` at rate 1 and `E + 2S → E + 3S` at rate `2α` (species `E, S`).
pub fn explosive_enzyme(alpha: f64) -> Result<ReactionNetwork> {
    network_from_vectors(
        &["E", "S"],
        &[(&[0, 0], &[0, 1], 1.0), (&[1, 2], &[1, 3], 2.0 * alpha)],
    )
}

/// The aggregate projection network on `X, E, S`:
/// `2X → X`, `X → X + E`, `E + S → E + 2S`, `S → S + X`, all at rate 1.
pub fn projection_network() -> Result<ReactionNetwork> {
    network_from_vectors(
        &["X", "E", "S"],
        &[
            (&[2, 0, 0], &[1, 0, 0], 1.0),
            (&[1, 0, 0], &[1, 1, 0], 1.0),
            (&[0, 1, 1], &[0, 1, 2], 1.0),
            (&[0, 0, 1], &[1, 0, 1], 1.0),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::StopCondition;

    fn c(v: &[u64]) -> Complex {
        Complex(v.to_vec())
    }

    #[test]
    fn binomial_conventions() {
        assert_eq!(falling_binomial(3, 2), 3.0);
        assert_eq!(falling_binomial(5, 0), 1.0);
        assert_eq!(falling_binomial(1, 2), 0.0);
        assert_eq!(falling_binomial(0, 0), 1.0);
        assert_eq!(binomial_exact(10, 3), Some(120));
    }

    #[test]
    fn binomial_switches_to_float_on_overflow() {
        // C(200, 100) ~ 9.05e58 overflows u128 partway through.
        assert!(binomial_exact(200, 100).is_none());
        let v = falling_binomial(200, 100);
        let expected = 9.054_851_465_610_328e58;
        assert!(((v - expected) / expected).abs() < 1e-12, "{v}");
    }

    #[test]
    fn example_rates() {
        let alpha = 1.0;
        let net = explosive_enzyme(alpha).unwrap();
        let second = &net.reactions()[1];
        assert_eq!(mass_action_rate(second, &c(&[1, 3])).unwrap(), 6.0);
        assert_eq!(mass_action_rate(second, &c(&[1, 1])).unwrap(), 0.0);
        let birth = birth_death(2.0, 1.0).unwrap();
        assert_eq!(
            mass_action_rate(&birth.reactions()[0], &c(&[17])).unwrap(),
            2.0
        );
        assert!(matches!(
            mass_action_rate(second, &c(&[1])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transitions_of_small_networks() {
        let net = network_from_vectors(
            &["E", "S"],
            &[(&[0, 0], &[1, 0], 1.0), (&[1, 2], &[1, 3], 2.0)],
        )
        .unwrap();
        let t = enabled_transitions(&net, &c(&[0, 0])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].delta, vec![1, 0]);
        assert_eq!(t[0].rate, 1.0);

        let bd = birth_death(1.0, 1.0).unwrap();
        let t = enabled_transitions(&bd, &c(&[0])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].delta.clone(), t[0].rate), (vec![1], 1.0));

        let bd = birth_death(2.0, 3.0).unwrap();
        let t = enabled_transitions(&bd, &c(&[4])).unwrap();
        let pairs: Vec<_> = t.iter().map(|t| (t.delta[0], t.rate)).collect();
        assert_eq!(pairs, vec![(1, 2.0), (-1, 12.0)]);
    }

    #[test]
    fn generator_examples() {
        let bd = birth_death(2.0, 1.0).unwrap();
        let v = apply_crn_generator(&bd, |x| x.get(0) as f64, &c(&[3])).unwrap();
        assert_eq!(v, -1.0);
        let v = apply_crn_generator(&bd, |_| 4.2, &c(&[3])).unwrap();
        assert_eq!(v, 0.0);

        let net = enzyme_autocatalysis().unwrap();
        let g = |x: &Complex| x.get(0) as f64 + (x.get(1) as f64 + 1.0).ln();
        let v = apply_crn_generator(&net, g, &c(&[2, 3])).unwrap();
        let expected = 2.0 + 6.0 * (5.0f64 / 4.0).ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 3.3388).abs() < 1e-4);
    }

    #[test]
    fn zero_rate_reactions_are_kept_but_inactive() {
        let net = birth_death(1.0, 0.0).unwrap();
        assert_eq!(net.reactions().len(), 2);
        assert_eq!(net.active_reactions(), &[0]);
    }

    #[test]
    fn rejects_bad_reactions() {
        assert!(Reaction::new(c(&[1]), c(&[1]), 1.0).is_err());
        assert!(Reaction::new(c(&[1]), c(&[0]), -1.0).is_err());
        assert!(Reaction::new(c(&[1]), c(&[0]), f64::NAN).is_err());
        assert!(ReactionNetwork::new(vec!["A".into(), "A".into()], vec![]).is_err());
        assert!(network_from_vectors(&["A"], &[(&[1, 0], &[0, 0], 1.0)]).is_err());
    }

    #[test]
    fn all_zero_constants_absorb_immediately() {
        let net = birth_death(0.0, 0.0).unwrap();
        let r = simulate_crn(&net, &c(&[3]), &StopCondition::time(10.0), 1).unwrap();
        assert!(r.absorbed);
        assert_eq!(r.event_count, 0);
        assert_eq!(r.stop_reason, StopReason::Absorbed);
    }

    #[test]
    fn overflow_is_reported() {
        let net = birth_death(1.0, 0.0).unwrap();
        let err = simulate_crn(&net, &c(&[u64::MAX]), &StopCondition::time(10.0), 1);
        assert_eq!(err.unwrap_err(), Error::CountOverflow);
    }
}
