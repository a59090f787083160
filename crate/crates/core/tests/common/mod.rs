//! Reference implementations used as oracles. They work on explicit lists
//! of labeled compartments and share no code with the library beyond its
//! data types.

#![allow(dead_code)]

use fragsim::crn::Complex;
use fragsim::{CompartmentModel, FragmentationKernel, PopulationState};

/// `C(x, y)` as a product; zero when `y > x`.
pub fn binom(x: u64, y: u64) -> f64 {
    if y > x {
        return 0.0;
    }
    (0..y).fold(1.0, |acc, i| acc * (x - i) as f64 / (i + 1) as f64)
}

/// Mass-action rate `κ ∏ C(x_j, ν_j)`.
pub fn rate(kappa: f64, source: &[u64], x: &[u64]) -> f64 {
    source
        .iter()
        .zip(x)
        .fold(kappa, |acc, (&nu, &xj)| acc * binom(xj, nu))
}

/// Every vector `y ≤ x` componentwise.
pub fn below(x: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for &xi in x {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=xi).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out
}

fn minus(x: &[u64], y: &[u64]) -> Vec<u64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Labeled-daughter pmf of a kernel, written out from its definition.
pub fn kernel_oracle(kernel: &FragmentationKernel, x: &[u64]) -> Vec<(Vec<u64>, f64)> {
    let coin = |x: &[u64]| -> Vec<(Vec<u64>, f64)> {
        let m: u64 = x.iter().sum();
        below(x)
            .into_iter()
            .map(|y| {
                let w = y
                    .iter()
                    .zip(x)
                    .map(|(&yi, &xi)| binom(xi, yi))
                    .product::<f64>()
                    / 2f64.powi(m as i32);
                (y, w)
            })
            .collect()
    };
    match kernel {
        FragmentationKernel::BinomialHalf => coin(x),
        FragmentationKernel::UniformUnorderedPairs => {
            let ys = below(x);
            // Unordered pairs {y, x − y}: count each once.
            let pairs = ys.iter().filter(|y| **y <= minus(x, y)).count() as f64;
            ys.into_iter()
                .map(|y| {
                    let w = if y == minus(x, &y) { 1.0 } else { 0.5 };
                    (y, w / pairs)
                })
                .collect()
        }
        FragmentationKernel::EnzymeSubstrate {
            p,
            enzyme,
            substrate,
        } => {
            if x[*enzyme] != 1 {
                return coin(x);
            }
            below(x)
                .into_iter()
                .map(|y| {
                    if y[*enzyme] != 1 {
                        return (y, 0.0);
                    }
                    let mut w = 1.0;
                    for i in 0..x.len() {
                        if i == *enzyme {
                            continue;
                        }
                        w *= if i == *substrate {
                            binom(x[i], y[i])
                                * p.powi(y[i] as i32)
                                * (1.0 - p).powi((x[i] - y[i]) as i32)
                        } else {
                            binom(x[i], y[i]) / 2f64.powi(x[i] as i32)
                        };
                    }
                    (y, w)
                })
                .collect()
        }
        FragmentationKernel::Table { entries } => entries
            .get(&Complex(x.to_vec()))
            .map(|v| v.iter().map(|(y, w)| (y.0.clone(), *w)).collect())
            .unwrap_or_default(),
    }
}

/// A population as a list of labeled compartments.
pub fn labeled(n: &PopulationState) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for (x, k) in n.iter() {
        for _ in 0..k {
            out.push(x.0.clone());
        }
    }
    out
}

pub fn unlabeled(list: &[Vec<u64>]) -> PopulationState {
    let mut n = PopulationState::new();
    for x in list {
        n.add(Complex(x.clone()), 1).unwrap();
    }
    n
}

/// `LV(n)` by enumerating every transition of every labeled compartment and
/// every labeled pair.
pub fn generator_oracle<V: Fn(&PopulationState) -> f64>(
    model: &CompartmentModel,
    v: V,
    n: &PopulationState,
) -> f64 {
    let comps = labeled(n);
    let here = v(n);
    let r = model.rates();
    let mut total = 0.0;
    let without = |i: usize| -> Vec<Vec<u64>> {
        comps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, c)| c.clone())
            .collect()
    };
    for (x, mu) in model.inflow().support() {
        let mut next = comps.clone();
        next.push(x.0.clone());
        total += r.inflow * mu * (v(&unlabeled(&next)) - here);
    }
    for (i, x) in comps.iter().enumerate() {
        for reaction in model.chemistry().reactions() {
            let lam = rate(reaction.rate_constant(), reaction.source().counts(), x);
            if lam == 0.0 {
                continue;
            }
            let mut next = comps.clone();
            next[i] = x
                .iter()
                .zip(
                    reaction
                        .source()
                        .counts()
                        .iter()
                        .zip(reaction.product().counts()),
                )
                .map(|(&xi, (&s, &p))| xi - s + p)
                .collect();
            total += lam * (v(&unlabeled(&next)) - here);
        }
        total += r.exit * (v(&unlabeled(&without(i))) - here);
        let frag = r.fragmentation * x[model.fragmentation_species()] as f64;
        if frag > 0.0 {
            for (y, w) in kernel_oracle(model.kernel(), x) {
                if w == 0.0 {
                    continue;
                }
                let mut next = without(i);
                next.push(minus(x, &y));
                next.push(y);
                total += frag * w * (v(&unlabeled(&next)) - here);
            }
        }
    }
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            let mut next: Vec<Vec<u64>> = comps
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i && k != j)
                .map(|(_, c)| c.clone())
                .collect();
            next.push(comps[i].iter().zip(&comps[j]).map(|(a, b)| a + b).collect());
            total += r.coagulation * (v(&unlabeled(&next)) - here);
        }
    }
    total
}

/// A nonlinear test function of a population.
pub fn wiggle(n: &PopulationState) -> f64 {
    let mut acc = 0.0;
    for (x, k) in n.iter() {
        let code: f64 = x
            .counts()
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as f64 + 1.3) * c as f64)
            .sum();
        acc += (k as f64).powf(1.5) * (1.0 + code).sqrt();
    }
    acc + (n.total_compartments() as f64 * 0.7).sin()
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_p(observed: &[u64], expected_prob: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected_prob)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Random one-species parameter sets: `pr` positive-recurrent ones spread
/// over the three conditions, then `transient` transient ones.
pub fn regime_params(seed: u64, pr: usize, transient: usize) -> Vec<fragsim::Model4Params> {
    use fragsim::lyapunov::{classify_regime, PrCondition, Regime};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut by_condition: [Vec<fragsim::Model4Params>; 3] = Default::default();
    let mut trans = Vec::new();
    let per = pr.div_ceil(3);
    while by_condition.iter().map(Vec::len).sum::<usize>() < pr || trans.len() < transient {
        let mut draw = |zero: f64| -> f64 {
            if rng.random::<f64>() < zero {
                0.0
            } else {
                rng.random_range(0.05..3.0)
            }
        };
        let p = fragsim::Model4Params {
            kappa_b: draw(0.1),
            kappa_d: draw(0.2),
            kappa_i: draw(0.1),
            kappa_e: draw(0.3),
            kappa_f: draw(0.1),
            kappa_c: draw(0.4),
            ..fragsim::Model4Params::uniform(1.0)
        };
        match classify_regime(&p).unwrap().regime {
            Regime::PositiveRecurrent { condition } => {
                let i = match condition {
                    PrCondition::A => 0,
                    PrCondition::B => 1,
                    PrCondition::C => 2,
                };
                let have = by_condition.iter().map(Vec::len).sum::<usize>();
                if by_condition[i].len() < per && have < pr {
                    by_condition[i].push(p);
                }
            }
            Regime::Transient if trans.len() < transient => trans.push(p),
            _ => {}
        }
    }
    by_condition.into_iter().flatten().chain(trans).collect()
}

pub const FIRST_EVENT_KINDS: [fragsim::sim::EventKind; 5] = [
    fragsim::sim::EventKind::Inflow,
    fragsim::sim::EventKind::Internal,
    fragsim::sim::EventKind::Exit,
    fragsim::sim::EventKind::Fragmentation,
    fragsim::sim::EventKind::Coagulation,
];

/// Per-kind rates, in [`FIRST_EVENT_KINDS`] order, for the all-ones
/// one-species model at `{2: 3}`.
pub fn first_event_rates() -> [f64; 5] {
    let (x, n) = (2u64, 3u64);
    let per = |source: u64| rate(1.0, &[source], &[x]);
    let internal = n as f64 * (per(0) + per(1));
    [1.0, internal, n as f64, n as f64 * x as f64, binom(n, 2)]
}

/// Kind counts and mean time of the first event from `{2: 3}` over `draws`
/// seeds.
pub fn first_event_sample(draws: u64) -> (Vec<u64>, f64) {
    use fragsim::sim::run_trajectory_with;
    use fragsim::{Model4Params, RunOptions, StopCondition};
    let model = Model4Params::uniform(1.0).build_default().unwrap();
    let start = PopulationState::scalar(&[(2, 3)]);
    let options = RunOptions {
        record_events: true,
        ..Default::default()
    };
    let mut counts = vec![0u64; FIRST_EVENT_KINDS.len()];
    let mut time = 0.0;
    for seed in 0..draws {
        let r =
            run_trajectory_with(&model, &start, &StopCondition::budget(1), seed, &options).unwrap();
        let e = &r.events[0];
        counts[FIRST_EVENT_KINDS.iter().position(|k| *k == e.kind).unwrap()] += 1;
        time += e.time;
    }
    (counts, time / draws as f64)
}
