//! Drift of the one-enzyme substrate chain: up by one at rate
//! `α x(x−1) + 1`, and at rate `x` replaced by a Binomial(`x`, `p`) draw.

use rayon::prelude::*;
use serde::Serialize;

use super::function::CandidateFunction;
use crate::error::{Error, Result};

/// Binomial terms below this fraction of the mode term are dropped.
pub const BINOMIAL_CUTOFF: f64 = 1e-30;

fn check_chain(alpha: f64, p: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{alpha} must be positive"),
        });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("{p} must lie in (0, 1)"),
        });
    }
    Ok(())
}

/// `E[f(Y)] − f(x)` for `Y ~ Binomial(x, p)`, summed outward from the mode
/// with terms kept relative to the mode term.
fn binomial_expectation_gap<F: Fn(u64) -> f64>(f: &F, x: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let fx = f(x);
    let mode = (((x + 1) as f64 * p).floor() as u64).min(x);
    let mut weight = 1.0;
    let mut total = 1.0;
    let mut acc = f(mode) - fx;
    let (mut r, mut y) = (1.0, mode);
    while y < x {
        r *= (x - y) as f64 / (y + 1) as f64 * (p / q);
        y += 1;
        if r < BINOMIAL_CUTOFF {
            break;
        }
        total += r;
        acc += r * (f(y) - fx);
    }
    r = weight;
    y = mode;
    while y > 0 {
        r *= y as f64 / (x - y + 1) as f64 * (q / p);
        y -= 1;
        if r < BINOMIAL_CUTOFF {
            break;
        }
        total += r;
        acc += r * (f(y) - fx);
    }
    weight = total;
    acc / weight
}

/// `Af(x) = (αx(x−1) + 1)(f(x+1) − f(x)) + x Σ_y C(x,y) p^y (1−p)^{x−y} (f(y) − f(x))`.
pub fn one_enzyme_drift_with<F: Fn(u64) -> f64>(alpha: f64, p: f64, f: F, x: u64) -> f64 {
    let xf = x as f64;
    let up = (alpha * xf * (xf - 1.0) + 1.0) * (f(x + 1) - f(x));
    if x == 0 {
        return up;
    }
    up + xf * binomial_expectation_gap(&f, x, p)
}

/// [`one_enzyme_drift_with`] for a candidate function on the chain domain.
pub fn one_enzyme_drift(alpha: f64, p: f64, f: &CandidateFunction, x: u64) -> Result<f64> {
    check_chain(alpha, p)?;
    f.validate()?;
    f.eval_chain(0)?;
    Ok(one_enzyme_drift_with(
        alpha,
        p,
        |y| f.eval_chain(y).expect("domain checked"),
        x,
    ))
}

/// `αλ + p^λ − 1`; negative values admit `x^λ` as a recurrence witness.
pub fn lambda_criterion(alpha: f64, p: f64, lambda: f64) -> f64 {
    alpha * lambda + p.powf(lambda) - 1.0
}

/// Scans `λ = k/1000`, `k = 1..=999`, and returns the minimiser of
/// [`lambda_criterion`] when its value is negative.
pub fn choose_lambda(alpha: f64, p: f64) -> Option<f64> {
    if check_chain(alpha, p).is_err() {
        return None;
    }
    let (lambda, value) = (1..=999)
        .map(|k| {
            let l = k as f64 / 1000.0;
            (l, lambda_criterion(alpha, p, l))
        })
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        });
    (value < 0.0 && lambda_criterion(alpha, p, lambda) < 0.0).then_some(lambda)
}

/// Result of scanning `Af(x) ≤ −1` over `[0, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailScan {
    /// Smallest `X` with `Af(x) ≤ −1` for every `x` in `[X, x_max]`.
    pub x_star: Option<u64>,
    pub x_max: u64,
    /// Largest drift over `[x_star, x_max]`.
    pub max_drift_on_tail: Option<f64>,
    pub drift_at_x_max: f64,
}

/// Evaluates the chain drift on every `x ≤ x_max`.
pub fn scan_drift_tail(alpha: f64, p: f64, f: &CandidateFunction, x_max: u64) -> Result<TailScan> {
    check_chain(alpha, p)?;
    f.validate()?;
    f.eval_chain(0)?;
    let eval = |y: u64| f.eval_chain(y).expect("domain checked");
    let drifts: Vec<f64> = (0..=x_max)
        .into_par_iter()
        .map(|x| one_enzyme_drift_with(alpha, p, eval, x))
        .collect();
    let last_bad = drifts.iter().rposition(|&a| !(a <= -1.0));
    let x_star = match last_bad {
        None => Some(0),
        Some(i) if (i as u64) < x_max => Some(i as u64 + 1),
        Some(_) => None,
    };
    let max_drift_on_tail = x_star.map(|s| {
        drifts[s as usize..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(TailScan {
        x_star,
        x_max,
        max_drift_on_tail,
        drift_at_x_max: drifts[x_max as usize],
    })
}
