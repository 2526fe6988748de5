//! Jaccard-distance loss over a whole batch:
//! `1 - (Σtp + s) / (Σt² + Σp² - Σtp + s)`.
//!
//! Background pixels where both target and prediction are zero add nothing
//! to any of the sums, so the loss needs no class re-weighting.

use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Default smoothing term added to numerator and denominator.
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
struct Sums {
    tp: f64,
    tt: f64,
    pp: f64,
}

fn sums<S: Scalar>(target: &[S], pred: &[S]) -> Result<Sums> {
    if target.len() != pred.len() {
        return Err(Error::shape(
            "jaccard_loss",
            format!("target has {} elements, prediction {}", target.len(), pred.len()),
        ));
    }
    let mut s = Sums {
        tp: 0.0,
        tt: 0.0,
        pp: 0.0,
    };
    for (&t, &p) in target.iter().zip(pred) {
        let (t, p) = (t.as_f64(), p.as_f64());
        s.tp += t * p;
        s.tt += t * t;
        s.pp += p * p;
    }
    Ok(s)
}

fn quotient(s: Sums, smoothing: f64) -> Result<(f64, f64)> {
    let num = s.tp + smoothing;
    let den = s.tt + s.pp - s.tp + smoothing;
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "jaccard loss undefined for empty target and prediction without smoothing".into(),
        ));
    }
    Ok((num, den))
}

pub fn jaccard_loss<S: Scalar>(target: &[S], pred: &[S], smoothing: S) -> Result<S> {
    let (num, den) = quotient(sums(target, pred)?, smoothing.as_f64())?;
    Ok(S::lit(1.0 - num / den))
}

/// Analytic `∂L/∂p` for every prediction element.
pub fn jaccard_loss_grad<S: Scalar>(target: &[S], pred: &[S], smoothing: S) -> Result<Vec<S>> {
    let (num, den) = quotient(sums(target, pred)?, smoothing.as_f64())?;
    let den2 = den * den;
    Ok(target
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            let (t, p) = (t.as_f64(), p.as_f64());
            S::lit(-(t * den - num * (2.0 * p - t)) / den2)
        })
        .collect())
}
