//! Ordered cut points from stick-breaking proportions.
//!
//! A vector of `J - 1` proportions `omega` in `(0, 1)` breaks a unit stick
//! into `J` pieces `delta`; cut points are the logits of the cumulative
//! piece lengths. With `omega_j ~ Beta(1, J - j)` the pieces are
//! `Dirichlet(1, ..., 1)`, so every category has the same prior probability.

use crate::error::{Error, Result};

/// Guard on stick proportions; values outside `(OMEGA_EPS, 1 - OMEGA_EPS)` are
/// treated as out of support by the sampler.
pub const OMEGA_EPS: f64 = 1e-9;

/// Cumulative sums this close to 1 before the last category overflow the logit.
const CUMULATIVE_EPS: f64 = 1e-15;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sticks_to_delta(omega: &[f64]) -> Result<Vec<f64>> {
    let mut delta = Vec::with_capacity(omega.len() + 1);
    let mut remaining = 1.0;
    let mut used = 0.0;
    for (j, &w) in omega.iter().enumerate() {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::domain(format!(
                "stick proportion omega[{}] = {w} outside (0, 1)",
                j + 1
            )));
        }
        let piece = remaining * w;
        delta.push(piece);
        used += piece;
        remaining *= 1.0 - w;
    }
    // Last piece as the remainder keeps the sum at exactly 1.
    delta.push(1.0 - used);
    Ok(delta)
}

/// Inverse of [`sticks_to_delta`].
pub fn delta_to_sticks(delta: &[f64]) -> Result<Vec<f64>> {
    check_simplex(delta)?;
    let mut remaining = 1.0;
    let mut omega = Vec::with_capacity(delta.len() - 1);
    for &d in &delta[..delta.len() - 1] {
        omega.push((d / remaining).min(1.0));
        remaining -= d;
    }
    Ok(omega)
}

pub fn delta_to_kappa(delta: &[f64]) -> Result<Vec<f64>> {
    check_simplex(delta)?;
    let mut cumulative = 0.0;
    let mut kappa = Vec::with_capacity(delta.len() - 1);
    for (j, &d) in delta[..delta.len() - 1].iter().enumerate() {
        cumulative += d;
        if cumulative >= 1.0 - CUMULATIVE_EPS {
            return Err(Error::domain(format!(
                "cumulative probability reaches 1 at cut point {}",
                j + 1
            )));
        }
        kappa.push(logit(cumulative));
    }
    Ok(kappa)
}

pub fn kappa_to_delta(kappa: &[f64]) -> Result<Vec<f64>> {
    check_increasing(kappa)?;
    let mut delta = Vec::with_capacity(kappa.len() + 1);
    let mut previous = 0.0;
    for &k in kappa {
        let gamma = logistic(k);
        delta.push(gamma - previous);
        previous = gamma;
    }
    delta.push(1.0 - previous);
    Ok(delta)
}

pub fn sticks_to_kappa(omega: &[f64]) -> Result<Vec<f64>> {
    delta_to_kappa(&sticks_to_delta(omega)?)
}

/// Log-density of independent `Beta(1, J - j)` priors on the stick proportions.
///
/// Returns `-inf` (never NaN) at or beyond the boundary of the unit interval.
pub fn log_prior_omega(omega: &[f64]) -> f64 {
    let categories = omega.len() + 1;
    let mut total = 0.0;
    for (idx, &w) in omega.iter().enumerate() {
        if !(w > 0.0 && w < 1.0) {
            return f64::NEG_INFINITY;
        }
        let b = (categories - idx - 1) as f64;
        total += b.ln() + (b - 1.0) * (-w).ln_1p();
    }
    total
}

/// Stick proportions at their prior means `1 / (J - j + 1)`, giving uniform pieces.
pub fn prior_mean_sticks(categories: usize) -> Vec<f64> {
    (1..categories)
        .map(|j| 1.0 / (categories - j + 1) as f64)
        .collect()
}

pub(crate) fn check_increasing(kappa: &[f64]) -> Result<()> {
    if kappa.iter().any(|k| !k.is_finite()) {
        return Err(Error::domain("cut points must be finite"));
    }
    if kappa.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!(
            "cut points must be strictly increasing: {kappa:?}"
        )));
    }
    Ok(())
}

fn check_simplex(delta: &[f64]) -> Result<()> {
    if delta.len() < 2 {
        return Err(Error::domain("need at least two categories"));
    }
    if delta.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::domain(format!("simplex entries must lie in (0, 1): {delta:?}")));
    }
    let sum: f64 = delta.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("simplex entries sum to {sum}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn symmetric_break() {
        let delta = sticks_to_delta(&[0.2, 0.25, 1.0 / 3.0, 0.5]).unwrap();
        assert!(close(&delta, &[0.2; 5], 1e-15));
    }

    #[test]
    fn two_categories() {
        assert!(close(&sticks_to_delta(&[0.7]).unwrap(), &[0.7, 0.3], 1e-15));
    }

    #[test]
    fn halving_sticks() {
        let delta = sticks_to_delta(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(delta, vec![0.5, 0.25, 0.125, 0.125]);
    }

    #[test]
    fn omega_out_of_range() {
        assert!(matches!(sticks_to_delta(&[0.5, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(sticks_to_delta(&[-0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_delta_cut_points() {
        let kappa = delta_to_kappa(&[0.2; 5]).unwrap();
        let expected = [-1.386294361, -0.405465108, 0.405465108, 1.386294361];
        assert!(close(&kappa, &expected, 1e-8));
        assert_eq!(delta_to_kappa(&[0.5, 0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn kappa_to_delta_examples() {
        assert!(close(&kappa_to_delta(&[0.0]).unwrap(), &[0.5, 0.5], 1e-15));
        let d = kappa_to_delta(&[-1.0, 1.0]).unwrap();
        assert!(close(&d, &[0.268941421, 0.462117157, 0.268941421], 1e-8));
        let k: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|&p| logit(p)).collect();
        assert!(close(&kappa_to_delta(&k).unwrap(), &[0.2; 5], 1e-12));
    }

    #[test]
    fn non_increasing_kappa_rejected() {
        assert!(matches!(kappa_to_delta(&[1.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(kappa_to_delta(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn cumulative_overflow_guard() {
        assert!(matches!(
            delta_to_kappa(&[1.0 - 1e-17, 1e-17, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn beta_prior_examples() {
        assert_eq!(log_prior_omega(&[0.3]), 0.0);
        assert!(log_prior_omega(&[0.5, 0.123]).abs() < 1e-15);
        let expected = 4f64.ln()
            + 3.0 * 0.8f64.ln()
            + 3f64.ln()
            + 2.0 * 0.75f64.ln()
            + 2f64.ln()
            + (2.0f64 / 3.0).ln();
        let got = log_prior_omega(&[0.2, 0.25, 1.0 / 3.0, 0.5]);
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn beta_prior_boundary_is_neg_infinity() {
        assert_eq!(log_prior_omega(&[1.0, 0.5]), f64::NEG_INFINITY);
        assert_eq!(log_prior_omega(&[0.0, 0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_means_give_uniform_pieces() {
        let delta = sticks_to_delta(&prior_mean_sticks(5)).unwrap();
        assert!(close(&delta, &[0.2; 5], 1e-15));
    }
}
