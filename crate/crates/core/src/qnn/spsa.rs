use rand::Rng;

use crate::error::{Error, Result};

/// Simultaneous-perturbation gradient estimate of `loss` at `theta`.
///
/// Each repeat draws a Rademacher direction Δ and forms
/// `g_i = (L(θ + cΔ) − L(θ − cΔ)) / (2 c Δ_i)`; repeats are averaged.
pub fn spsa_estimate<R, F>(
    theta: &[f64],
    c: f64,
    repeats: usize,
    rng: &mut R,
    mut loss: F,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &mut R) -> Result<f64>,
{
    if !(c > 0.0) {
        return Err(Error::Range(format!("SPSA perturbation {c} must be positive")));
    }
    if repeats == 0 {
        return Err(Error::Range("SPSA needs at least one repeat".into()));
    }
    let mut grad = vec![0.0; theta.len()];
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    for _ in 0..repeats {
        let delta: Vec<f64> = (0..theta.len())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        for i in 0..theta.len() {
            plus[i] = theta[i] + c * delta[i];
            minus[i] = theta[i] - c * delta[i];
        }
        let diff = loss(&plus, rng)? - loss(&minus, rng)?;
        for (g, d) in grad.iter_mut().zip(&delta) {
            *g += diff / (2.0 * c * d);
        }
    }
    let n = repeats as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn half_norm_sq(t: &[f64]) -> f64 {
        0.5 * t.iter().map(|x| x * x).sum::<f64>()
    }

    #[test]
    fn recovers_quadratic_gradient() {
        let theta = [1.0, -2.0];
        let g = spsa_estimate(&theta, 0.01, 2000, &mut seed::rng(1), |t, _| Ok(half_norm_sq(t))).unwrap();
        let err = ((g[0] - 1.0).powi(2) + (g[1] + 2.0).powi(2)).sqrt() / 5f64.sqrt();
        assert!(err < 0.05, "{g:?}");
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let g = spsa_estimate(&[0.3, 0.1, 9.0], 0.01, 3, &mut seed::rng(2), |_, _| Ok(1.25)).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |t: &[f64], _: &mut _| Ok(t[0].sin() * t[1]);
        let a = spsa_estimate(&[0.4, 1.0], 0.01, 4, &mut seed::rng(9), f).unwrap();
        let b = spsa_estimate(&[0.4, 1.0], 0.01, 4, &mut seed::rng(9), f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(spsa_estimate(&[0.0], 0.0, 1, &mut seed::rng(0), |_, _| Ok(0.0)).is_err());
        assert!(spsa_estimate(&[0.0], 0.1, 0, &mut seed::rng(0), |_, _| Ok(0.0)).is_err());
    }
}
