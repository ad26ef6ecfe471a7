use rand::Rng;

/// Output of [`metropolis_hastings`]: post-burn-in states with their log
/// target values, one entry per step.
#[derive(Debug, Clone)]
pub struct Chain<S> {
    pub samples: Vec<(S, f64)>,
    pub accepted: usize,
    pub proposed: usize,
    /// Highest-density state visited, burn-in included.
    pub best: (S, f64),
}

impl<S> Chain<S> {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Metropolis-Hastings over `steps` steps, keeping those after `burn_in`.
///
/// `propose` returns a candidate and the log proposal ratio
/// log q(x | x') - log q(x' | x), or `None` for a move that is rejected
/// outright. A candidate is accepted with probability
/// min(1, exp(target' - target + log ratio)).
pub fn metropolis_hastings<S: Clone, R: Rng + ?Sized>(
    init: S,
    steps: usize,
    burn_in: usize,
    rng: &mut R,
    mut log_target: impl FnMut(&S) -> f64,
    mut propose: impl FnMut(&S, &mut R) -> Option<(S, f64)>,
) -> Chain<S> {
    let mut current_lp = log_target(&init);
    let mut current = init;
    let mut best = (current.clone(), current_lp);
    let mut samples = Vec::with_capacity(steps.saturating_sub(burn_in));
    let (mut accepted, mut proposed) = (0, 0);
    for step in 0..steps {
        proposed += 1;
        if let Some((candidate, log_ratio)) = propose(&current, rng) {
            let lp = log_target(&candidate);
            let log_alpha = lp - current_lp + log_ratio;
            // NaN densities are never accepted
            let accept = log_alpha >= 0.0 || rng.gen::<f64>() < log_alpha.exp();
            if accept && lp.is_finite() {
                current = candidate;
                current_lp = lp;
                accepted += 1;
                if lp > best.1 {
                    best = (current.clone(), lp);
                }
            }
        }
        if step >= burn_in {
            samples.push((current.clone(), current_lp));
        }
    }
    Chain { samples, accepted, proposed, best }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn samples_a_one_dimensional_gaussian() {
        let (mu, sd) = (1.5, 0.7);
        let mut rng = rng_from_seed(1);
        let chain = metropolis_hastings(
            0.0f64,
            200_000,
            1_000,
            &mut rng,
            |x| -0.5 * ((x - mu) / sd).powi(2),
            |x, r| Some((x + Normal::new(0.0, 1.5).unwrap().sample(r), 0.0)),
        );
        let n = chain.samples.len() as f64;
        let mean = chain.samples.iter().map(|s| s.0).sum::<f64>() / n;
        let var = chain.samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - mu).abs() < 0.02, "{mean}");
        assert!((var / (sd * sd) - 1.0).abs() < 0.03, "{var}");
        assert!(chain.acceptance_rate() > 0.2 && chain.acceptance_rate() < 0.8);
    }

    #[test]
    fn refused_moves_count_as_rejections() {
        let mut rng = rng_from_seed(2);
        let chain = metropolis_hastings(3u8, 10, 4, &mut rng, |_| 0.0, |_, _| None);
        assert_eq!(chain.accepted, 0);
        assert_eq!(chain.samples.len(), 6);
        assert!(chain.samples.iter().all(|s| s.0 == 3));
    }

    #[test]
    fn never_stores_non_finite_densities() {
        let mut rng = rng_from_seed(3);
        let chain = metropolis_hastings(
            0i32,
            500,
            0,
            &mut rng,
            |x| if x % 3 == 0 { 0.0 } else if x % 3 == 1 { f64::NAN } else { f64::INFINITY },
            |x, r| Some((x + r.gen_range(-2..=2), 0.0)),
        );
        assert!(chain.samples.iter().all(|s| s.1.is_finite()));
    }

    #[test]
    fn deterministic_given_rng_seed() {
        let run = || {
            metropolis_hastings(0.0f64, 1000, 0, &mut rng_from_seed(9), |x| -x * x, |x, r| {
                Some((x + r.gen_range(-1.0..1.0), 0.0))
            })
            .samples
        };
        assert_eq!(run(), run());
    }
}
