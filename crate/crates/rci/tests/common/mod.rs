//! Helpers shared between the integration suites.

use rand::Rng;
use rci::asymptotics::limiting_sum_rate;
use rci::Scenario;

pub fn random_scenario(rng: &mut impl Rng, max_groups: usize) -> Scenario {
    let l = rng.gen_range(1..=max_groups);
    let a2: Vec<f64> = (0..l).map(|_| rng.gen_range(0.02f64..1.0)).collect();
    let betas: Vec<f64> = (0..l).map(|_| rng.gen_range(0.05f64..0.8)).collect();
    let snr = rng.gen_range(0.5f64..50.0);
    Scenario::new(a2, betas, snr).unwrap()
}

/// Pattern-search maximizer over the power simplex: transfers power between
/// group pairs on a shrinking step, independent of the closed-form water
/// level.
pub fn pattern_search_rate(scenario: &Scenario, rho: f64) -> f64 {
    let betas = scenario.loading().to_vec();
    let loaded: Vec<usize> = (0..betas.len()).filter(|&j| betas[j] > 0.0).collect();
    let mut p = vec![0.0; betas.len()];
    for &j in &loaded {
        p[j] = 1.0;
    }
    let rate = |p: &[f64]| limiting_sum_rate(scenario, p, rho).unwrap();
    let mut best = rate(&p);
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for &i in &loaded {
            for &j in &loaded {
                if i == j {
                    continue;
                }
                // move `step` units of budget from j to i
                let mut q = p.clone();
                q[i] += step / betas[i];
                q[j] -= step / betas[j];
                if q[j] >= 0.0 {
                    let r = rate(&q);
                    if r > best {
                        best = r;
                        p = q;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}
