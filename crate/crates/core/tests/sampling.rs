use nlgame::state::bitstring;
use nlgame::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn sampled_counts_follow_born_rule() {
    let mut psi = StateVector::<f64>::plus(3).unwrap();
    psi.rotate_pauli(&"YXZ".parse().unwrap(), 0.4).unwrap();
    psi.rotate_pauli(&"IYI".parse().unwrap(), 1.1).unwrap();
    let probs = psi.probabilities();
    let shots = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let counts = psi.sample(shots, &mut rng).unwrap();
    assert_eq!(counts.values().sum::<usize>(), shots);
    let mut stat = 0.0;
    let mut cells = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p < 1e-12 {
            assert!(!counts.contains_key(&bitstring(i, 3)));
            continue;
        }
        let expected = p * shots as f64;
        let observed = *counts.get(&bitstring(i, 3)).unwrap_or(&0) as f64;
        stat += (observed - expected).powi(2) / expected;
        cells += 1;
    }
    let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi2 = {stat}, critical = {critical}");
}

#[test]
fn zero_shots_rejected() {
    let psi = StateVector::<f64>::zero(2).unwrap();
    assert!(psi.sample(0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}
