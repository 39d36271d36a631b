//! Instance generators shared by the integration and acceptance tests.

#![allow(dead_code)]

use povm_core::linalg::HermMatrix;
use povm_core::outcomes::{
    gen_ea_family, gen_pvm, gen_random_povm, gen_sic_qubit, gen_standard_pvm, gen_trine,
    random_unitary,
};
use povm_core::povm::{FinitePovm, Outcome, OutcomeLabel};
use povm_core::{Config, Povm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Named fixtures with known verdicts.
pub fn fixtures() -> Vec<(String, Povm, bool)> {
    let mut out = vec![
        ("sic".to_string(), gen_sic_qubit(), true),
        ("trine".to_string(), gen_trine(), true),
        ("ea(0)".to_string(), gen_ea_family(0.0), false),
    ];
    for d in 1..=4 {
        out.push((format!("pvm(d={d})"), gen_standard_pvm(d), true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for d in 2..=3 {
        let u = random_unitary(d, &mut rng);
        out.push((format!("random pvm(d={d})"), gen_pvm(&u).unwrap(), true));
    }
    for a in [
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_8,
        std::f64::consts::PI / 16.0,
        1e-3,
        0.3,
    ] {
        out.push((format!("ea({a})"), gen_ea_family(a), true));
    }
    let half = HermMatrix::identity(2).scale(0.5);
    out.push((
        "halves".to_string(),
        FinitePovm::from_effects(2, vec![half.clone(), half]).unwrap(),
        false,
    ));
    out
}

/// `p U_1 Q U_1^H + (1-p) U_2 Q U_2^H` for the standard PVM `Q`; the second
/// basis uses labels shifted by `shift`, so `shift < d` merges outcomes.
pub fn two_basis_mixture(d: usize, shift: u64, rng: &mut ChaCha8Rng) -> Povm {
    let p: f64 = rng.random_range(0.1..0.9);
    let a = gen_pvm::<f64>(&random_unitary(d, rng)).unwrap();
    let b = gen_pvm::<f64>(&random_unitary(d, rng)).unwrap();
    let mut outcomes: Vec<Outcome<f64>> = a
        .outcomes()
        .iter()
        .map(|o| Outcome::new(o.label.clone(), o.effect.scale(p)))
        .collect();
    for (i, o) in b.outcomes().iter().enumerate() {
        let label = OutcomeLabel::Index(i as u64 + shift);
        let e = o.effect.scale(1.0 - p);
        match outcomes.iter_mut().find(|x| x.label == label) {
            Some(x) => x.effect = x.effect.add(&e),
            None => outcomes.push(Outcome::new(label, e)),
        }
    }
    FinitePovm::new(d, outcomes).unwrap()
}

/// Mixed corpus for `d <= max_d`: Wishart POVMs of varied rank and size,
/// which are extreme generically when `Σ r_i² <= d²`, plus two-basis
/// mixtures, which are not.
pub fn random_corpus(count: usize, max_d: usize, seed: u64) -> Vec<Povm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let d = rng.random_range(2..=max_d);
            if i % 3 == 2 {
                let shift = rng.random_range(0..=d as u64);
                two_basis_mixture(d, shift, &mut rng)
            } else {
                let rank = rng.random_range(1..=d);
                let min_k = d.div_ceil(rank);
                let k = rng.random_range(min_k..=(d * d / (rank * rank)).max(min_k) + 1);
                gen_random_povm(d, k, rank, rng.random()).unwrap()
            }
        })
        .collect()
}

/// Decomposition corpus: `count` Wishart POVMs in dimension `d` with
/// `k` up to `3d²`.
pub fn decomposition_corpus(d: usize, count: usize, seed: u64) -> Vec<Povm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rank = rng.random_range(1..=d);
            let k = rng.random_range(d.div_ceil(rank).max(2)..=3 * d * d);
            gen_random_povm(d, k, rank, rng.random()).unwrap()
        })
        .collect()
}

pub fn cfg() -> Config {
    Config::default()
}
