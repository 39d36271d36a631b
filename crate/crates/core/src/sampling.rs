//! Outcome sampling: directly from `P`, or in two stages through a mixture.
//!
//! Draws are split into fixed-size shards. Shard `s` uses
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `s`, so a histogram depends
//! only on `(seed, n)` and not on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::decompose::ExtremalMixture;
use crate::error::{Error, Result};
use crate::povm::{born_probabilities, DensityState, FinitePovm, LabelSet, OutcomeLabel};
use crate::scalar::{to_f64, Real};

/// Draws per RNG stream.
pub const SHARD_SIZE: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeHistogram<T: Real> {
    pub labels: Vec<OutcomeLabel<T>>,
    pub counts: Vec<u64>,
}

impl<T: Real> OutcomeHistogram<T> {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count_of(&self, label: &OutcomeLabel<T>, tol: T) -> u64 {
        self.labels
            .iter()
            .position(|l| l.matches(label, tol))
            .map_or(0, |i| self.counts[i])
    }
}

/// Cumulative distribution for categorical draws; rejects negative or all-zero weights.
struct Categorical {
    cdf: Vec<f64>,
}

impl Categorical {
    fn new(weights: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(weights.len());
        for &w in weights {
            if !(w >= 0.0) {
                return Err(Error::NegativeProbability(w));
            }
            acc += w;
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { cdf })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        // the last bucket absorbs u arbitrarily close to 1
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn sharded_counts<F>(n: u64, bins: usize, seed: u64, draw: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(seed, s);
            let len = SHARD_SIZE.min(n - s * SHARD_SIZE);
            let mut counts = vec![0u64; bins];
            for _ in 0..len {
                counts[draw(&mut rng)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn check_dims<T: Real>(povm_dim: usize, state: &DensityState<T>) -> Result<()> {
    if state.dim() != povm_dim {
        return Err(Error::DimensionMismatch {
            expected: povm_dim,
            found: state.dim(),
        });
    }
    Ok(())
}

/// `n` draws of `y ~ tr(ρ P(y))`.
pub fn sample_direct<T: Real>(
    povm: &FinitePovm<T>,
    state: &DensityState<T>,
    n: u64,
    seed: u64,
) -> Result<OutcomeHistogram<T>> {
    check_dims(povm.dim(), state)?;
    let probs: Vec<f64> = born_probabilities(povm, state)?
        .into_iter()
        .map(to_f64)
        .collect();
    let cat = Categorical::new(&probs)?;
    let counts = sharded_counts(n, probs.len(), seed, |rng| cat.draw(rng));
    Ok(OutcomeHistogram {
        labels: povm.labels().cloned().collect(),
        counts,
    })
}

/// `n` draws of `k ~ p_k` followed by `y ~ tr(ρ E_k(y))`.
pub fn sample_two_stage<T: Real>(
    mix: &ExtremalMixture<T>,
    state: &DensityState<T>,
    n: u64,
    seed: u64,
    cfg: &Config,
) -> Result<OutcomeHistogram<T>> {
    check_dims(mix.dim, state)?;
    let label_tol: T = cfg.label_tol();
    let labels = mix.label_union(label_tol);
    let weights: Vec<f64> = mix.components.iter().map(|c| to_f64(c.weight)).collect();
    let outer = Categorical::new(&weights)?;
    let inner = mix
        .components
        .iter()
        .map(|c| {
            let probs: Vec<f64> = born_probabilities(&c.povm, state)?
                .into_iter()
                .map(to_f64)
                .collect();
            let pos: Vec<usize> = c
                .povm
                .labels()
                .map(|l| labels.position(l, label_tol).unwrap())
                .collect();
            // a component with zero mass on ρ can still be selected only with zero weight
            let cat = Categorical::new(&probs).ok();
            Ok((cat, pos))
        })
        .collect::<Result<Vec<_>>>()?;
    if mix
        .components
        .iter()
        .zip(&inner)
        .any(|(c, (cat, _))| cat.is_none() && c.weight > T::zero())
    {
        return Err(Error::InvalidState(
            "state has zero probability on a mixture component".into(),
        ));
    }
    let counts = sharded_counts(n, labels.len(), seed, |rng| {
        let (cat, pos) = &inner[outer.draw(rng)];
        pos[cat.as_ref().expect("positive-weight component").draw(rng)]
    });
    Ok(OutcomeHistogram {
        labels: labels.into_labels(),
        counts,
    })
}

/// `½ Σ_y |h1(y)/n1 - h2(y)/n2|` over the union of both label sets.
pub fn tv_distance<T: Real>(
    h1: &OutcomeHistogram<T>,
    h2: &OutcomeHistogram<T>,
    label_tol: T,
) -> Result<f64> {
    let (n1, n2) = (h1.total(), h2.total());
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut labels = LabelSet::new();
    let mut freq: Vec<[f64; 2]> = Vec::new();
    for (side, (h, n)) in [(h1, n1), (h2, n2)].into_iter().enumerate() {
        for (l, &c) in h.labels.iter().zip(&h.counts) {
            let i = labels.intern(l, label_tol);
            if i == freq.len() {
                freq.push([0.0; 2]);
            }
            freq[i][side] += c as f64 / n as f64;
        }
    }
    Ok(0.5 * freq.iter().map(|[a, b]| (a - b).abs()).sum::<f64>())
}
