//! Finite barycentric decomposition into extreme POVMs.
//!
//! A non-extreme `P` is split along a Hermitian kernel element `D` of `T_P`:
//! `P_±,i = S_i (1 ± τ_± D_i) S_i^H` with `τ_+ = 1/|λ_min(D)|` and
//! `τ_- = 1/λ_max(D)`, so each child loses rank in at least one effect and
//! `P = w_+ P_+ + w_- P_-` with `w_± τ_± = w_∓ τ_∓`. The integer budget
//! `Σ rank(P_i)²` strictly decreases along every split, which bounds the
//! recursion depth.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, Strategy};
use crate::error::{Error, Result};
use crate::extremality::{
    analyze_distinct, appended_block_kernel, hermitian_from_kernel_vector,
    hermitian_kernel_element, tp_map_unchecked, Analysis, BlockHermitian, ExtremalityVerdict,
    TpMap,
};
use crate::linalg::{eig_hermitian, CMatrix, HermMatrix};
use crate::outcomes::frame_normalize;
use crate::povm::{
    convex_combine, prune, DensityState, FinitePovm, LabelSet, Outcome, OutcomeLabel,
};
use crate::scalar::{lit, scaled_tol, to_f64, Real};

#[derive(Clone, Debug)]
pub struct WeightedPovm<T: Real> {
    pub weight: T,
    pub povm: FinitePovm<T>,
}

#[derive(Clone, Debug)]
pub struct SplitResult<T: Real> {
    pub plus: WeightedPovm<T>,
    pub minus: WeightedPovm<T>,
    pub tau_plus: T,
    pub tau_minus: T,
}

impl<T: Real> SplitResult<T> {
    /// The child whose splitting magnitude is smaller (ties go to `plus`).
    /// Its weight is the larger one and its frame correction the smallest.
    pub fn heavier(self) -> WeightedPovm<T> {
        if self.tau_plus <= self.tau_minus {
            self.plus
        } else {
            self.minus
        }
    }
}

fn clamp_tol<T: Real>() -> T {
    scaled_tol(1e-12, 64.0)
}

/// `S (W diag(μ) W^H) S^H` where `W, μ` diagonalise `M` and `μ` is floored at zero.
fn sandwich_clamped<T: Real>(factor: &CMatrix<T>, w: &CMatrix<T>, mu: &[T]) -> HermMatrix<T> {
    let sw = factor * w;
    let mut scaled = sw.clone();
    for (j, &m) in mu.iter().enumerate() {
        let m = if m <= clamp_tol() { T::zero() } else { m };
        scaled.column_mut(j).scale_mut(m);
    }
    HermMatrix::hermitize_unchecked(&scaled * sw.adjoint())
}

fn rebuild<T: Real>(
    dim: usize,
    labels: Vec<OutcomeLabel<T>>,
    effects: Vec<HermMatrix<T>>,
) -> Result<FinitePovm<T>> {
    let effects = frame_normalize(&effects)?;
    let outcomes = labels
        .into_iter()
        .zip(effects)
        .map(|(l, e)| Outcome::new(l, e))
        .collect();
    FinitePovm::new(dim, outcomes)
}

/// Child effects `S_i (1 ± τ_± D_i) S_i^H` in block order, before frame
/// normalisation. Their sums agree with `Σ_i S_i S_i^H` up to the kernel
/// residual of `D`, so this also applies to a sub-collection of outcomes.
fn split_effects<T: Real>(
    map: &TpMap<T>,
    direction: &BlockHermitian<T>,
    cfg: &Config,
) -> Result<RawSplit<T>> {
    let residual = map.apply(direction)?.max_abs();
    if residual > cfg.kernel_residual_tol::<T>() {
        return Err(Error::NotInKernel {
            residual: to_f64(residual),
        });
    }
    // blocks where D vanishes leave the effect unchanged
    let spectra = direction
        .blocks
        .iter()
        .map(|b| {
            (b.max_abs() > T::zero())
                .then(|| eig_hermitian(b))
                .transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut lo, mut hi) = (T::zero(), T::zero());
    for s in spectra
        .iter()
        .flatten()
        .filter(|s| !s.eigenvalues.is_empty())
    {
        lo = lo.min(s.min());
        hi = hi.max(s.max());
    }
    let radius = lo.abs().max(hi.abs());
    let side_tol = cfg.rank_tol::<T>() * radius;
    if !(lo < -side_tol && hi > side_tol) {
        return Err(Error::OneSidedSpectrum {
            min: to_f64(lo),
            max: to_f64(hi),
        });
    }
    let tau_plus = T::one() / lo.abs();
    let tau_minus = T::one() / hi;

    let child = |sign: T, tau: T| -> Vec<HermMatrix<T>> {
        map.blocks()
            .iter()
            .zip(&spectra)
            .map(|(b, s)| {
                if b.rank() == 0 {
                    return HermMatrix::zeros(map.dim());
                }
                let Some(s) = s else {
                    return HermMatrix::hermitize_unchecked(&b.factor * b.factor.adjoint());
                };
                let mu: Vec<T> = s
                    .eigenvalues
                    .iter()
                    .map(|&l| T::one() + sign * tau * l)
                    .collect();
                sandwich_clamped(&b.factor, &s.eigenvectors, &mu)
            })
            .collect()
    };
    Ok(RawSplit {
        plus: child(T::one(), tau_plus),
        minus: child(-T::one(), tau_minus),
        tau_plus,
        tau_minus,
    })
}

struct RawSplit<T: Real> {
    plus: Vec<HermMatrix<T>>,
    minus: Vec<HermMatrix<T>>,
    tau_plus: T,
    tau_minus: T,
}

/// Splits `P` (given through its `T_P`) along the kernel direction `D`.
pub fn split_once<T: Real>(
    map: &TpMap<T>,
    direction: &BlockHermitian<T>,
    cfg: &Config,
) -> Result<SplitResult<T>> {
    let raw = split_effects(map, direction, cfg)?;
    let labels: Vec<OutcomeLabel<T>> = map.blocks().iter().map(|b| b.label.clone()).collect();
    let plus = rebuild(map.dim(), labels.clone(), raw.plus)?;
    let minus = rebuild(map.dim(), labels, raw.minus)?;
    let (tau_plus, tau_minus) = (raw.tau_plus, raw.tau_minus);
    let total = tau_plus + tau_minus;
    Ok(SplitResult {
        plus: WeightedPovm {
            weight: tau_minus / total,
            povm: plus,
        },
        minus: WeightedPovm {
            weight: tau_plus / total,
            povm: minus,
        },
        tau_plus,
        tau_minus,
    })
}

#[derive(Clone, Debug)]
pub struct MixtureComponent<T: Real> {
    pub weight: T,
    pub povm: FinitePovm<T>,
    /// Present for components produced by decomposition.
    pub verdict: Option<ExtremalityVerdict<T>>,
}

/// Finite barycentric representation `Σ_k p_k E_k`.
///
/// When `complete` is false the leaf budget ran out and the last component
/// carries the undecomposed (non-extreme) remainder, so the weights still
/// sum to one and the mixture still reproduces its source.
#[derive(Clone, Debug)]
pub struct ExtremalMixture<T: Real> {
    pub dim: usize,
    pub components: Vec<MixtureComponent<T>>,
    pub complete: bool,
}

impl<T: Real> ExtremalMixture<T> {
    /// The one-component mixture `1 · P`.
    pub fn trivial(povm: FinitePovm<T>) -> Self {
        Self {
            dim: povm.dim(),
            components: vec![MixtureComponent {
                weight: T::one(),
                povm,
                verdict: None,
            }],
            complete: true,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weight_sum(&self) -> T {
        self.components.iter().fold(T::zero(), |a, c| a + c.weight)
    }

    /// Union of all component labels, in first-occurrence order.
    pub fn label_union(&self, label_tol: T) -> LabelSet<T> {
        let mut set = LabelSet::new();
        for c in &self.components {
            for l in c.povm.labels() {
                set.intern(l, label_tol);
            }
        }
        set
    }

    /// `Σ_k p_k E_k`, checking the weights form a probability vector.
    pub fn recombine(&self, cfg: &Config) -> Result<FinitePovm<T>> {
        let parts: Vec<(T, &FinitePovm<T>)> = self
            .components
            .iter()
            .map(|c| (c.weight, &c.povm))
            .collect();
        convex_combine(&parts, cfg)
    }

    /// `Σ_k p_k E_k` with no checks on the weights.
    pub fn weighted_sum(&self, label_tol: T) -> FinitePovm<T> {
        let mut labels = LabelSet::new();
        let mut effects: Vec<HermMatrix<T>> = Vec::new();
        for c in &self.components {
            for o in c.povm.outcomes() {
                let i = labels.intern(&o.label, label_tol);
                if i == effects.len() {
                    effects.push(HermMatrix::zeros(self.dim));
                }
                effects[i].axpy(c.weight, &o.effect);
            }
        }
        let outcomes = labels
            .into_labels()
            .into_iter()
            .zip(effects)
            .map(|(l, e)| Outcome::new(l, e))
            .collect();
        FinitePovm::new(self.dim, outcomes).expect("components share the mixture dimension")
    }
}

/// Decomposes a valid POVM into extreme POVMs using `cfg.strategy`.
pub fn decompose_extremal<T: Real>(
    povm: &FinitePovm<T>,
    cfg: &Config,
) -> Result<ExtremalMixture<T>> {
    cfg.validate()?;
    povm.ensure_valid(cfg)?;
    let mut mix = match cfg.strategy {
        Strategy::Peel => peel(povm, cfg)?,
        Strategy::Tree => tree(povm, cfg)?,
    };
    if cfg.merge_leaves {
        mix = merge_identical(mix, cfg);
    }
    Ok(mix)
}

/// Finds an extreme POVM `E` with `w E <= P` for some `w > 0` by following
/// the heavier child of successive splits.
///
/// Outcomes are streamed into a working set on which `T` is kept injective.
/// A kernel direction supported on the working set leaves every other
/// effect and the working set's sum unchanged, so splits never touch the
/// outcomes that are not yet admitted.
fn descend<T: Real>(start: &Analysis<T>, cfg: &Config, path: &str) -> Result<Analysis<T>> {
    let Ok(leaf) = descend_streaming(start.povm.dim(), start.povm.outcomes(), cfg, path) else {
        // the incremental kernel is a shortcut; the full SVD path decides
        return descend_full(start.clone(), cfg, &format!("{path}/full"));
    };
    let a = analyze_distinct(&leaf, cfg).map_err(|e| e.at_branch(path))?;
    if a.verdict.is_extreme {
        Ok(a)
    } else {
        // normalisation can reopen a kernel that was only marginally closed
        descend_full(a, cfg, &format!("{path}/full"))
    }
}

/// Outcomes enter a working set one at a time. The set is kept injective:
/// splitting only shrinks ranges, so only the newest block can open a kernel.
fn descend_streaming<T: Real>(
    dim: usize,
    outcomes: &[Outcome<T>],
    cfg: &Config,
    path: &str,
) -> Result<FinitePovm<T>> {
    let mut working: Vec<Outcome<T>> = Vec::new();
    let mut splits = 0usize;
    for o in outcomes {
        working.push(o.clone());
        let mut last_budget = usize::MAX;
        loop {
            let here = || format!("{path}/{splits}");
            let partial = prune(
                &FinitePovm::new(dim, std::mem::take(&mut working))?,
                cfg.prune_tol(),
            );
            let map = tp_map_unchecked(&partial, cfg).map_err(|e| e.at_branch(&here()))?;
            if map.domain_dim() >= last_budget {
                return Err(Error::NoProgress {
                    before: last_budget,
                    after: map.domain_dim(),
                }
                .at_branch(&here()));
            }
            let Some(v) = appended_block_kernel(&map, cfg).map_err(|e| e.at_branch(&here()))?
            else {
                working = partial.into_outcomes();
                break;
            };
            last_budget = map.domain_dim();
            let direction =
                hermitian_from_kernel_vector(&map, &v, cfg).map_err(|e| e.at_branch(&here()))?;
            let raw = split_effects(&map, &direction, cfg).map_err(|e| e.at_branch(&here()))?;
            let effects = if raw.tau_plus <= raw.tau_minus {
                raw.plus
            } else {
                raw.minus
            };
            working = map
                .blocks()
                .iter()
                .zip(effects)
                .map(|(b, e)| Outcome::new(b.label.clone(), e))
                .collect();
            splits += 1;
        }
    }
    let labels = working.iter().map(|o| o.label.clone()).collect();
    let effects = working.into_iter().map(|o| o.effect).collect();
    rebuild(dim, labels, effects).map_err(|e| e.at_branch(path))
}

/// [`descend`] without the working set: every split acts on the whole POVM.
fn descend_full<T: Real>(start: Analysis<T>, cfg: &Config, path: &str) -> Result<Analysis<T>> {
    let mut current = start;
    let mut depth = 0usize;
    while !current.verdict.is_extreme {
        let here = || format!("{path}/{depth}");
        let direction =
            hermitian_kernel_element(&current.map, cfg).map_err(|e| e.at_branch(&here()))?;
        let split = split_once(&current.map, &direction, cfg).map_err(|e| e.at_branch(&here()))?;
        let next =
            analyze_distinct(&split.heavier().povm, cfg).map_err(|e| e.at_branch(&here()))?;
        if next.verdict.domain_dim >= current.verdict.domain_dim {
            return Err(Error::NoProgress {
                before: current.verdict.domain_dim,
                after: next.verdict.domain_dim,
            }
            .at_branch(&here()));
        }
        current = next;
        depth += 1;
    }
    Ok(current)
}

/// Largest `α ≤ 1` with `R_i - α E_i ⪰ 0` for all `i`, and the relative
/// densities `F_i = S_i^+ E_i S_i^{+H}` it was computed from.
fn dominated_fraction<T: Real>(
    map: &TpMap<T>,
    leaf: &FinitePovm<T>,
    cfg: &Config,
) -> Result<(T, Vec<Option<crate::linalg::SpectralDecomp<T>>>)> {
    let label_tol = cfg.label_tol::<T>();
    let mut alpha = T::one();
    let mut spectra = Vec::with_capacity(map.blocks().len());
    for b in map.blocks() {
        let Some(e) = leaf.effect_at(&b.label, label_tol) else {
            spectra.push(None);
            continue;
        };
        let inv_sqrt: Vec<T> = b
            .range
            .eigenvalues
            .iter()
            .map(|&l| T::one() / l.sqrt())
            .collect();
        let mut pinv = b.range.basis.adjoint();
        for (r, s) in inv_sqrt.iter().enumerate() {
            pinv.row_mut(r).scale_mut(*s);
        }
        let rel = e.congruence(&pinv);
        let s = eig_hermitian(&rel)?;
        if s.max() > T::zero() {
            alpha = alpha.min(T::one() / s.max());
        }
        spectra.push(Some(s));
    }
    Ok((alpha, spectra))
}

fn peel<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<ExtremalMixture<T>> {
    let dim = povm.dim();
    let mut components = Vec::new();
    let mut mass = T::one();
    let mut current = analyze_distinct(povm, cfg).map_err(|e| e.at_branch("peel/0"))?;
    let mut complete = true;
    loop {
        let step = components.len();
        let path = format!("peel/{step}");
        if current.verdict.is_extreme {
            components.push(MixtureComponent {
                weight: mass,
                povm: current.povm,
                verdict: Some(current.verdict),
            });
            break;
        }
        if step + 1 >= cfg.max_leaves {
            components.push(MixtureComponent {
                weight: mass,
                povm: current.povm,
                verdict: Some(current.verdict),
            });
            complete = false;
            break;
        }

        let leaf = descend(&current, cfg, &path)?;
        let (alpha, rel) =
            dominated_fraction(&current.map, &leaf.povm, cfg).map_err(|e| e.at_branch(&path))?;
        if alpha >= T::one() - clamp_tol::<T>() {
            // only reachable when the remainder is itself extreme up to rounding
            components.push(MixtureComponent {
                weight: mass,
                povm: leaf.povm,
                verdict: Some(leaf.verdict),
            });
            break;
        }

        // R' = (R - α E) / (1 - α), computed on the ranges of R
        let keep = T::one() - alpha;
        let labels: Vec<OutcomeLabel<T>> = current
            .map
            .blocks()
            .iter()
            .map(|b| b.label.clone())
            .collect();
        let effects = current
            .map
            .blocks()
            .iter()
            .zip(&rel)
            .map(|(b, s)| match s {
                None => HermMatrix::hermitize_unchecked(&b.factor * b.factor.adjoint())
                    .scale(T::one() / keep),
                Some(s) => {
                    let mu: Vec<T> = s
                        .eigenvalues
                        .iter()
                        .map(|&f| (T::one() - alpha * f) / keep)
                        .collect();
                    sandwich_clamped(&b.factor, &s.eigenvectors, &mu)
                }
            })
            .collect();
        let remainder = rebuild(dim, labels, effects).map_err(|e| e.at_branch(&path))?;
        let next = analyze_distinct(&remainder, cfg).map_err(|e| e.at_branch(&path))?;
        if next.verdict.domain_dim >= current.verdict.domain_dim {
            return Err(Error::NoProgress {
                before: current.verdict.domain_dim,
                after: next.verdict.domain_dim,
            }
            .at_branch(&path));
        }

        let next_mass = mass * keep;
        components.push(MixtureComponent {
            weight: mass - next_mass,
            povm: leaf.povm,
            verdict: Some(leaf.verdict),
        });
        mass = next_mass;
        current = next;
    }
    Ok(ExtremalMixture {
        dim,
        components,
        complete,
    })
}

struct TreeCtx<'a> {
    cfg: &'a Config,
    leaves: AtomicUsize,
}

type TreeOut<T> = (Vec<MixtureComponent<T>>, bool);

fn tree<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<ExtremalMixture<T>> {
    let ctx = TreeCtx {
        cfg,
        leaves: AtomicUsize::new(1),
    };
    let (components, complete) = tree_node(povm, T::one(), "root".to_string(), &ctx)?;
    Ok(ExtremalMixture {
        dim: povm.dim(),
        components,
        complete,
    })
}

fn tree_node<T: Real>(
    povm: &FinitePovm<T>,
    weight: T,
    path: String,
    ctx: &TreeCtx<'_>,
) -> Result<TreeOut<T>> {
    let cfg = ctx.cfg;
    let a = analyze_distinct(povm, cfg).map_err(|e| e.at_branch(&path))?;
    if a.verdict.is_extreme {
        return Ok((
            vec![MixtureComponent {
                weight,
                povm: a.povm,
                verdict: Some(a.verdict),
            }],
            true,
        ));
    }
    // each split turns one pending leaf into two
    let reserved = ctx
        .leaves
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
            (n < cfg.max_leaves).then_some(n + 1)
        })
        .is_ok();
    if !reserved {
        return Ok((
            vec![MixtureComponent {
                weight,
                povm: a.povm,
                verdict: Some(a.verdict),
            }],
            false,
        ));
    }
    let direction = hermitian_kernel_element(&a.map, cfg).map_err(|e| e.at_branch(&path))?;
    let split = split_once(&a.map, &direction, cfg).map_err(|e| e.at_branch(&path))?;
    let (plus, minus) = (split.plus, split.minus);
    let (left, right) = rayon::join(
        || tree_node(&plus.povm, weight * plus.weight, format!("{path}/+"), ctx),
        || tree_node(&minus.povm, weight * minus.weight, format!("{path}/-"), ctx),
    );
    let (mut l, lc) = left?;
    let (r, rc) = right?;
    l.extend(r);
    Ok((l, lc && rc))
}

/// Sums the weights of leaves that agree within `cfg.merge_tol` after label alignment.
fn merge_identical<T: Real>(mix: ExtremalMixture<T>, cfg: &Config) -> ExtremalMixture<T> {
    let tol: T = cfg.tol(cfg.merge_tol);
    let label_tol: T = cfg.label_tol();
    let mut merged: Vec<MixtureComponent<T>> = Vec::new();
    for c in mix.components {
        match merged
            .iter_mut()
            .find(|m| m.povm.len() == c.povm.len() && m.povm.distance(&c.povm, label_tol) <= tol)
        {
            Some(m) => m.weight += c.weight,
            None => merged.push(c),
        }
    }
    ExtremalMixture {
        dim: mix.dim,
        components: merged,
        complete: mix.complete,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub trials: usize,
    /// `max |ρ(E_P(f)) - Σ_k p_k ρ(E_k(f))|` over the random trials.
    pub max_expectation_residual: f64,
    /// `max |P(y) - Σ_k p_k E_k(y)|` over labels and entries.
    pub max_effect_residual: f64,
    pub weight_sum_residual: f64,
}

impl VerificationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_expectation_residual < tol
            && self.max_effect_residual < tol
            && self.weight_sum_residual < tol
    }
}

/// Checks that `mix` has barycenter `povm`, both effect-wise and through
/// `trials` random (state, function) pairs. States alternate between
/// Haar-random pure and Hilbert-Schmidt random mixed; function values are
/// uniform on `[-1, 1]`.
pub fn verify_barycenter<T: Real>(
    povm: &FinitePovm<T>,
    mix: &ExtremalMixture<T>,
    trials: usize,
    seed: u64,
    cfg: &Config,
) -> Result<VerificationReport> {
    let dim = povm.dim();
    if let Some(c) = mix.components.iter().find(|c| c.povm.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.povm.dim(),
        });
    }
    if mix.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: mix.dim,
        });
    }
    let label_tol: T = cfg.label_tol();
    let mut labels = mix.label_union(label_tol);
    for l in povm.labels() {
        labels.intern(l, label_tol);
    }
    // effect index -> position in the label union
    let source_pos: Vec<usize> = povm
        .labels()
        .map(|l| labels.position(l, label_tol).unwrap())
        .collect();
    let comp_pos: Vec<Vec<usize>> = mix
        .components
        .iter()
        .map(|c| {
            c.povm
                .labels()
                .map(|l| labels.position(l, label_tol).unwrap())
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_expect = T::zero();
    for t in 0..trials {
        let state = if t % 2 == 0 {
            DensityState::random_pure(dim, &mut rng)
        } else {
            DensityState::random_mixed(dim, &mut rng)
        };
        let f: Vec<T> = (0..labels.len())
            .map(|_| lit(rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let lhs = povm
            .effects()
            .zip(&source_pos)
            .fold(T::zero(), |acc, (e, &i)| acc + f[i] * state.expect(e));
        let rhs = mix
            .components
            .iter()
            .zip(&comp_pos)
            .fold(T::zero(), |acc, (c, pos)| {
                let inner = c
                    .povm
                    .effects()
                    .zip(pos)
                    .fold(T::zero(), |a, (e, &i)| a + f[i] * state.expect(e));
                acc + c.weight * inner
            });
        max_expect = max_expect.max((lhs - rhs).abs());
    }
    let combined = mix.weighted_sum(label_tol);
    Ok(VerificationReport {
        trials,
        max_expectation_residual: to_f64(max_expect),
        max_effect_residual: to_f64(povm.distance(&combined, label_tol)),
        weight_sum_residual: to_f64((mix.weight_sum() - T::one()).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremality::{analyze, build_tp_map, is_extreme};
    use crate::linalg::range_isometry;
    use crate::outcomes::{gen_pvm, gen_random_povm, gen_sic_qubit, gen_standard_pvm};
    use crate::povm::prune_and_merge;
    use crate::scalar::creal;

    fn idx(i: u64) -> OutcomeLabel<f64> {
        OutcomeLabel::Index(i)
    }

    fn halves() -> FinitePovm<f64> {
        let h = HermMatrix::identity(2).scale(0.5);
        FinitePovm::from_effects(2, vec![h.clone(), h]).unwrap()
    }

    fn budget(p: &FinitePovm<f64>) -> usize {
        p.effects()
            .map(|e| range_isometry(e, 1e-10).unwrap().rank().pow(2))
            .sum()
    }

    /// z-basis and x-basis PVMs mixed half-half, labels 0..3.
    fn two_bases() -> FinitePovm<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let had = CMatrix::from_row_slice(2, 2, &[creal(s), creal(s), creal(s), creal(-s)]);
        let x = gen_pvm(&had).unwrap();
        let effects = gen_standard_pvm::<f64>(2)
            .effects()
            .chain(x.effects())
            .map(|e| e.scale(0.5))
            .collect();
        FinitePovm::from_effects(2, effects).unwrap()
    }

    #[test]
    fn split_of_halves() {
        let cfg = Config::default();
        let map = build_tp_map(&halves(), &cfg).unwrap();
        let d = BlockHermitian {
            blocks: vec![HermMatrix::identity(2), HermMatrix::identity(2).scale(-1.0)],
        };
        let s = split_once(&map, &d, &cfg).unwrap();
        assert_eq!((s.tau_plus, s.tau_minus), (1.0, 1.0));
        assert_eq!((s.plus.weight, s.minus.weight), (0.5, 0.5));
        let plus = prune_and_merge(&s.plus.povm, 1e-12, 1e-9);
        let minus = prune_and_merge(&s.minus.povm, 1e-12, 1e-9);
        assert!(plus.distance(&FinitePovm::trivial(2, idx(0)), 1e-9) < 1e-14);
        assert!(minus.distance(&FinitePovm::trivial(2, idx(1)), 1e-9) < 1e-14);
        let back =
            convex_combine(&[(s.plus.weight, &plus), (s.minus.weight, &minus)], &cfg).unwrap();
        assert!(back.distance(&halves(), 1e-9) < 1e-14);
    }

    #[test]
    fn split_rejects_bad_directions() {
        let cfg = Config::default();
        let map = build_tp_map(&halves(), &cfg).unwrap();
        let not_kernel = BlockHermitian {
            blocks: vec![HermMatrix::identity(2), HermMatrix::zeros(2)],
        };
        assert!(matches!(
            split_once(&map, &not_kernel, &cfg),
            Err(Error::NotInKernel { .. })
        ));
        let zero = BlockHermitian {
            blocks: vec![HermMatrix::zeros(2), HermMatrix::zeros(2)],
        };
        assert!(matches!(
            split_once(&map, &zero, &cfg),
            Err(Error::OneSidedSpectrum { .. })
        ));
    }

    #[test]
    fn splits_reconstruct_and_reduce_rank() {
        let cfg = Config::default();
        for seed in 0..60 {
            let d = 2 + seed as usize % 3;
            let k = 2 + seed as usize % (2 * d);
            let rank = (1 + seed as usize % d).max(d.div_ceil(k));
            let p = gen_random_povm::<f64>(d, k, rank, seed).unwrap();
            let a = analyze(&p, &cfg).unwrap();
            if a.verdict.is_extreme {
                continue;
            }
            let dir = hermitian_kernel_element(&a.map, &cfg).unwrap();
            let s = split_once(&a.map, &dir, &cfg).unwrap();
            assert!(((s.plus.weight * s.tau_plus) - (s.minus.weight * s.tau_minus)).abs() < 1e-12);
            assert!((s.plus.weight + s.minus.weight - 1.0).abs() < 1e-15);
            let back = convex_combine(
                &[
                    (s.plus.weight, &s.plus.povm),
                    (s.minus.weight, &s.minus.povm),
                ],
                &cfg,
            )
            .unwrap();
            assert!(back.distance(&a.povm, 1e-9) < 1e-10, "seed {seed}");
            for child in [&s.plus.povm, &s.minus.povm] {
                assert!(child.validate(&cfg).is_valid());
                assert!(budget(child) < budget(&a.povm), "seed {seed}");
            }
        }
    }

    #[test]
    fn extreme_input_is_its_own_decomposition() {
        let cfg = Config::default();
        let sic = gen_sic_qubit::<f64>();
        let mix = decompose_extremal(&sic, &cfg).unwrap();
        assert!(mix.complete);
        assert_eq!(mix.len(), 1);
        assert_eq!(mix.components[0].weight, 1.0);
        assert_eq!(mix.components[0].povm, sic);
    }

    #[test]
    fn halves_decompose_into_extreme_povms() {
        for strategy in [Strategy::Peel, Strategy::Tree] {
            let cfg = Config {
                strategy,
                ..Config::default()
            };
            let mix = decompose_extremal(&halves(), &cfg).unwrap();
            check_mixture(&halves(), &mix, &cfg);
            // any leaf is either deterministic or a two-outcome PVM
            for c in &mix.components {
                let ranks = is_extreme(&c.povm, &cfg).unwrap().ranks;
                assert!(ranks == vec![2] || ranks == vec![1, 1], "{ranks:?}");
            }
        }
    }

    fn check_mixture(p: &FinitePovm<f64>, mix: &ExtremalMixture<f64>, cfg: &Config) {
        assert!(mix.complete);
        assert!((mix.weight_sum() - 1.0).abs() < 1e-12);
        let d = p.dim();
        for c in &mix.components {
            assert!(c.weight > 0.0 && c.weight <= 1.0);
            assert!(c.povm.len() <= d * d);
            let v = is_extreme(&c.povm, cfg).unwrap();
            assert!(v.is_extreme);
            assert!(v.domain_dim <= d * d);
        }
        let back = mix.recombine(cfg).unwrap();
        assert!(back.distance(p, 1e-9) < 1e-9);
    }

    #[test]
    fn two_bases_mixture() {
        for strategy in [Strategy::Peel, Strategy::Tree] {
            let cfg = Config {
                strategy,
                ..Config::default()
            };
            let p = two_bases();
            assert!(!is_extreme(&p, &cfg).unwrap().is_extreme);
            let mix = decompose_extremal(&p, &cfg).unwrap();
            check_mixture(&p, &mix, &cfg);
        }
    }

    #[test]
    fn random_povms_decompose_with_both_strategies() {
        for seed in 0..12 {
            let d = 2 + seed as usize % 2;
            let p = gen_random_povm::<f64>(d, d + 2, 1 + seed as usize % d, seed).unwrap();
            for strategy in [Strategy::Peel, Strategy::Tree] {
                let cfg = Config {
                    strategy,
                    ..Config::default()
                };
                let mix = decompose_extremal(&p, &cfg).unwrap();
                check_mixture(&p, &mix, &cfg);
            }
        }
    }

    #[test]
    fn leaf_budget_flags_incomplete() {
        let p = gen_random_povm::<f64>(3, 12, 3, 5).unwrap();
        for strategy in [Strategy::Peel, Strategy::Tree] {
            let cfg = Config {
                strategy,
                max_leaves: 2,
                ..Config::default()
            };
            let mix = decompose_extremal(&p, &cfg).unwrap();
            assert!(!mix.complete);
            assert!(mix.len() <= 2);
            assert!((mix.weight_sum() - 1.0).abs() < 1e-12);
            assert!(mix.recombine(&cfg).unwrap().distance(&p, 1e-9) < 1e-9);
        }
    }

    #[test]
    fn merging_combines_duplicate_leaves() {
        let mut mix = ExtremalMixture::trivial(gen_sic_qubit::<f64>());
        mix.components[0].weight = 0.5;
        mix.components.push(mix.components[0].clone());
        let merged = merge_identical(mix, &Config::default());
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.components[0].weight, 1.0);
    }

    #[test]
    fn verify_trivial_and_perturbed() {
        let cfg = Config::default();
        let p = gen_random_povm::<f64>(3, 5, 2, 3).unwrap();
        let mix = ExtremalMixture::trivial(p.clone());
        let r = verify_barycenter(&p, &mix, 50, 1, &cfg).unwrap();
        assert!(r.max_expectation_residual < 1e-12);
        assert_eq!(r.max_effect_residual, 0.0);

        let mut bad = mix.clone();
        bad.components[0].weight = 1.0 + 1e-3;
        let r = verify_barycenter(&p, &bad, 50, 1, &cfg).unwrap();
        assert!((r.weight_sum_residual - 1e-3).abs() < 1e-12);
        let max_entry = p.effects().map(|e| e.max_abs()).fold(0.0, f64::max);
        assert!((r.max_effect_residual - 1e-3 * max_entry).abs() < 1e-12);
        assert!(r.max_expectation_residual > 0.0 && r.max_expectation_residual <= 1e-3 + 1e-12);
        assert!(!r.passes(1e-8));
    }

    #[test]
    fn verify_decomposition_of_random_d3() {
        let cfg = Config::default();
        let p = gen_random_povm::<f64>(3, 6, 3, 77).unwrap();
        let mix = decompose_extremal(&p, &cfg).unwrap();
        let r = verify_barycenter(&p, &mix, 200, 5, &cfg).unwrap();
        assert!(r.max_expectation_residual < 1e-9, "{r:?}");
        assert!(r.passes(1e-9));
    }

    #[test]
    fn single_precision_decomposition() {
        let cfg = Config::default();
        let p = gen_random_povm::<f32>(2, 5, 1, 4).unwrap();
        let mix = decompose_extremal(&p, &cfg).unwrap();
        assert!(mix.complete);
        assert!(mix.recombine(&cfg).unwrap().distance(&p, 1e-5) < 1e-4);
    }
}
