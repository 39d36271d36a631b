//! Extremality of finite-outcome POVMs.
//!
//! With `H_i` the range of `P_i`, a POVM is extreme iff
//! `T_P(⊕ A_i) = Σ_i √P_i A_i √P_i`, mapping `⊕_i B(H_i)` into `M_d`, is
//! injective. On `H_i` we use the factor `S_i = √P_i V_i = V_i √Λ_i`, so the
//! column of `T_P` for block `i` and matrix unit `E_jk` is `vec(s_j s_k^H)`,
//! where `s_j` is the `j`-th column of `S_i`.

use nalgebra::Complex;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, null_space, null_space_below, range_isometry, CMatrix, CVector, HermMatrix,
    Range,
};
use crate::povm::{prune, prune_and_merge, FinitePovm, OutcomeLabel};
use crate::scalar::{cplx, lit, Real};

/// One outcome's contribution to `T_P`.
#[derive(Clone, Debug)]
pub struct TpBlock<T: Real> {
    pub label: OutcomeLabel<T>,
    pub range: Range<T>,
    /// `S_i = V_i √Λ_i`, `d x r_i`.
    pub factor: CMatrix<T>,
}

impl<T: Real> TpBlock<T> {
    pub fn rank(&self) -> usize {
        self.range.rank()
    }
}

/// Matrix of `T_P`: `d²` rows, `Σ r_i²` columns.
#[derive(Clone, Debug)]
pub struct TpMap<T: Real> {
    dim: usize,
    blocks: Vec<TpBlock<T>>,
    matrix: CMatrix<T>,
}

impl<T: Real> TpMap<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[TpBlock<T>] {
        &self.blocks
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.blocks.iter().map(TpBlock::rank).collect()
    }

    /// `Σ r_i²`.
    pub fn domain_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.rank() * b.rank()).sum()
    }

    /// `Σ_i S_i D_i S_i^H`.
    pub fn apply(&self, direction: &BlockHermitian<T>) -> Result<HermMatrix<T>> {
        if direction.blocks.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.blocks.len(),
                found: direction.blocks.len(),
            });
        }
        let mut acc = HermMatrix::zeros(self.dim);
        for (b, d) in self.blocks.iter().zip(&direction.blocks) {
            if d.dim() != b.rank() {
                return Err(Error::DimensionMismatch {
                    expected: b.rank(),
                    found: d.dim(),
                });
            }
            if b.rank() > 0 {
                acc.axpy(T::one(), &d.congruence(&b.factor));
            }
        }
        Ok(acc)
    }

    /// The identity block on every `H_i`; `T_P` maps it to `Σ P_i`.
    pub fn identity_blocks(&self) -> BlockHermitian<T> {
        BlockHermitian {
            blocks: self
                .blocks
                .iter()
                .map(|b| HermMatrix::identity(b.rank()))
                .collect(),
        }
    }

    /// Reshapes a domain vector into per-outcome blocks; `v` may be shorter
    /// than the domain, in which case trailing blocks are zero.
    fn unvec(&self, v: &CVector<T>) -> Vec<CMatrix<T>> {
        let mut offset = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = b.rank();
                let m = CMatrix::from_fn(r, r, |j, k| {
                    let idx = offset + j * r + k;
                    if idx < v.len() {
                        v[idx]
                    } else {
                        Complex::new(T::zero(), T::zero())
                    }
                });
                offset += r * r;
                m
            })
            .collect()
    }
}

pub fn build_tp_map<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<TpMap<T>> {
    povm.ensure_valid(cfg)?;
    tp_map_unchecked(povm, cfg)
}

pub(crate) fn tp_map_unchecked<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<TpMap<T>> {
    let d = povm.dim();
    let rank_tol = cfg.rank_tol::<T>();
    let blocks = povm
        .outcomes()
        .iter()
        .map(|o| {
            let range = range_isometry(&o.effect, rank_tol)?;
            let factor = range.sqrt_factor();
            Ok(TpBlock {
                label: o.label.clone(),
                range,
                factor,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cols: usize = blocks.iter().map(|b| b.rank() * b.rank()).sum();
    let mut matrix = CMatrix::zeros(d * d, cols);
    let mut c = 0;
    for b in &blocks {
        let s = &b.factor;
        for j in 0..b.rank() {
            for k in 0..b.rank() {
                for col in 0..d {
                    let right = s[(col, k)].conj();
                    for row in 0..d {
                        matrix[(row + d * col, c)] = s[(row, j)] * right;
                    }
                }
                c += 1;
            }
        }
    }
    Ok(TpMap {
        dim: d,
        blocks,
        matrix,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalityVerdict<T: Real> {
    pub is_extreme: bool,
    /// Smallest singular value of `T_P`; zero when the domain exceeds `d²`.
    pub margin: T,
    /// Singular values at or below this count as zero.
    pub threshold: T,
    /// Exact numerical kernel dimension, or the lower bound `Σ r_i² - d²`
    /// when the SVD was skipped because the domain exceeds `d²`.
    pub kernel_dim: usize,
    pub domain_dim: usize,
    pub ranks: Vec<usize>,
}

/// Pruned POVM together with its `T_P` and verdict.
#[derive(Clone, Debug)]
pub struct Analysis<T: Real> {
    pub povm: FinitePovm<T>,
    pub map: TpMap<T>,
    pub verdict: ExtremalityVerdict<T>,
}

/// Prunes, builds `T_P` and decides injectivity. Does not validate.
pub fn analyze<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<Analysis<T>> {
    analyze_pruned(prune_and_merge(povm, cfg.prune_tol(), cfg.label_tol()), cfg)
}

/// [`analyze`] for a POVM whose labels are already pairwise distinct.
pub(crate) fn analyze_distinct<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<Analysis<T>> {
    analyze_pruned(prune(povm, cfg.prune_tol()), cfg)
}

fn analyze_pruned<T: Real>(pruned: FinitePovm<T>, cfg: &Config) -> Result<Analysis<T>> {
    let map = tp_map_unchecked(&pruned, cfg)?;
    let d2 = map.dim * map.dim;
    let domain_dim = map.domain_dim();
    let ranks = map.ranks();
    let verdict = if domain_dim > d2 {
        ExtremalityVerdict {
            is_extreme: false,
            margin: T::zero(),
            threshold: T::zero(),
            kernel_dim: domain_dim - d2,
            domain_dim,
            ranks,
        }
    } else {
        let ns = null_space(map.matrix(), cfg.margin_factor())?;
        ExtremalityVerdict {
            is_extreme: ns.basis.is_empty(),
            margin: ns.sigma_min(),
            threshold: ns.threshold,
            kernel_dim: ns.basis.len(),
            domain_dim,
            ranks,
        }
    };
    Ok(Analysis {
        povm: pruned,
        map,
        verdict,
    })
}

pub fn is_extreme<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> Result<ExtremalityVerdict<T>> {
    povm.ensure_valid(cfg)?;
    Ok(analyze(povm, cfg)?.verdict)
}

/// Element of `⊕_i B(H_i)`, one Hermitian `r_i x r_i` block per outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockHermitian<T: Real> {
    pub blocks: Vec<HermMatrix<T>>,
}

impl<T: Real> BlockHermitian<T> {
    /// Smallest and largest eigenvalue over all blocks.
    pub fn spectrum_bounds(&self) -> Result<(T, T)> {
        let mut lo = T::zero();
        let mut hi = T::zero();
        let mut seen = false;
        for b in self.blocks.iter().filter(|b| b.dim() > 0) {
            let e = eig_hermitian(b)?;
            if !seen {
                lo = e.min();
                hi = e.max();
                seen = true;
            } else {
                lo = lo.min(e.min());
                hi = hi.max(e.max());
            }
        }
        Ok((lo, hi))
    }

    pub fn frobenius(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc + b.frobenius() * b.frobenius())
            .sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b.scale(s)).collect(),
        }
    }
}

/// Below this Frobenius norm (of a unit kernel vector) the Hermitian part is
/// passed over for the anti-Hermitian one. One of the two always has norm at
/// least `1/√2`.
const HERMITIAN_PART_MIN: f64 = 0.5;

/// A non-zero Hermitian element of `ker T_P`, scaled to unit spectral radius.
///
/// When `Σ r_i² > d²` the kernel is taken from the shortest prefix of blocks
/// whose domain already exceeds `d²`, which bounds the SVD at `2d²` columns;
/// the remaining blocks of the result are zero.
pub fn hermitian_kernel_element<T: Real>(
    map: &TpMap<T>,
    cfg: &Config,
) -> Result<BlockHermitian<T>> {
    let d2 = map.dim * map.dim;
    let mut cols = map.domain_dim();
    if cols > d2 {
        let mut acc = 0;
        for b in &map.blocks {
            acc += b.rank() * b.rank();
            if acc > d2 {
                break;
            }
        }
        cols = acc;
    }
    let sub = map.matrix.columns(0, cols).into_owned();
    let ns = null_space(&sub, cfg.margin_factor())?;
    let v = ns.basis.first().ok_or(Error::KernelEmpty)?;
    hermitian_from_kernel_vector(map, v, cfg)
}

/// Kernel vector of `T_P` given that every block but the last spans an
/// injective part: with `T_P = [A | B]` and `A = QR`, a null vector `y` of
/// `(I - QQ^H) B` extends to `(-R^{-1} Q^H B y, y)`. `None` means `T_P` is
/// injective.
pub(crate) fn appended_block_kernel<T: Real>(
    map: &TpMap<T>,
    cfg: &Config,
) -> Result<Option<CVector<T>>> {
    let Some(last) = map.blocks.last() else {
        return Ok(None);
    };
    let d2 = map.dim * map.dim;
    let cols = map.domain_dim();
    let r2 = last.rank() * last.rank();
    let c = cols - r2;
    if c > d2 {
        return Err(Error::InvalidArgument(
            "leading blocks cannot be injective".into(),
        ));
    }
    let threshold = cfg.margin_factor::<T>() * map.matrix.norm() * lit(d2.max(cols) as f64);
    let b = map.matrix.columns(c, r2).into_owned();
    if c == 0 {
        let ns = null_space_below(&b, threshold)?;
        return Ok(ns.basis.into_iter().next());
    }
    let qr = map.matrix.columns(0, c).into_owned().qr();
    let (q, r) = (qr.q(), qr.r());
    let coef = q.adjoint() * &b;
    let ns = null_space_below(&(&b - &q * &coef), threshold)?;
    let Some(y) = ns.basis.into_iter().next() else {
        return Ok(None);
    };
    let x = r
        .solve_upper_triangular(&(&coef * &y))
        .ok_or(Error::SvdFailed)?;
    let mut v = CVector::zeros(cols);
    v.rows_mut(0, c).copy_from(&(-x));
    v.rows_mut(c, r2).copy_from(&y);
    Ok(Some(v))
}

/// Hermitian (or anti-Hermitian) part of the block operator `unvec(v)`,
/// scaled to spectral radius one. `v` may cover a prefix of the blocks.
pub(crate) fn hermitian_from_kernel_vector<T: Real>(
    map: &TpMap<T>,
    v: &CVector<T>,
    cfg: &Config,
) -> Result<BlockHermitian<T>> {
    let raw = map.unvec(v);
    let half = lit::<T>(0.5);
    let herm: Vec<CMatrix<T>> = raw
        .iter()
        .map(|m| (m + m.adjoint()) * cplx(half, T::zero()))
        .collect();
    // (D - D^H) / 2i
    let anti: Vec<CMatrix<T>> = raw
        .iter()
        .map(|m| (m - m.adjoint()) * cplx(T::zero(), -half))
        .collect();
    let norm = |ms: &[CMatrix<T>]| {
        ms.iter()
            .fold(T::zero(), |a, m| a + m.norm_squared())
            .sqrt()
    };
    let (hn, an) = (norm(&herm), norm(&anti));
    let total = v.norm();
    let chosen = if hn >= lit::<T>(HERMITIAN_PART_MIN) * total {
        herm
    } else {
        anti
    };
    if hn.max(an) <= cfg.rank_tol::<T>() * total {
        return Err(Error::DegenerateKernelElement);
    }
    let element = BlockHermitian {
        blocks: chosen
            .into_iter()
            .map(HermMatrix::hermitize_unchecked)
            .collect(),
    };
    let (lo, hi) = element.spectrum_bounds()?;
    let radius = lo.abs().max(hi.abs());
    if !(radius > T::zero()) {
        return Err(Error::DegenerateKernelElement);
    }
    Ok(element.scale(T::one() / radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcomes::{
        gen_ea_family, gen_random_povm, gen_sic_qubit, gen_standard_pvm, gen_trine,
    };
    use crate::povm::{convex_combine, Outcome};

    fn halves() -> FinitePovm<f64> {
        let h = HermMatrix::identity(2).scale(0.5);
        FinitePovm::from_effects(2, vec![h.clone(), h]).unwrap()
    }

    fn rank(m: &CMatrix<f64>) -> usize {
        let ns = null_space(m, 1e-10).unwrap();
        m.ncols() - ns.basis.len()
    }

    #[test]
    fn tp_map_examples() {
        let cfg = Config::default();
        for d in 1..4 {
            let map = build_tp_map(&FinitePovm::trivial(d, OutcomeLabel::Index(0)), &cfg).unwrap();
            assert_eq!(map.matrix().shape(), (d * d, d * d));
            assert_eq!(rank(map.matrix()), d * d);
        }

        let map = build_tp_map(&gen_standard_pvm::<f64>(2), &cfg).unwrap();
        assert_eq!(map.ranks(), vec![1, 1]);
        assert_eq!(map.matrix().shape(), (4, 2));
        assert_eq!(rank(map.matrix()), 2);

        let map = build_tp_map(&halves(), &cfg).unwrap();
        assert_eq!(map.ranks(), vec![2, 2]);
        assert_eq!(map.matrix().shape(), (4, 8));
        assert_eq!(rank(map.matrix()), 4);
        assert_eq!(null_space(map.matrix(), 1e-10).unwrap().basis.len(), 4);
    }

    #[test]
    fn tp_map_sends_identity_blocks_to_identity() {
        let cfg = Config::default();
        for seed in 0..10 {
            let p = gen_random_povm::<f64>(3, 4, 2, seed).unwrap();
            let map = build_tp_map(&p, &cfg).unwrap();
            let image = map.apply(&map.identity_blocks()).unwrap();
            assert!(image.sub(&HermMatrix::identity(3)).max_abs() < 1e-9);

            // the assembled matrix agrees with `apply`
            let mut v = CVector::zeros(map.domain_dim());
            let mut off = 0;
            for r in map.ranks() {
                for j in 0..r {
                    v[off + j * r + j] = cplx(1.0, 0.0);
                }
                off += r * r;
            }
            let vec_image = map.matrix() * v;
            let id = CMatrix::<f64>::identity(3, 3);
            for c in 0..3 {
                for r in 0..3 {
                    assert!((vec_image[r + 3 * c] - id[(r, c)]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn verdict_examples() {
        let cfg = Config::default();
        let v = is_extreme(&gen_ea_family(std::f64::consts::FRAC_PI_4), &cfg).unwrap();
        assert!(v.is_extreme);
        assert!(v.margin > v.threshold);

        let v = is_extreme(&gen_ea_family(0.0f64), &cfg).unwrap();
        assert!(!v.is_extreme);
        assert_eq!(v.kernel_dim, 2);

        let v = is_extreme(&halves(), &cfg).unwrap();
        assert!(!v.is_extreme);
        assert_eq!(v.kernel_dim, 4);
        assert_eq!(v.domain_dim, 8);

        let v = is_extreme(&gen_trine::<f64>(), &cfg).unwrap();
        assert!(v.is_extreme);
        assert_eq!(v.domain_dim, 3);
        assert!(
            is_extreme(&gen_sic_qubit::<f64>(), &cfg)
                .unwrap()
                .is_extreme
        );
    }

    #[test]
    fn verdict_rejects_invalid_input() {
        let cfg = Config::default();
        let bad =
            FinitePovm::from_effects(2, vec![HermMatrix::<f64>::identity(2).scale(0.5)]).unwrap();
        assert!(matches!(is_extreme(&bad, &cfg), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn zero_effects_are_pruned_before_analysis() {
        let cfg = Config::default();
        let p = FinitePovm::from_effects(
            2,
            vec![HermMatrix::<f64>::identity(2), HermMatrix::zeros(2)],
        )
        .unwrap();
        let v = is_extreme(&p, &cfg).unwrap();
        assert!(v.is_extreme);
        assert_eq!(v.ranks, vec![2]);
    }

    #[test]
    fn kernel_element_of_halves() {
        let cfg = Config::default();
        let map = build_tp_map(&halves(), &cfg).unwrap();
        let d = hermitian_kernel_element(&map, &cfg).unwrap();
        assert!(map.apply(&d).unwrap().max_abs() < 1e-9);
        // the kernel of (A, B) -> (A + B)/2 is {A ⊕ -A}
        assert!(d.blocks[0].add(&d.blocks[1]).max_abs() < 1e-9);
        let (lo, hi) = d.spectrum_bounds().unwrap();
        assert!((lo.abs().max(hi.abs()) - 1.0).abs() < 1e-12);
        assert!(lo < 0.0 && hi > 0.0);
    }

    #[test]
    fn kernel_element_requires_kernel() {
        let cfg = Config::default();
        let map = build_tp_map(&gen_sic_qubit::<f64>(), &cfg).unwrap();
        assert!(matches!(
            hermitian_kernel_element(&map, &cfg),
            Err(Error::KernelEmpty)
        ));
    }

    #[test]
    fn kernel_elements_have_two_sided_spectrum() {
        let cfg = Config::default();
        for seed in 0..40 {
            let d = 2 + (seed as usize % 3);
            let a = gen_random_povm::<f64>(d, d + 1, 1 + seed as usize % d, seed).unwrap();
            let b = gen_random_povm::<f64>(d, d + 1, 1, seed + 1000).unwrap();
            let p = convex_combine(&[(0.4, &a), (0.6, &b)], &cfg).unwrap();
            let analysis = analyze(&p, &cfg).unwrap();
            if analysis.verdict.is_extreme {
                continue;
            }
            let el = hermitian_kernel_element(&analysis.map, &cfg).unwrap();
            assert!(analysis.map.apply(&el).unwrap().max_abs() < 1e-9);
            let (lo, hi) = el.spectrum_bounds().unwrap();
            assert!(lo < -1e-9 && hi > 1e-9, "seed {seed}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn appended_block_kernel_matches_full_svd() {
        let cfg = Config::default();
        let mut checked = [0usize; 2];
        for seed in 0..60u64 {
            let d = 2 + (seed as usize % 3);
            let base = gen_random_povm::<f64>(d, d, 1 + seed as usize % d, seed).unwrap();
            if !analyze(&base, &cfg).unwrap().verdict.is_extreme {
                continue;
            }
            let extra = gen_random_povm::<f64>(d, d, 1 + seed as usize % d, seed + 500).unwrap();
            let mut outcomes = base.into_outcomes();
            outcomes.push(Outcome::new(OutcomeLabel::Index(99), extra.outcomes()[0].effect.clone()));
            let map = tp_map_unchecked(&FinitePovm::new(d, outcomes).unwrap(), &cfg).unwrap();
            let full = null_space(map.matrix(), 1e-10).unwrap();
            let fast = appended_block_kernel(&map, &cfg).unwrap();
            assert_eq!(fast.is_some(), !full.basis.is_empty(), "seed {seed}");
            if let Some(v) = &fast {
                assert!((map.matrix() * v).norm() < 1e-9 * v.norm());
            }
            checked[fast.is_some() as usize] += 1;
        }
        assert!(checked[0] > 0 && checked[1] > 0, "{checked:?}");
    }

    #[test]
    fn single_precision_verdicts() {
        let cfg = Config::default();
        assert!(
            is_extreme(&gen_sic_qubit::<f32>(), &cfg)
                .unwrap()
                .is_extreme
        );
        assert!(!is_extreme(&gen_ea_family(0.0f32), &cfg).unwrap().is_extreme);
        assert!(is_extreme(&gen_ea_family(0.3f32), &cfg).unwrap().is_extreme);
    }
}
