//! Outcome-space maps and POVM generators.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{pauli, pd_inv_sqrt, unitarity_defect, CMatrix, HermMatrix};
use crate::povm::{gaussian_complex, merge_labels, FinitePovm, Outcome, OutcomeLabel};
use crate::scalar::{lit, to_f64, Real};

/// Classical relabelling `φ`: outcome `i` of the source POVM is reported as
/// `targets[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PostProcessing<T: Real> {
    pub targets: Vec<OutcomeLabel<T>>,
}

impl<T: Real> PostProcessing<T> {
    pub fn new(targets: Vec<OutcomeLabel<T>>) -> Self {
        Self { targets }
    }

    /// Pairwise-distinct targets under `label_tol`.
    pub fn is_injective(&self, label_tol: T) -> bool {
        is_injective(self, label_tol)
    }
}

pub fn is_injective<T: Real>(phi: &PostProcessing<T>, label_tol: T) -> bool {
    let t = &phi.targets;
    (0..t.len()).all(|i| (i + 1..t.len()).all(|j| !t[i].matches(&t[j], label_tol)))
}

/// `φ̂(P)`: relabels outcome `i` as `φ(i)` and sums effects sharing a label.
pub fn apply_postprocessing<T: Real>(
    povm: &FinitePovm<T>,
    phi: &PostProcessing<T>,
    cfg: &Config,
) -> Result<FinitePovm<T>> {
    if phi.targets.len() != povm.len() {
        return Err(Error::PartialPostProcessing {
            expected: povm.len(),
            found: phi.targets.len(),
        });
    }
    let relabelled = povm
        .outcomes()
        .iter()
        .zip(&phi.targets)
        .map(|(o, t)| Outcome::new(t.clone(), o.effect.clone()))
        .collect();
    let p = FinitePovm::new(povm.dim(), relabelled)?;
    Ok(merge_labels(&p, cfg.label_tol()))
}

/// `{S^{-1/2} G_i S^{-1/2}}` with `S = Σ G_i`.
pub fn frame_normalize<T: Real>(effects: &[HermMatrix<T>]) -> Result<Vec<HermMatrix<T>>> {
    let dim = effects
        .first()
        .map(|e| e.dim())
        .ok_or_else(|| Error::InvalidArgument("no effects".into()))?;
    let mut total = HermMatrix::zeros(dim);
    for e in effects {
        total.axpy(T::one(), e);
    }
    let inv_sqrt = pd_inv_sqrt(&total, lit(1e-12))?;
    Ok(effects
        .iter()
        .map(|e| e.congruence(inv_sqrt.as_matrix()))
        .collect())
}

/// Rank-one projectors onto the columns of a unitary, labelled `0..d-1`.
pub fn gen_pvm<T: Real>(basis: &CMatrix<T>) -> Result<FinitePovm<T>> {
    if basis.nrows() != basis.ncols() {
        return Err(Error::NotSquare {
            rows: basis.nrows(),
            cols: basis.ncols(),
        });
    }
    let defect = unitarity_defect(basis);
    if defect > crate::scalar::scaled_tol(1e-10, 64.0) {
        return Err(Error::NotUnitary {
            deviation: to_f64(defect),
        });
    }
    let effects = basis
        .column_iter()
        .map(|c| HermMatrix::outer(&c.into_owned()))
        .collect();
    FinitePovm::from_effects(basis.nrows(), effects)
}

/// The computational-basis PVM.
pub fn gen_standard_pvm<T: Real>(dim: usize) -> FinitePovm<T> {
    gen_pvm(&CMatrix::identity(dim, dim)).expect("identity is unitary")
}

/// Qubit tetrahedron POVM `{(I + n_k . σ)/4}` with `n_k` the even-parity
/// vertices of the cube `(±1, ±1, ±1)/√3`.
pub fn gen_sic_qubit<T: Real>() -> FinitePovm<T> {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [[s, s, s], [-s, -s, s], [-s, s, -s], [s, -s, -s]];
    bloch_povm(0.25, &dirs)
}

/// Qubit trine `{(I + n_k . σ)/3}` with three unit vectors at 120° in the x-z plane.
pub fn gen_trine<T: Real>() -> FinitePovm<T> {
    let h = 3f64.sqrt() / 2.0;
    let dirs = [[0.0, 0.0, 1.0], [h, 0.0, -0.5], [-h, 0.0, -0.5]];
    bloch_povm(1.0 / 3.0, &dirs)
}

fn bloch_povm<T: Real>(weight: f64, dirs: &[[f64; 3]]) -> FinitePovm<T> {
    let effects = dirs
        .iter()
        .map(|n| pauli::bloch(lit(weight), n.map(lit)))
        .collect();
    FinitePovm::from_effects(2, effects).expect("qubit effects")
}

/// The four-outcome family
/// `(I + cos a σx ± sin a σy)/4`, `(I - cos a σx ± sin a σz)/4`,
/// extreme for `a ∈ (0, π/4]` and not extreme at `a = 0`.
pub fn gen_ea_family<T: Real>(a: T) -> FinitePovm<T> {
    let (c, s) = (a.cos(), a.sin());
    let q = lit::<T>(0.25);
    let o = T::zero();
    let effects = vec![
        pauli::bloch(q, [c, s, o]),
        pauli::bloch(q, [c, -s, o]),
        pauli::bloch(q, [-c, o, s]),
        pauli::bloch(q, [-c, o, -s]),
    ];
    FinitePovm::from_effects(2, effects).expect("qubit effects")
}

const MAX_FRAME_DRAWS: usize = 16;

/// `k` Wishart-type effects `A_i A_i^H` (`A_i` a `d x rank_cap` complex
/// Gaussian matrix) normalised by the frame operator. Deterministic per seed.
pub fn gen_random_povm<T: Real>(
    dim: usize,
    k: usize,
    rank_cap: usize,
    seed: u64,
) -> Result<FinitePovm<T>> {
    if dim == 0 || k == 0 {
        return Err(Error::InvalidArgument("need d >= 1 and k >= 1".into()));
    }
    if rank_cap == 0 || rank_cap > dim {
        return Err(Error::InvalidArgument(format!(
            "rank_cap must lie in 1..={dim}, got {rank_cap}"
        )));
    }
    if k * rank_cap < dim {
        return Err(Error::InvalidArgument(format!(
            "{k} effects of rank <= {rank_cap} cannot sum to the identity in dimension {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_FRAME_DRAWS {
        let raw: Vec<HermMatrix<T>> = (0..k)
            .map(|_| {
                let a = CMatrix::from_fn(dim, rank_cap, |_, _| gaussian_complex(&mut rng));
                HermMatrix::hermitize_unchecked(&a * a.adjoint())
            })
            .collect();
        if let Ok(effects) = frame_normalize(&raw) {
            return FinitePovm::from_effects(dim, effects);
        }
    }
    Err(Error::SingularFrame(MAX_FRAME_DRAWS))
}

/// Qubit POVM with outcomes on the Bloch sphere: raw effects
/// `(2/n)|n_j><n_j| = (I + n_j . σ)/n`, frame-normalised, labelled by the unit
/// vectors `n_j`.
pub fn covariant_from_directions<T: Real>(dirs: &[[f64; 3]]) -> Result<FinitePovm<T>> {
    if dirs.is_empty() {
        return Err(Error::InvalidArgument("no directions".into()));
    }
    let n = dirs.len() as f64;
    let mut labels = Vec::with_capacity(dirs.len());
    let mut raw = Vec::with_capacity(dirs.len());
    for d in dirs {
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("directions must be non-zero".into()));
        }
        let unit = d.map(|x| x / norm);
        raw.push(pauli::bloch(lit(1.0 / n), unit.map(lit)));
        labels.push(OutcomeLabel::Point(unit.iter().map(|&x| lit(x)).collect()));
    }
    let effects = frame_normalize(&raw)?;
    let outcomes = labels
        .into_iter()
        .zip(effects)
        .map(|(l, e)| Outcome::new(l, e))
        .collect();
    FinitePovm::new(2, outcomes)
}

/// `n` near-uniform directions: a Fibonacci lattice rotated by a
/// seed-dependent uniformly random rotation.
pub fn fibonacci_sphere(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = random_rotation(&mut rng);
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|j| {
            let z = 1.0 - (2.0 * j as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * j as f64;
            let p = [r * phi.cos(), r * phi.sin(), z];
            [0, 1, 2].map(|i| rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2])
        })
        .collect()
}

// Shoemake's uniform unit quaternion.
fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Desk-scale discretisation of the covariant spin-direction measurement.
pub fn gen_covariant_sphere<T: Real>(n_points: usize, seed: u64) -> Result<FinitePovm<T>> {
    if n_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "covariant sphere needs at least 4 points, got {n_points}"
        )));
    }
    covariant_from_directions(&fibonacci_sphere(n_points, seed))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    let g = CMatrix::<T>::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let m = nalgebra::ComplexField::modulus(d);
        if m > T::zero() {
            let phase = d / nalgebra::Complex::new(m, T::zero());
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}
