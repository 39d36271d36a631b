//! Finite-outcome POVMs, quantum states and the operations that only need the
//! effects themselves: validation, Born probabilities, expectation operators,
//! trace densities, convex combination and label normalisation.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix, CVector, HermMatrix};
use crate::scalar::{cplx, lit, scaled_tol, to_f64, Real};

/// A point of the outcome space: an abstract index or a point of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum OutcomeLabel<T: Real> {
    Index(u64),
    Point(Vec<T>),
}

impl<T: Real> OutcomeLabel<T> {
    /// Exact for indices, Euclidean distance `<= tol` for points.
    pub fn matches(&self, other: &Self, tol: T) -> bool {
        match (self, other) {
            (Self::Index(a), Self::Index(b)) => a == b,
            (Self::Point(a), Self::Point(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
                        .sqrt()
                        <= tol
            }
            _ => false,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Self::Index(_) => true,
            Self::Point(p) => p.iter().all(|x| x.is_finite()),
        }
    }
}

impl<T: Real> fmt::Display for OutcomeLabel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Index(i) => write!(f, "{i}"),
            Self::Point(p) => {
                write!(f, "[")?;
                for (k, x) in p.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Ordered set of labels under tolerant equality. Insertion order is kept.
#[derive(Clone, Debug, Default)]
pub struct LabelSet<T: Real> {
    labels: Vec<OutcomeLabel<T>>,
}

impl<T: Real> LabelSet<T> {
    pub fn new() -> Self {
        Self { labels: Vec::new() }
    }

    pub fn position(&self, label: &OutcomeLabel<T>, tol: T) -> Option<usize> {
        self.labels.iter().position(|l| l.matches(label, tol))
    }

    /// Index of `label`, inserting it if absent.
    pub fn intern(&mut self, label: &OutcomeLabel<T>, tol: T) -> usize {
        match self.position(label, tol) {
            Some(i) => i,
            None => {
                self.labels.push(label.clone());
                self.labels.len() - 1
            }
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[OutcomeLabel<T>] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<OutcomeLabel<T>> {
        self.labels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<T: Real> {
    pub label: OutcomeLabel<T>,
    pub effect: HermMatrix<T>,
}

impl<T: Real> Outcome<T> {
    pub fn new(label: OutcomeLabel<T>, effect: HermMatrix<T>) -> Self {
        Self { label, effect }
    }
}

/// Ordered list of labelled effects on `C^dim`.
///
/// Construction only checks shapes; positivity, normalisation and label
/// distinctness are reported by [`FinitePovm::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePovm<T: Real> {
    dim: usize,
    outcomes: Vec<Outcome<T>>,
}

impl<T: Real> FinitePovm<T> {
    pub fn new(dim: usize, outcomes: Vec<Outcome<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        for o in &outcomes {
            if o.effect.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: o.effect.dim(),
                });
            }
            if !o.label.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite label {}",
                    o.label
                )));
            }
        }
        Ok(Self { dim, outcomes })
    }

    /// Effects labelled `0..k-1`.
    pub fn from_effects(dim: usize, effects: Vec<HermMatrix<T>>) -> Result<Self> {
        let outcomes = effects
            .into_iter()
            .enumerate()
            .map(|(i, e)| Outcome::new(OutcomeLabel::Index(i as u64), e))
            .collect();
        Self::new(dim, outcomes)
    }

    /// The one-outcome POVM `{I}`.
    pub fn trivial(dim: usize, label: OutcomeLabel<T>) -> Self {
        Self {
            dim,
            outcomes: vec![Outcome::new(label, HermMatrix::identity(dim))],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome<T>] {
        &self.outcomes
    }

    pub fn into_outcomes(self) -> Vec<Outcome<T>> {
        self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn effects(&self) -> impl Iterator<Item = &HermMatrix<T>> {
        self.outcomes.iter().map(|o| &o.effect)
    }

    pub fn labels(&self) -> impl Iterator<Item = &OutcomeLabel<T>> {
        self.outcomes.iter().map(|o| &o.label)
    }

    /// Effect at `label`, if present.
    pub fn effect_at(&self, label: &OutcomeLabel<T>, tol: T) -> Option<&HermMatrix<T>> {
        self.outcomes
            .iter()
            .find(|o| o.label.matches(label, tol))
            .map(|o| &o.effect)
    }

    /// `Σ effects`.
    pub fn total(&self) -> HermMatrix<T> {
        let mut acc = HermMatrix::zeros(self.dim);
        for e in self.effects() {
            acc.axpy(T::one(), e);
        }
        acc
    }

    /// `|Σ effects - I|_max`.
    pub fn normalization_residual(&self) -> T {
        self.total().sub(&HermMatrix::identity(self.dim)).max_abs()
    }

    /// `{U P_i U^H}`.
    pub fn conjugate(&self, u: &CMatrix<T>) -> Result<Self> {
        if u.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.nrows(),
            });
        }
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| Outcome::new(o.label.clone(), o.effect.congruence(u)))
            .collect();
        Ok(Self {
            dim: self.dim,
            outcomes,
        })
    }

    pub fn validate(&self, cfg: &Config) -> ValidationReport {
        validate_povm(self, cfg)
    }

    pub fn ensure_valid(&self, cfg: &Config) -> Result<()> {
        let report = self.validate(cfg);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidPovm(report))
        }
    }

    /// Largest entrywise difference after aligning labels; missing labels
    /// count as zero effects.
    pub fn distance(&self, other: &Self, label_tol: T) -> T {
        let mut labels = LabelSet::new();
        for l in self.labels().chain(other.labels()) {
            labels.intern(l, label_tol);
        }
        let zero = HermMatrix::zeros(self.dim);
        labels
            .labels()
            .iter()
            .map(|l| {
                let a = self.effect_at(l, label_tol).unwrap_or(&zero);
                let b = other.effect_at(l, label_tol).unwrap_or(&zero);
                a.sub(b).max_abs()
            })
            .fold(T::zero(), |acc, x| acc.max(x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotPsd {
        index: usize,
        label: String,
        min_eigenvalue: f64,
    },
    Normalization {
        residual: f64,
    },
    DuplicateLabel {
        first: usize,
        second: usize,
        label: String,
    },
    Numerical {
        index: usize,
        message: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotPsd {
                index,
                label,
                min_eigenvalue,
            } => write!(
                f,
                "effect {index} (label {label}) is not PSD: min eigenvalue {min_eigenvalue:e}"
            ),
            Self::Normalization { residual } => {
                write!(f, "effects sum to identity only up to {residual:e}")
            }
            Self::DuplicateLabel {
                first,
                second,
                label,
            } => write!(f, "outcomes {first} and {second} share label {label}"),
            Self::Numerical { index, message } => write!(f, "effect {index}: {message}"),
        }
    }
}

/// Empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub normalization_residual: f64,
    pub min_eigenvalue: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks positivity of each effect, `Σ effects = I` and label distinctness.
pub fn validate_povm<T: Real>(povm: &FinitePovm<T>, cfg: &Config) -> ValidationReport {
    let psd_tol: T = cfg.psd_tol();
    let label_tol: T = cfg.label_tol();
    let mut report = ValidationReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };

    for (i, o) in povm.outcomes.iter().enumerate() {
        match eig_hermitian(&o.effect) {
            Ok(decomp) => {
                report.min_eigenvalue = report.min_eigenvalue.min(to_f64(decomp.min()));
                let floor = -psd_tol * (T::one() + decomp.spectral_radius());
                if decomp.min() < floor {
                    report.violations.push(Violation::NotPsd {
                        index: i,
                        label: o.label.to_string(),
                        min_eigenvalue: to_f64(decomp.min()),
                    });
                }
            }
            Err(e) => report.violations.push(Violation::Numerical {
                index: i,
                message: e.to_string(),
            }),
        }
    }

    let residual = povm.normalization_residual();
    report.normalization_residual = to_f64(residual);
    if !(residual <= cfg.normalization_tol::<T>()) {
        report.violations.push(Violation::Normalization {
            residual: to_f64(residual),
        });
    }

    for i in 0..povm.outcomes.len() {
        for j in i + 1..povm.outcomes.len() {
            if povm.outcomes[i]
                .label
                .matches(&povm.outcomes[j].label, label_tol)
            {
                report.violations.push(Violation::DuplicateLabel {
                    first: i,
                    second: j,
                    label: povm.outcomes[i].label.to_string(),
                });
            }
        }
    }
    report
}

/// PSD, unit-trace `dim x dim` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState<T: Real> {
    matrix: HermMatrix<T>,
}

impl<T: Real> DensityState<T> {
    pub fn new(matrix: HermMatrix<T>) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - T::one()).abs() > scaled_tol::<T>(1e-12, 64.0) {
            return Err(Error::InvalidState(format!(
                "trace is {} instead of 1",
                to_f64(tr)
            )));
        }
        let decomp = eig_hermitian(&matrix)?;
        if decomp.min() < -scaled_tol::<T>(1e-12, 64.0) {
            return Err(Error::InvalidState(format!(
                "min eigenvalue {:e} is negative",
                to_f64(decomp.min())
            )));
        }
        Ok(Self { matrix })
    }

    /// `|ψ><ψ| / <ψ|ψ>`.
    pub fn pure(psi: &CVector<T>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidState(
                "zero or non-finite state vector".into(),
            ));
        }
        let unit = psi.map(|z| z / cplx(norm, T::zero()));
        Ok(Self {
            matrix: HermMatrix::outer(&unit),
        })
    }

    /// Basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} >= dim {dim}"
            )));
        }
        let mut psi = CVector::zeros(dim);
        psi[k] = cplx(T::one(), T::zero());
        Self::pure(&psi)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: HermMatrix::identity(dim).scale(T::one() / lit(dim as f64)),
        }
    }

    /// Haar-random pure state (normalised complex Gaussian vector).
    pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let psi = CVector::from_fn(dim, |_, _| gaussian_complex(rng));
            if let Ok(s) = Self::pure(&psi) {
                return s;
            }
        }
    }

    /// Hilbert-Schmidt random mixed state `G G^H / tr(G G^H)`.
    pub fn random_mixed<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
        let m = HermMatrix::hermitize_unchecked(&g * g.adjoint());
        let tr = m.trace();
        Self {
            matrix: m.scale(T::one() / tr),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermMatrix<T> {
        &self.matrix
    }

    /// `tr(ρ M)`.
    pub fn expect(&self, m: &HermMatrix<T>) -> T {
        self.matrix.trace_product(m)
    }
}

pub(crate) fn gaussian_complex<T: Real, R: Rng + ?Sized>(rng: &mut R) -> nalgebra::Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cplx(lit(re), lit(im))
}

fn check_dims<T: Real>(povm: &FinitePovm<T>, state: &DensityState<T>) -> Result<()> {
    if povm.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: state.dim(),
        });
    }
    Ok(())
}

/// `p_i = tr(ρ P_i)`; rounding negatives down to `-1e-12` are clamped to zero.
pub fn born_probabilities<T: Real>(
    povm: &FinitePovm<T>,
    state: &DensityState<T>,
) -> Result<Vec<T>> {
    check_dims(povm, state)?;
    let clamp = scaled_tol::<T>(1e-12, 64.0);
    povm.effects()
        .map(|e| {
            let p = state.expect(e);
            if p >= T::zero() {
                Ok(p)
            } else if p >= -clamp {
                Ok(T::zero())
            } else {
                Err(Error::NegativeProbability(to_f64(p)))
            }
        })
        .collect()
}

/// `E(f) = Σ_i f(y_i) P_i`.
pub fn expectation_operator<T: Real>(
    povm: &FinitePovm<T>,
    f: impl Fn(&OutcomeLabel<T>) -> Option<T>,
) -> Result<HermMatrix<T>> {
    let mut acc = HermMatrix::zeros(povm.dim());
    for o in povm.outcomes() {
        let v = f(&o.label).ok_or_else(|| Error::UndefinedLabel(o.label.to_string()))?;
        acc.axpy(v, &o.effect);
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct DensityEntry<T: Real> {
    pub label: OutcomeLabel<T>,
    /// `μ_i = tr P_i`, recorded as zero for negligible effects.
    pub weight: T,
    /// `P_i / μ_i`; absent when `μ_i` is negligible.
    pub density: Option<HermMatrix<T>>,
}

/// The trace measure `μ` of a POVM and its unit-trace operator density.
#[derive(Clone, Debug)]
pub struct TraceDensity<T: Real> {
    pub dim: usize,
    pub entries: Vec<DensityEntry<T>>,
}

impl<T: Real> TraceDensity<T> {
    /// `Σ μ_i`, which equals the dimension.
    pub fn total_weight(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, e| acc + e.weight)
    }

    /// `Σ μ_i D_i`.
    pub fn reconstruct_total(&self) -> HermMatrix<T> {
        let mut acc = HermMatrix::zeros(self.dim);
        for e in &self.entries {
            if let Some(d) = &e.density {
                acc.axpy(e.weight, d);
            }
        }
        acc
    }

    /// Largest `|tr D_i - 1|` over the present densities.
    pub fn max_trace_residual(&self) -> T {
        self.entries
            .iter()
            .filter_map(|e| e.density.as_ref())
            .map(|d| (d.trace() - T::one()).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

pub fn trace_density<T: Real>(povm: &FinitePovm<T>) -> TraceDensity<T> {
    let cutoff = scaled_tol::<T>(1e-12, 64.0);
    let entries = povm
        .outcomes()
        .iter()
        .map(|o| {
            let mu = o.effect.trace();
            if mu > cutoff {
                let mut density = o.effect.scale(T::one() / mu);
                // pin the diagonal so the trace is 1 up to a single rounding
                let drift = density.trace() - T::one();
                if drift != T::zero() {
                    let d = lit::<T>(povm.dim() as f64);
                    density.axpy(-drift / d, &HermMatrix::identity(povm.dim()));
                }
                DensityEntry {
                    label: o.label.clone(),
                    weight: mu,
                    density: Some(density),
                }
            } else {
                DensityEntry {
                    label: o.label.clone(),
                    weight: T::zero(),
                    density: None,
                }
            }
        })
        .collect();
    TraceDensity {
        dim: povm.dim(),
        entries,
    }
}

/// `Σ_k w_k P_k` over the union of label sets; an absent label is a zero effect.
pub fn convex_combine<T: Real>(
    components: &[(T, &FinitePovm<T>)],
    cfg: &Config,
) -> Result<FinitePovm<T>> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidWeights("no components".into()))?;
    let dim = first.1.dim();
    let mut total = T::zero();
    for (w, p) in components {
        if !(*w >= T::zero()) {
            return Err(Error::InvalidWeights(format!(
                "negative weight {}",
                to_f64(*w)
            )));
        }
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        total += *w;
    }
    let weight_tol = scaled_tol::<T>(1e-12, 16.0 * components.len() as f64);
    if (total - T::one()).abs() > weight_tol {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {} instead of 1",
            to_f64(total)
        )));
    }

    let label_tol: T = cfg.label_tol();
    let mut labels = LabelSet::new();
    let mut effects: Vec<HermMatrix<T>> = Vec::new();
    for (w, p) in components {
        for o in p.outcomes() {
            let idx = labels.intern(&o.label, label_tol);
            if idx == effects.len() {
                effects.push(HermMatrix::zeros(dim));
            }
            effects[idx].axpy(*w, &o.effect);
        }
    }
    let outcomes = labels
        .into_labels()
        .into_iter()
        .zip(effects)
        .map(|(l, e)| Outcome::new(l, e))
        .collect();
    FinitePovm::new(dim, outcomes)
}

/// Sums effects whose labels coincide, keeping first-occurrence order.
pub fn merge_labels<T: Real>(povm: &FinitePovm<T>, label_tol: T) -> FinitePovm<T> {
    let mut labels = LabelSet::new();
    let mut effects: Vec<HermMatrix<T>> = Vec::new();
    for o in povm.outcomes() {
        let idx = labels.intern(&o.label, label_tol);
        if idx == effects.len() {
            effects.push(o.effect.clone());
        } else {
            effects[idx].axpy(T::one(), &o.effect);
        }
    }
    let outcomes = labels
        .into_labels()
        .into_iter()
        .zip(effects)
        .map(|(l, e)| Outcome::new(l, e))
        .collect();
    FinitePovm {
        dim: povm.dim(),
        outcomes,
    }
}

/// Sums effects whose labels coincide, then drops effects of trace `<= prune_tol`.
pub fn prune_and_merge<T: Real>(povm: &FinitePovm<T>, prune_tol: T, label_tol: T) -> FinitePovm<T> {
    prune(&merge_labels(povm, label_tol), prune_tol)
}

/// Drops effects of trace `<= prune_tol`.
pub fn prune<T: Real>(povm: &FinitePovm<T>, prune_tol: T) -> FinitePovm<T> {
    let mut pruned = povm.clone();
    pruned.outcomes.retain(|o| o.effect.trace() > prune_tol);
    pruned
}
