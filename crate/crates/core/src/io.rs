//! JSON document formats.
//!
//! Matrices are row-major arrays of `[re, im]` pairs. Labels are either a
//! non-negative integer or an array of floats. Documents always store `f64`;
//! the conversions narrow or widen to the requested scalar type.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decompose::{ExtremalMixture, MixtureComponent, VerificationReport};
use crate::error::{Error, Result};
use crate::extremality::ExtremalityVerdict;
use crate::linalg::{CMatrix, HermMatrix};
use crate::outcomes::PostProcessing;
use crate::povm::{DensityState, FinitePovm, Outcome, OutcomeLabel, TraceDensity};
use crate::sampling::OutcomeHistogram;
use crate::scalar::{cplx, lit, to_f64, Real};

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelDoc {
    Index(u64),
    Point(Vec<f64>),
}

impl LabelDoc {
    pub fn from_label<T: Real>(l: &OutcomeLabel<T>) -> Self {
        match l {
            OutcomeLabel::Index(i) => LabelDoc::Index(*i),
            OutcomeLabel::Point(p) => LabelDoc::Point(p.iter().map(|&x| to_f64(x)).collect()),
        }
    }

    pub fn to_label<T: Real>(&self) -> OutcomeLabel<T> {
        match self {
            LabelDoc::Index(i) => OutcomeLabel::Index(*i),
            LabelDoc::Point(p) => OutcomeLabel::Point(p.iter().map(|&x| lit(x)).collect()),
        }
    }
}

pub fn matrix_to_doc<T: Real>(m: &CMatrix<T>) -> MatrixDoc {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [to_f64(m[(r, c)].re), to_f64(m[(r, c)].im)])
                .collect()
        })
        .collect()
}

/// Parses a `dim x dim` matrix; `at` names the field for error messages.
pub fn matrix_from_doc<T: Real>(doc: &MatrixDoc, dim: usize, at: &str) -> Result<CMatrix<T>> {
    if doc.len() != dim || doc.iter().any(|row| row.len() != dim) {
        return Err(Error::Format {
            path: at.to_string(),
            message: format!("expected a {dim}x{dim} matrix"),
        });
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        let [re, im] = doc[r][c];
        cplx(lit(re), lit(im))
    }))
}

fn herm_from_doc<T: Real>(doc: &MatrixDoc, dim: usize, at: &str) -> Result<HermMatrix<T>> {
    HermMatrix::new(matrix_from_doc(doc, dim, at)?).map_err(|e| Error::Format {
        path: at.to_string(),
        message: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub label: LabelDoc,
    pub effect: MatrixDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmDoc {
    pub dim: usize,
    pub outcomes: Vec<OutcomeDoc>,
}

impl PovmDoc {
    pub fn from_povm<T: Real>(p: &FinitePovm<T>) -> Self {
        Self {
            dim: p.dim(),
            outcomes: p
                .outcomes()
                .iter()
                .map(|o| OutcomeDoc {
                    label: LabelDoc::from_label(&o.label),
                    effect: matrix_to_doc(o.effect.as_matrix()),
                })
                .collect(),
        }
    }

    /// Structural conversion; positivity and normalisation are not checked.
    pub fn to_povm<T: Real>(&self) -> Result<FinitePovm<T>> {
        self.to_povm_at("")
    }

    fn to_povm_at<T: Real>(&self, prefix: &str) -> Result<FinitePovm<T>> {
        let outcomes = self
            .outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let effect = herm_from_doc(
                    &o.effect,
                    self.dim,
                    &format!("{prefix}outcomes[{i}].effect"),
                )?;
                Ok(Outcome::new(o.label.to_label(), effect))
            })
            .collect::<Result<Vec<_>>>()?;
        FinitePovm::new(self.dim, outcomes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictDoc {
    pub extreme: bool,
    pub margin: f64,
    pub threshold: f64,
    pub kernel_dim: usize,
    pub domain_dim: usize,
    pub ranks: Vec<usize>,
}

impl VerdictDoc {
    pub fn from_verdict<T: Real>(v: &ExtremalityVerdict<T>) -> Self {
        Self {
            extreme: v.is_extreme,
            margin: to_f64(v.margin),
            threshold: to_f64(v.threshold),
            kernel_dim: v.kernel_dim,
            domain_dim: v.domain_dim,
            ranks: v.ranks.clone(),
        }
    }

    pub fn to_verdict<T: Real>(&self) -> ExtremalityVerdict<T> {
        ExtremalityVerdict {
            is_extreme: self.extreme,
            margin: lit(self.margin),
            threshold: lit(self.threshold),
            kernel_dim: self.kernel_dim,
            domain_dim: self.domain_dim,
            ranks: self.ranks.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub weight: f64,
    pub povm: PovmDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDoc {
    pub dim: usize,
    pub components: Vec<ComponentDoc>,
    pub complete: bool,
    /// The decomposed POVM, when embedded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PovmDoc>,
}

impl MixtureDoc {
    pub fn from_mixture<T: Real>(m: &ExtremalMixture<T>, source: Option<&FinitePovm<T>>) -> Self {
        Self {
            dim: m.dim,
            components: m
                .components
                .iter()
                .map(|c| ComponentDoc {
                    weight: to_f64(c.weight),
                    povm: PovmDoc::from_povm(&c.povm),
                    verdict: c.verdict.as_ref().map(VerdictDoc::from_verdict),
                })
                .collect(),
            complete: m.complete,
            source: source.map(PovmDoc::from_povm),
        }
    }

    pub fn to_mixture<T: Real>(&self) -> Result<ExtremalMixture<T>> {
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let povm = c.povm.to_povm_at(&format!("components[{k}].povm."))?;
                if povm.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: povm.dim(),
                    });
                }
                Ok(MixtureComponent {
                    weight: lit(c.weight),
                    povm,
                    verdict: c.verdict.as_ref().map(VerdictDoc::to_verdict),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExtremalMixture {
            dim: self.dim,
            components,
            complete: self.complete,
        })
    }

    pub fn source_povm<T: Real>(&self) -> Result<Option<FinitePovm<T>>> {
        self.source
            .as_ref()
            .map(|s| s.to_povm_at("source."))
            .transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub dim: usize,
    pub matrix: MatrixDoc,
}

impl StateDoc {
    pub fn from_state<T: Real>(s: &DensityState<T>) -> Self {
        Self {
            dim: s.dim(),
            matrix: matrix_to_doc(s.matrix().as_matrix()),
        }
    }

    pub fn to_state<T: Real>(&self) -> Result<DensityState<T>> {
        DensityState::new(herm_from_doc(&self.matrix, self.dim, "matrix")?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub targets: Vec<LabelDoc>,
}

impl MapDoc {
    pub fn to_postprocessing<T: Real>(&self) -> PostProcessing<T> {
        PostProcessing::new(self.targets.iter().map(LabelDoc::to_label).collect())
    }

    pub fn from_postprocessing<T: Real>(phi: &PostProcessing<T>) -> Self {
        Self {
            targets: phi.targets.iter().map(LabelDoc::from_label).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountDoc {
    pub label: LabelDoc,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramDoc {
    pub n: u64,
    pub counts: Vec<CountDoc>,
}

impl HistogramDoc {
    pub fn from_histogram<T: Real>(h: &OutcomeHistogram<T>) -> Self {
        Self {
            n: h.total(),
            counts: h
                .labels
                .iter()
                .zip(&h.counts)
                .map(|(l, &count)| CountDoc {
                    label: LabelDoc::from_label(l),
                    count,
                })
                .collect(),
        }
    }

    pub fn to_histogram<T: Real>(&self) -> Result<OutcomeHistogram<T>> {
        let h = OutcomeHistogram {
            labels: self.counts.iter().map(|c| c.label.to_label()).collect(),
            counts: self.counts.iter().map(|c| c.count).collect(),
        };
        if h.total() != self.n {
            return Err(Error::Format {
                path: "n".into(),
                message: format!("counts sum to {} but n is {}", h.total(), self.n),
            });
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEntryDoc {
    pub label: LabelDoc,
    pub weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDoc {
    pub dim: usize,
    pub entries: Vec<DensityEntryDoc>,
    pub total_weight: f64,
    pub max_trace_residual: f64,
    /// `max |Σ μ_i D_i - I|`.
    pub identity_residual: f64,
}

impl DensityDoc {
    pub fn from_density<T: Real>(t: &TraceDensity<T>) -> Self {
        Self {
            dim: t.dim,
            entries: t
                .entries
                .iter()
                .map(|e| DensityEntryDoc {
                    label: LabelDoc::from_label(&e.label),
                    weight: to_f64(e.weight),
                    density: e.density.as_ref().map(|d| matrix_to_doc(d.as_matrix())),
                })
                .collect(),
            total_weight: to_f64(t.total_weight()),
            max_trace_residual: to_f64(t.max_trace_residual()),
            identity_residual: to_f64(
                t.reconstruct_total()
                    .sub(&HermMatrix::identity(t.dim))
                    .max_abs(),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationDoc {
    pub trials: usize,
    pub max_expectation_residual: f64,
    pub max_effect_residual: f64,
    pub weight_sum_residual: f64,
    pub passed: bool,
}

impl VerificationDoc {
    pub fn from_report(r: &VerificationReport, tol: f64) -> Self {
        Self {
            trials: r.trials,
            max_expectation_residual: r.max_expectation_residual,
            max_effect_residual: r.max_effect_residual,
            weight_sum_residual: r.weight_sum_residual,
            passed: r.passes(tol),
        }
    }
}

/// Deserialises `text`, reporting the JSON path of the first offending field.
pub fn from_json<D: DeserializeOwned>(text: &str) -> Result<D> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Format {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn to_json<S: Serialize>(doc: &S) -> String {
    serde_json::to_string_pretty(doc)
        .expect("documents contain only finite numbers and string keys")
}

pub fn read_povm<T: Real>(text: &str) -> Result<FinitePovm<T>> {
    from_json::<PovmDoc>(text)?.to_povm()
}

pub fn write_povm<T: Real>(p: &FinitePovm<T>) -> String {
    to_json(&PovmDoc::from_povm(p))
}
