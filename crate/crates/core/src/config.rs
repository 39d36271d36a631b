use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{scaled_tol, Real};

/// How `decompose_extremal` explores the splitting tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Follow one child of each split down to an extreme POVM, subtract the
    /// largest admissible multiple of it and repeat on the remainder.
    /// Emits at most `Σ rank²` leaves.
    #[default]
    Peel,
    /// Recurse into both children of every split. Leaf count can grow
    /// exponentially with the number of outcomes.
    Tree,
}

/// Numerical knobs. Tolerances are stated for `f64`; [`Config::tol`] floors
/// them at a multiple of the working precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Relative eigenvalue cut-off defining the range of an effect.
    pub rank_tol: f64,
    /// Relative slack allowed below zero in PSD checks.
    pub psd_tol: f64,
    /// Euclidean distance under which two point labels coincide.
    pub label_tol: f64,
    /// `σ_min <= factor * σ_max * max(d², Σ r²)` declares `T_P` non-injective.
    pub extremality_margin_factor: f64,
    /// Max-norm tolerance on `Σ effects = I`.
    pub normalization_tol: f64,
    /// Effects whose trace is at most this are dropped.
    pub prune_tol: f64,
    /// Max-norm tolerance on `T_P(D)` for a splitting direction `D`.
    pub kernel_residual_tol: f64,
    pub max_leaves: usize,
    pub merge_leaves: bool,
    /// Distance under which two leaves are merged when `merge_leaves` is set.
    pub merge_tol: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            psd_tol: 1e-10,
            label_tol: 1e-9,
            extremality_margin_factor: 1e-10,
            normalization_tol: 1e-9,
            prune_tol: 1e-12,
            kernel_residual_tol: 1e-8,
            max_leaves: 4096,
            merge_leaves: false,
            merge_tol: 1e-8,
            strategy: Strategy::Peel,
            seed: 0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("rank_tol", self.rank_tol),
            ("psd_tol", self.psd_tol),
            ("label_tol", self.label_tol),
            ("extremality_margin_factor", self.extremality_margin_factor),
            ("normalization_tol", self.normalization_tol),
            ("prune_tol", self.prune_tol),
            ("kernel_residual_tol", self.kernel_residual_tol),
            ("merge_tol", self.merge_tol),
        ];
        for (name, v) in tols {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.max_leaves == 0 {
            return Err(Error::InvalidArgument("max_leaves must be >= 1".into()));
        }
        Ok(())
    }

    /// `value` converted to `T`, floored at `64 ε_T`.
    pub fn tol<T: Real>(&self, value: f64) -> T {
        scaled_tol(value, 64.0)
    }

    pub fn rank_tol<T: Real>(&self) -> T {
        self.tol(self.rank_tol)
    }

    pub fn psd_tol<T: Real>(&self) -> T {
        self.tol(self.psd_tol)
    }

    pub fn label_tol<T: Real>(&self) -> T {
        self.tol(self.label_tol)
    }

    pub fn margin_factor<T: Real>(&self) -> T {
        self.tol(self.extremality_margin_factor)
    }

    pub fn normalization_tol<T: Real>(&self) -> T {
        // sums of many effects accumulate more rounding than a single entry
        scaled_tol(self.normalization_tol, 4096.0)
    }

    pub fn prune_tol<T: Real>(&self) -> T {
        self.tol(self.prune_tol)
    }

    pub fn kernel_residual_tol<T: Real>(&self) -> T {
        scaled_tol(self.kernel_residual_tol, 4096.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_tolerance() {
        let cfg = Config {
            rank_tol: 0.0,
            ..Config::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_precision_floors_tolerances() {
        let cfg = Config::default();
        let t: f32 = cfg.rank_tol();
        assert!(t > 1e-6);
        let t: f64 = cfg.rank_tol();
        assert_eq!(t, 1e-10);
    }
}
