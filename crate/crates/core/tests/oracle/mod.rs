//! Independent extremality oracle used by the integration tests.
//!
//! Shares no linear algebra with the library: range bases come from a
//! pivoted Cholesky factorisation and Gram spectra from a cyclic Jacobi
//! sweep on the real embedding of a Hermitian matrix.

#![allow(dead_code)]

use num_complex::Complex64 as C;

/// Relative pivot below which a Cholesky step counts as rank-deficient.
pub const PIVOT_TOL: f64 = 1e-10;
/// Gram eigenvalues `<= GRAM_TOL * λ_max` count as zero. The Gram matrix
/// squares singular values, so this corresponds to a ratio of `1e-7` there.
pub const GRAM_TOL: f64 = 1e-14;

pub type Dense = Vec<Vec<C>>;

/// Columns `l_j` with `E = Σ_j l_j l_j^H`, via diagonal pivoting.
pub fn range_basis(e: &Dense) -> Vec<Vec<C>> {
    let n = e.len();
    let mut a = e.clone();
    let scale = (0..n).map(|i| a[i][i].re).fold(0.0, f64::max);
    let mut cols = Vec::new();
    if scale <= 0.0 {
        return cols;
    }
    let mut used = vec![false; n];
    for _ in 0..n {
        let (p, piv) = (0..n).filter(|&i| !used[i]).map(|i| (i, a[i][i].re)).fold(
            (usize::MAX, f64::MIN),
            |best, c| if c.1 > best.1 { c } else { best },
        );
        if p == usize::MAX || piv <= PIVOT_TOL * scale {
            break;
        }
        used[p] = true;
        let root = piv.sqrt();
        let l: Vec<C> = (0..n)
            .map(|i| {
                if used[i] && i != p {
                    C::new(0.0, 0.0)
                } else {
                    a[i][p] / root
                }
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                a[i][j] -= l[i] * l[j].conj();
            }
        }
        cols.push(l);
    }
    cols
}

/// Eigenvalues of a Hermitian matrix, ascending, by Jacobi rotations on
/// `[[A, -B], [B, A]]`. Each eigenvalue appears twice in the embedding.
pub fn hermitian_eigenvalues(h: &Dense) -> Vec<f64> {
    let n = h.len();
    let m = 2 * n;
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = h[i][j];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..m).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}

fn inner(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Extremality by linear independence of `{l_j l_k^H}` over all outcomes,
/// decided by the Gram matrix `<l_j l_k^H, l'_j' l'_k'^H> = <l_j, l'_j'> <l'_k', l_k>`.
pub fn gram_is_extreme(effects: &[Dense]) -> bool {
    let d = effects.first().map_or(0, |e| e.len());
    let bases: Vec<Vec<Vec<C>>> = effects.iter().map(range_basis).collect();
    let elems: Vec<(&[C], &[C])> = bases
        .iter()
        .flat_map(|b| {
            b.iter()
                .flat_map(move |x| b.iter().map(move |y| (x.as_slice(), y.as_slice())))
        })
        .collect();
    if elems.len() > d * d {
        return false;
    }
    let g: Dense = elems
        .iter()
        .map(|(a, b)| {
            elems
                .iter()
                .map(|(c, e)| inner(a, c) * inner(e, b))
                .collect()
        })
        .collect();
    let ev = hermitian_eigenvalues(&g);
    let max = ev.last().copied().unwrap_or(0.0);
    ev.first().is_some_and(|&min| min > GRAM_TOL * max)
}

/// Rank of the `k` vectorised effects; a rank-one POVM is extreme iff it equals `k`.
pub fn vectorised_rank(effects: &[Dense]) -> usize {
    let flat: Vec<Vec<C>> = effects
        .iter()
        .map(|e| e.iter().flatten().copied().collect())
        .collect();
    let g: Dense = flat
        .iter()
        .map(|a| flat.iter().map(|b| inner(a, b)).collect())
        .collect();
    let ev = hermitian_eigenvalues(&g);
    let max = ev.last().copied().unwrap_or(0.0);
    ev.iter().filter(|&&l| l > GRAM_TOL * max).count()
}

pub fn dense(m: &nalgebra::DMatrix<nalgebra::Complex<f64>>) -> Dense {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| C::new(m[(i, j)].re, m[(i, j)].im))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod self_checks {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn jacobi_on_pauli_y() {
        let y = vec![
            vec![c(0.0), C::new(0.0, -1.0)],
            vec![C::new(0.0, 1.0), c(0.0)],
        ];
        let ev = hermitian_eigenvalues(&y);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_basis_reproduces_input() {
        let v = [C::new(0.6, 0.0), C::new(0.0, 0.8)];
        let e: Dense = (0..2)
            .map(|i| (0..2).map(|j| v[i] * v[j].conj()).collect())
            .collect();
        let b = range_basis(&e);
        assert_eq!(b.len(), 1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[0][i] * b[0][j].conj() - e[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_verdicts_on_qubit_examples() {
        let half = vec![vec![c(0.5), c(0.0)], vec![c(0.0), c(0.5)]];
        assert!(!gram_is_extreme(&[half.clone(), half]));
        let p0 = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(0.0)]];
        let p1 = vec![vec![c(0.0), c(0.0)], vec![c(0.0), c(1.0)]];
        assert!(gram_is_extreme(&[p0, p1]));
    }
}
