//! Steady state, Liouvillian eigenstructure, spectral gap, and the
//! metastable-manifold decomposition ρ(t) = Σₙ cₙ e^{λₙt} rₙ.
//!
//! The generator is non-Hermitian; its eigenvalues λₙ sit in the closed left
//! half plane and we order them by the decay rates δₙ = −Re λₙ. A unique
//! steady state means exactly one δ below numerical zero; the smallest
//! strictly positive δ is the Liouvillian gap δ₁.

use crate::fock::{DensityMatrix, Operator};
use crate::liouvillian::{unvec, vec_of, LiouvillianMatrix};
use crate::{Error, Result, C64};
use ndarray::prelude::*;
use ndarray_linalg::{Eig, Factorize, Inverse, Norm, Solve};

/// Eigenvector condition number above which the spectrum is declared
/// numerically defective and decomposition is refused.
pub const DEFECT_COND: f64 = 1e8;
/// δ below `GAP_ZERO_FRAC`·γ counts as the steady-state zero.
pub const GAP_ZERO_FRAC: f64 = 1e-6;
/// Dense eigendecomposition is used up to this Fock dimension.
pub const DENSE_DIM_LIMIT: usize = 50;

/// Eigendecomposition of a Lindblad generator, sorted by ascending δₙ.
#[derive(Debug, Clone)]
pub struct LiouvillianSpectrum {
    pub eigenvalues: Vec<C64>,
    /// δₙ = −Re λₙ, ascending.
    pub deltas: Vec<f64>,
    /// Right eigenmatrices; r₀ has unit trace, the rest unit Frobenius norm.
    pub right_eigs: Vec<Array2<C64>>,
    /// Left eigenmatrices, scaled so tr(lₘ rₙ) = δₘₙ. Empty on the
    /// iterative path, which does not produce a full inverse basis.
    pub left_eigs: Vec<Array2<C64>>,
    /// True when the left/right basis pairing is trustworthy.
    pub biorthonormal: bool,
    /// 1-norm condition estimate of the eigenvector matrix (dense path).
    pub eigenvector_condition: f64,
    gamma: f64,
}

/// Operator 1-norm (max column absolute sum).
fn norm_1(m: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for col in m.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Unique steady state by row replacement: one row of `L` is swapped for the
/// trace constraint and the resulting system solved directly, with one round
/// of iterative refinement.
pub fn steady_state(l: &LiouvillianMatrix) -> Result<DensityMatrix> {
    let d = l.dim();
    let n = d * d;
    let mut a = l.matrix().clone();
    for col in 0..n {
        a[[0, col]] = C64::new(0.0, 0.0);
    }
    for k in 0..d {
        a[[0, k + k * d]] = C64::new(1.0, 0.0);
    }
    let mut b = Array1::<C64>::zeros(n);
    b[0] = C64::new(1.0, 0.0);

    let f = a.factorize().map_err(|e| Error::SingularSystem(e.to_string()))?;
    let mut x = f.solve(&b).map_err(|e| Error::SingularSystem(e.to_string()))?;
    // one refinement pass keeps the residual near machine precision even
    // when the gap (hence the conditioning) is poor near criticality
    let r = &b - &a.dot(&x);
    if let Ok(dx) = f.solve(&r) {
        x = x + dx;
    }

    let mut rho = unvec(&x.view(), d);
    let rho_h = (&rho + &rho.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let tr: C64 = rho_h.diag().sum();
    if tr.norm() < 1e-12 {
        return Err(Error::SingularSystem("steady-state solve returned zero trace".into()));
    }
    rho = rho_h.mapv(|z| z / tr);

    let res = l.matrix().dot(&vec_of(&rho)).norm_l2();
    if res > 1e-9 * l.params().gamma {
        return Err(Error::SingularSystem(format!(
            "steady-state residual {res:.3e} above 1e-9*gamma; generator near-degenerate"
        )));
    }
    DensityMatrix::new_with_pos_tol(Operator::new(rho)?, 1e-7)
}

fn sort_order(vals: &[C64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (vals[i], vals[j]);
        (-a.re, a.im.abs(), a.im)
            .partial_cmp(&(-b.re, b.im.abs(), b.im))
            .unwrap()
    });
    idx
}

/// Full dense eigendecomposition of the generator. `count`, when given,
/// truncates the returned lists to the slowest `count` modes after sorting
/// (the decomposition itself is always full).
pub fn spectrum(l: &LiouvillianMatrix, count: Option<usize>) -> Result<LiouvillianSpectrum> {
    let d = l.dim();
    let n = d * d;
    let (vals, vecs) = l.matrix().eig().map_err(|e| Error::EigenFailure(e.to_string()))?;
    let vinv = vecs.inv().map_err(|e| Error::EigenFailure(e.to_string()))?;
    // per-eigenvalue condition: with V⁻¹V = I the i-th left/right pair has
    // κᵢ = ‖vᵢ‖₂‖wᵢ‖₂ / |wᵢᴴvᵢ| = ‖vᵢ‖₂‖wᵢ‖₂; a Jordan cluster sends κ → ∞
    // while a merely non-normal (but diagonalizable) spectrum stays moderate
    let mut cond = 1.0f64;
    for i in 0..n {
        let kappa = vecs.column(i).norm_l2() * vinv.row(i).norm_l2();
        cond = cond.max(kappa);
    }
    let defective = cond > DEFECT_COND;

    let order = sort_order(vals.as_slice().unwrap());
    let keep = count.unwrap_or(n).min(n);

    let mut eigenvalues = Vec::with_capacity(keep);
    let mut deltas = Vec::with_capacity(keep);
    let mut right_eigs = Vec::with_capacity(keep);
    let mut left_eigs = Vec::with_capacity(keep);

    for (rank, &i) in order.iter().take(keep).enumerate() {
        let lam = vals[i];
        let r = unvec(&vecs.column(i), d);
        // tr(l ρ) must reproduce the vec-basis coefficient: l = unvec(row)ᵀ
        let lmat = unvec(&vinv.row(i), d).t().to_owned();
        let (r, lmat) = if rank == 0 {
            let tr: C64 = r.diag().sum();
            if tr.norm() < 1e-12 {
                return Err(Error::EigenFailure("steady eigenmatrix has zero trace".into()));
            }
            (r.mapv(|z| z / tr), lmat.mapv(|z| z * tr))
        } else {
            let s = C64::new(r.norm_l2(), 0.0);
            (r.mapv(|z| z / s), lmat.mapv(|z| z * s))
        };
        eigenvalues.push(lam);
        deltas.push(-lam.re);
        right_eigs.push(r);
        left_eigs.push(lmat);
    }

    Ok(LiouvillianSpectrum {
        eigenvalues,
        deltas,
        right_eigs,
        left_eigs,
        biorthonormal: !defective,
        eigenvector_condition: cond,
        gamma: l.params().gamma,
    })
}

/// Deterministic start vector for the Krylov iteration (splitmix64 stream).
fn krylov_start(n: usize, seed: u64) -> Array1<C64> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut v = Array1::<C64>::zeros(n);
    for e in v.iter_mut() {
        let re = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        let im = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        *e = C64::new(re, im);
    }
    let nrm = v.norm_l2();
    v.mapv(|z| z / nrm)
}

/// Shift-invert Arnoldi for the `count` slowest modes; intended for Fock
/// dimensions beyond [`DENSE_DIM_LIMIT`]. Eigenvalues closest to the shift
/// σ = 10⁻²·γ (just right of the spectrum) converge first — exactly the
/// near-zero modes that set the gap.
pub fn spectrum_iterative(l: &LiouvillianMatrix, count: usize) -> Result<LiouvillianSpectrum> {
    let d = l.dim();
    let n = d * d;
    let gamma = l.params().gamma;
    let sigma = C64::new(1e-2 * gamma, 0.0);
    let shifted = l.matrix() - &(Array2::<C64>::eye(n).mapv(|z| z * sigma));
    let f = shifted.factorize().map_err(|e| Error::SingularSystem(e.to_string()))?;

    let scale = norm_1(l.matrix());
    let tol = 1e-10 * scale.max(gamma);
    let mut last_residual = f64::INFINITY;

    for m in [count.max(8) * 4, count.max(8) * 8, count.max(8) * 12] {
        let m = m.min(n);
        // Arnoldi on (L − σI)⁻¹
        let mut q: Vec<Array1<C64>> = vec![krylov_start(n, 42)];
        let mut h = Array2::<C64>::zeros((m + 1, m));
        for j in 0..m {
            let mut w = f.solve(&q[j]).map_err(|e| Error::SingularSystem(e.to_string()))?;
            for i in 0..=j {
                let hij: C64 = q[i].iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
                h[[i, j]] = hij;
                w = w - &q[i].mapv(|z| z * hij);
            }
            // one re-orthogonalization pass for numerical hygiene
            for i in 0..=j {
                let c: C64 = q[i].iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
                h[[i, j]] += c;
                w = w - &q[i].mapv(|z| z * c);
            }
            let nrm = w.norm_l2();
            h[[j + 1, j]] = C64::new(nrm, 0.0);
            if nrm < 1e-14 {
                break;
            }
            q.push(w.mapv(|z| z / nrm));
        }
        let steps = q.len() - 1;
        let hs = h.slice(s![..steps, ..steps]).to_owned();
        let (theta, y) = hs.eig().map_err(|e| Error::EigenFailure(e.to_string()))?;

        // Ritz pairs, mapped back: λ = σ + 1/θ
        let mut pairs: Vec<(C64, Array1<C64>, f64)> = Vec::new();
        for k in 0..steps {
            let th = theta[k];
            if th.norm() < 1e-14 {
                continue;
            }
            let lam = sigma + 1.0 / th;
            let mut x = Array1::<C64>::zeros(n);
            for (j, qj) in q.iter().take(steps).enumerate() {
                x = x + qj.mapv(|z| z * y[[j, k]]);
            }
            let nrm = x.norm_l2();
            if nrm < 1e-14 {
                continue;
            }
            let x = x.mapv(|z| z / nrm);
            let res = (l.matrix().dot(&x) - x.mapv(|z| z * lam)).norm_l2();
            pairs.push((lam, x, res));
        }
        pairs.sort_by(|a, b| (-a.0.re).partial_cmp(&(-b.0.re)).unwrap());

        let converged: Vec<&(C64, Array1<C64>, f64)> =
            pairs.iter().filter(|p| p.2 < tol).collect();
        if converged.len() >= count {
            let mut eigenvalues = Vec::with_capacity(count);
            let mut deltas = Vec::with_capacity(count);
            let mut right_eigs = Vec::with_capacity(count);
            for (rank, p) in converged.iter().take(count).enumerate() {
                let r = unvec(&p.1.view(), d);
                let r = if rank == 0 {
                    let tr: C64 = r.diag().sum();
                    if tr.norm() < 1e-12 {
                        return Err(Error::EigenFailure(
                            "steady eigenmatrix has zero trace".into(),
                        ));
                    }
                    r.mapv(|z| z / tr)
                } else {
                    let s = r.norm_l2();
                    r.mapv(|z| z / s)
                };
                eigenvalues.push(p.0);
                deltas.push(-p.0.re);
                right_eigs.push(r);
            }
            return Ok(LiouvillianSpectrum {
                eigenvalues,
                deltas,
                right_eigs,
                left_eigs: Vec::new(),
                biorthonormal: false,
                eigenvector_condition: f64::NAN,
                gamma,
            });
        }
        last_residual = pairs
            .iter()
            .take(count)
            .map(|p| p.2)
            .fold(0.0f64, f64::max);
    }
    Err(Error::IterativeNonConvergence { residual: last_residual, iterations: count * 12 })
}

/// Liouvillian gap δ₁: the smallest δₙ above the steady-state zero
/// (δ > [`GAP_ZERO_FRAC`]·γ). Dense below [`DENSE_DIM_LIMIT`], shift-invert
/// above.
pub fn gap(l: &LiouvillianMatrix) -> Result<f64> {
    let spec = if l.dim() <= DENSE_DIM_LIMIT {
        spectrum(l, Some(8))?
    } else {
        spectrum_iterative(l, 6)?
    };
    spec.gap()
}

impl LiouvillianSpectrum {
    /// Smallest strictly positive decay rate.
    pub fn gap(&self) -> Result<f64> {
        self.deltas
            .iter()
            .cloned()
            .find(|&d| d > GAP_ZERO_FRAC * self.gamma)
            .ok_or_else(|| Error::EigenFailure("no nonzero decay rate found".into()))
    }

    /// Expansion coefficients cₙ = tr(lₙ ρ₀) of a state in the eigenbasis.
    ///
    /// Refused when the eigenvector basis is numerically defective — near
    /// an exceptional point the coefficients are meaningless and silently
    /// regularizing them would corrupt exactly the physics of interest.
    pub fn decompose(&self, rho0: &DensityMatrix) -> Result<Vec<(C64, C64, &Array2<C64>)>> {
        if !self.biorthonormal || self.left_eigs.len() != self.right_eigs.len() {
            return Err(Error::DefectiveSpectrum(self.eigenvector_condition));
        }
        let m = rho0.matrix();
        let out = self
            .eigenvalues
            .iter()
            .zip(self.left_eigs.iter().zip(self.right_eigs.iter()))
            .map(|(&lam, (l, r))| {
                let mut c = C64::new(0.0, 0.0);
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        c += l[[i, j]] * m[[j, i]];
                    }
                }
                (lam, c, r)
            })
            .collect();
        Ok(out)
    }

    /// Propagate a state: ρ(t) = Σₙ cₙ e^{λₙt} rₙ. Exact for any t once the
    /// decomposition exists, which is what makes long constant-drive
    /// segments cheap.
    pub fn propagate(&self, rho0: &DensityMatrix, t: f64) -> Result<Array2<C64>> {
        let terms = self.decompose(rho0)?;
        let d = rho0.dim();
        let mut out = Array2::<C64>::zeros((d, d));
        for (lam, c, r) in terms {
            let w = c * (lam * t).exp();
            out.zip_mut_with(r, |o, &rv| *o += w * rv);
        }
        Ok(out)
    }
}

/// One-call form of the decomposition (computes the dense spectrum first).
pub fn metastable_decomposition(
    l: &LiouvillianMatrix,
    rho0: &DensityMatrix,
) -> Result<Vec<(C64, C64, Array2<C64>)>> {
    let spec = spectrum(l, None)?;
    let terms = spec.decompose(rho0)?;
    Ok(terms.into_iter().map(|(lam, c, r)| (lam, c, r.clone())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::fock::{coherent_state, thermal_state, vacuum, SystemParams};
    use crate::liouvillian::build;
    use approx::assert_abs_diff_eq;

    fn simple(delta: f64, u: f64, xi: f64, gamma: f64, dim: usize) -> SystemParams {
        SystemParams::new(delta, u, C64::new(xi, 0.0), gamma, dim).unwrap()
    }

    #[test]
    fn dark_state_is_vacuum() {
        let l = build(&simple(1.0, -0.3, 0.0, 1.0, 10)).unwrap();
        let ss = steady_state(&l).unwrap();
        let vac = vacuum(10).unwrap();
        let diff = (ss.matrix() - vac.matrix()).norm_l2();
        assert!(diff < 1e-10, "diff {diff:.2e}");
    }

    #[test]
    fn thermal_bath_gives_thermal_state() {
        let nt = 0.1;
        let dim = 25;
        let l = build(&simple(0.7, -0.2, 0.0, 1.0, dim).with_thermal(nt)).unwrap();
        let ss = steady_state(&l).unwrap();
        let th = thermal_state(nt, dim).unwrap();
        let diff = (ss.matrix() - th.matrix()).norm_l2();
        assert!(diff < 1e-8, "diff {diff:.2e}");
    }

    #[test]
    fn steady_state_matches_exact_moments() {
        // Δ/γ = 3, U/γ = −1, ξ/γ = 0.95 in γ = 1 units
        let p = simple(3.0, -1.0, 0.95, 1.0, 30);
        let l = build(&p).unwrap();
        let ss = steady_state(&l).unwrap();
        assert!(crate::fock::truncation_converged(&ss));
        for (j, k) in [(0usize, 1usize), (1, 1), (0, 2), (2, 2)] {
            let got = analytic::trace_moment(ss.matrix(), j, k);
            let want = analytic::moment(&p, j, k).unwrap();
            let rel = (got - want).norm() / want.norm();
            assert!(rel <= 1e-6, "moment ({j},{k}): {got} vs {want}, rel {rel:.2e}");
        }
    }

    #[test]
    fn spectrum_basics_and_biorthonormality() {
        let p = simple(0.9, -0.35, 0.4, 1.0, 8);
        let l = build(&p).unwrap();
        let spec = spectrum(&l, None).unwrap();
        assert!(spec.biorthonormal);
        assert!(spec.deltas[0].abs() <= 1e-8 * p.gamma);
        for &d in &spec.deltas {
            assert!(d >= -1e-8 * p.gamma);
        }
        assert!(spec.deltas.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        // exactly one zero mode
        assert_eq!(spec.deltas.iter().filter(|&&d| d < GAP_ZERO_FRAC).count(), 1);

        // spot-check the pairing tr(l_m r_n) = δ_mn
        for m in [0usize, 1, 5, 17] {
            for n in [0usize, 1, 5, 17] {
                let mut t = C64::new(0.0, 0.0);
                for i in 0..8 {
                    for j in 0..8 {
                        t += spec.left_eigs[m][[i, j]] * spec.right_eigs[n][[j, i]];
                    }
                }
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((t - want).norm() < 1e-6, "pairing ({m},{n}) = {t}");
            }
        }
        // traceless excited eigenmatrices
        for r in spec.right_eigs.iter().skip(1) {
            let tr: C64 = r.diag().sum();
            assert!(tr.norm() < 1e-8, "tr r_n = {tr}");
        }

        // r_0 agrees with the direct steady-state solve
        let ss = steady_state(&l).unwrap();
        let diff = (&spec.right_eigs[0] - ss.matrix()).norm_l2();
        assert!(diff < 1e-7);
    }

    #[test]
    fn undriven_coherence_mode_present() {
        let (delta, gamma) = (1.3, 1.0);
        let l = build(&simple(delta, 0.0, 0.0, gamma, 8)).unwrap();
        let spec = spectrum(&l, None).unwrap();
        let lam10 = C64::new(-0.5 * gamma, -delta);
        let dist = spec
            .eigenvalues
            .iter()
            .map(|v| (v - lam10).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(dist < 1e-9, "λ10 missing, nearest {dist:.2e}");
    }

    #[test]
    fn damped_cavity_gap_is_half_gamma() {
        let l = build(&simple(0.0, 0.0, 0.0, 1.0, 10)).unwrap();
        assert_abs_diff_eq!(gap(&l).unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn decomposition_of_steady_state_is_pure_c0() {
        let l = build(&simple(1.1, -0.4, 0.6, 1.0, 12)).unwrap();
        let spec = spectrum(&l, None).unwrap();
        let ss = steady_state(&l).unwrap();
        let terms = spec.decompose(&ss).unwrap();
        assert!((terms[0].1 - 1.0).norm() < 1e-6);
        for (_, c, _) in terms.iter().skip(1) {
            assert!(c.norm() < 1e-6, "|c_n| = {:.2e}", c.norm());
        }
    }

    #[test]
    fn decomposition_reconstructs_initial_state() {
        let dim = 14;
        let l = build(&simple(1.1, -0.4, 0.6, 1.0, dim)).unwrap();
        let spec = spectrum(&l, None).unwrap();
        let rho0 = coherent_state(C64::new(0.8, -0.5), dim).unwrap();
        let rec = spec.propagate(&rho0, 0.0).unwrap();
        let diff = (&rec - rho0.matrix()).norm_l2();
        assert!(diff < 1e-6, "reconstruction error {diff:.2e}");

        // Σ c_n tr(r_n) = 1
        let terms = spec.decompose(&rho0).unwrap();
        let total: C64 = terms.iter().map(|(_, c, r)| c * r.diag().sum()).sum();
        assert!((total - 1.0).norm() < 1e-8);

        // long-time limit lands on the steady state
        let ss = steady_state(&l).unwrap();
        let late = spec.propagate(&rho0, 200.0).unwrap();
        assert!((&late - ss.matrix()).norm_l2() < 1e-9);
    }

    #[test]
    fn iterative_agrees_with_dense() {
        let p = simple(3.0, -1.0, 0.95, 1.0, 30);
        let l = build(&p).unwrap();
        let dense = spectrum(&l, Some(4)).unwrap();
        let iter = spectrum_iterative(&l, 4).unwrap();
        for (a, b) in dense.eigenvalues.iter().zip(iter.eigenvalues.iter()) {
            assert!((a - b).norm() < 1e-8, "dense {a} vs iterative {b}");
        }
        assert_abs_diff_eq!(dense.gap().unwrap(), iter.gap().unwrap(), epsilon = 1e-8);
    }
}
