//! Assembly of the Lindblad generator as a dense `D²×D²` matrix.
//!
//! The master equation is
//!
//! ```text
//! ∂t ρ = −i[H, ρ] + (γ/2)(nT+1) D[a]ρ + (γ/2) nT D[a†]ρ
//!        + (γφ/2) D[a†a]ρ + (γ₂/2) D[a²]ρ,
//! D[A]ρ = 2AρA† − A†Aρ − ρA†A,
//! H = Δ a†a + U a†a†aa + (ξ a† + ξ* a) + ξ₂ (a² + a†²).
//! ```
//!
//! Vectorization is column-stacking throughout: `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`,
//! with `vec(ρ)[i + j·D] = ρ[i, j]`. With the `(γ/2)D[a]` convention ⟨a⟩
//! decays at rate γ/2 and ⟨a†a⟩ at rate γ.
//!
//! The drive ξ is complex; the Hamiltonian drive term is `ξ a† + ξ* a`.

use crate::fock::{annihilation, Operator, SystemParams};
use crate::{DensityMatrix, Error, Result, C64};
use ndarray::prelude::*;
use ndarray_linalg::Norm;

/// The Lindblad generator on the vectorized state space, with the parameters
/// it was built from kept for provenance. Units of 1/time.
#[derive(Debug, Clone)]
pub struct LiouvillianMatrix {
    dim: usize,
    matrix: Array2<C64>,
    params: SystemParams,
}

impl LiouvillianMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The D²×D² generator.
    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Relative trace-preservation residual `‖vec(I)ᴴ L‖ / ‖L‖`.
    ///
    /// Exactly zero in exact arithmetic for any Lindblad generator.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dim;
        let mut row = Array1::<C64>::zeros(d * d);
        for col in 0..d * d {
            let mut s = C64::new(0.0, 0.0);
            for n in 0..d {
                // vec(I)ᴴ picks out rows i + j·D with i = j = n
                s += self.matrix[[n + n * d, col]];
            }
            row[col] = s;
        }
        row.norm_l2() / self.matrix.norm_l2()
    }
}

/// Kronecker product, row-major ndarray layout.
pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::<C64>::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
            block.zip_mut_with(b, |o, &bv| *o += aij * bv);
        }
    }
    out
}

/// Superoperator of `ρ ↦ AρB` in column-stacking convention: `Bᵀ ⊗ A`.
fn sandwich(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    kron(&b.t().to_owned(), a)
}

/// `ρ ↦ −i[H, ρ]` as a superoperator.
fn commutator_super(h: &Array2<C64>) -> Array2<C64> {
    let d = h.nrows();
    let eye = Array2::<C64>::eye(d);
    let m = sandwich(h, &eye) - sandwich(&eye, h);
    m.mapv(|z| z * C64::new(0.0, -1.0))
}

/// `ρ ↦ D[A]ρ = 2AρA† − A†Aρ − ρA†A` as a superoperator.
fn dissipator_super(a: &Array2<C64>) -> Array2<C64> {
    let d = a.nrows();
    let eye = Array2::<C64>::eye(d);
    let adag = a.t().mapv(|z| z.conj());
    let ada = adag.dot(a);
    sandwich(a, &adag).mapv(|z| z * 2.0) - sandwich(&ada, &eye) - sandwich(&eye, &ada)
}

/// System Hamiltonian `H = Δ a†a + U a†a†aa + (ξ a† + ξ* a) + ξ₂(a² + a†²)`.
pub fn hamiltonian(params: &SystemParams) -> Result<Operator> {
    params.validate()?;
    let d = params.dim;
    let a = annihilation(d)?;
    let am = a.entries();
    let adag = am.t().mapv(|z| z.conj());
    let n = adag.dot(am);
    let kerr = adag.dot(&adag).dot(am).dot(am);
    let a2 = am.dot(am);
    let adag2 = adag.dot(&adag);

    let mut h = n.mapv(|z| z * params.delta) + kerr.mapv(|z| z * params.u);
    h = h + adag.mapv(|z| z * params.xi) + am.mapv(|z| z * params.xi.conj());
    if params.xi2 != 0.0 {
        h = h + (a2 + adag2).mapv(|z| z * params.xi2);
    }
    Operator::new(h)
}

/// Build the full Lindblad generator for `params`.
pub fn build(params: &SystemParams) -> Result<LiouvillianMatrix> {
    params.validate()?;
    let d = params.dim;
    let a = annihilation(d)?;
    let am = a.entries().to_owned();
    let adag = am.t().mapv(|z| z.conj());

    let h = hamiltonian(params)?;
    let mut l = commutator_super(h.entries());

    let g = params.gamma;
    let nt = params.n_thermal;
    l = l + dissipator_super(&am).mapv(|z| z * (0.5 * g * (nt + 1.0)));
    if nt > 0.0 {
        l = l + dissipator_super(&adag).mapv(|z| z * (0.5 * g * nt));
    }
    if params.gamma_phi > 0.0 {
        let n = adag.dot(&am);
        l = l + dissipator_super(&n).mapv(|z| z * (0.5 * params.gamma_phi));
    }
    if params.gamma2 > 0.0 {
        let a2 = am.dot(&am);
        l = l + dissipator_super(&a2).mapv(|z| z * (0.5 * params.gamma2));
    }

    Ok(LiouvillianMatrix { dim: d, matrix: l, params: params.clone() })
}

/// The two drive superoperators `K₁, K₂` with
/// `L(ξ) = L(ξ=0) + ξ K₁ + ξ* K₂`; used by the dynamics module to follow
/// drive ramps without reassembling the full generator.
pub fn drive_superoperators(dim: usize) -> Result<(Array2<C64>, Array2<C64>)> {
    let a = annihilation(dim)?;
    let am = a.entries();
    let adag = am.t().mapv(|z| z.conj());
    Ok((commutator_super(&adag), commutator_super(&am.to_owned())))
}

/// Column-stacking vec of a D×D matrix.
pub(crate) fn vec_of(m: &Array2<C64>) -> Array1<C64> {
    let d = m.nrows();
    let mut v = Array1::<C64>::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[i + j * d] = m[[i, j]];
        }
    }
    v
}

/// Inverse of [`vec_of`].
pub(crate) fn unvec(v: &ArrayView1<C64>, d: usize) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            m[[i, j]] = v[i + j * d];
        }
    }
    m
}

/// Apply the generator to a state: the operator `Lρ` (traceless, Hermitian).
pub fn apply(l: &LiouvillianMatrix, rho: &DensityMatrix) -> Result<Operator> {
    if l.dim != rho.dim() {
        return Err(Error::DimMismatch(l.dim, rho.dim()));
    }
    let v = l.matrix.dot(&vec_of(rho.matrix()));
    Operator::new(unvec(&v.view(), l.dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, thermal_state, vacuum};
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::Eig;

    fn simple(delta: f64, u: f64, xi: f64, gamma: f64, dim: usize) -> SystemParams {
        SystemParams::new(delta, u, C64::new(xi, 0.0), gamma, dim).unwrap()
    }

    #[test]
    fn hamiltonian_diagonal_terms() {
        let h = hamiltonian(&simple(1.0, 0.0, 0.0, 1.0, 5)).unwrap();
        for n in 0..5 {
            assert_abs_diff_eq!(h.entries()[[n, n]].re, n as f64, epsilon = 1e-14);
        }
        let h = hamiltonian(&simple(0.0, 1.0, 0.0, 1.0, 6)).unwrap();
        for n in 0..6 {
            assert_abs_diff_eq!(h.entries()[[n, n]].re, (n * (n.max(1) - 1)) as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn hamiltonian_explicit_4x4() {
        // Δ=3, U=−1, ξ=0.5: H[n,n] = 3n − n(n−1); H[n−1,n] = 0.5√n
        let h = hamiltonian(&simple(3.0, -1.0, 0.5, 1.0, 4)).unwrap();
        let diag = [0.0, 3.0, 4.0, 3.0];
        for n in 0..4 {
            assert_abs_diff_eq!(h.entries()[[n, n]].re, diag[n], epsilon = 1e-14);
        }
        for n in 1..4 {
            let want = 0.5 * (n as f64).sqrt();
            assert_abs_diff_eq!(h.entries()[[n - 1, n]].re, want, epsilon = 1e-14);
            assert_abs_diff_eq!(h.entries()[[n, n - 1]].re, want, epsilon = 1e-14);
        }
        assert!(h.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn damped_two_level_spectrum() {
        // γ=1, everything else 0, D=2: eigenvalues {0, −1/2, −1/2, −1}
        let l = build(&simple(0.0, 0.0, 0.0, 1.0, 2)).unwrap();
        let (vals, _) = l.matrix().eig().unwrap();
        let mut re: Vec<f64> = vals.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-1.0, -0.5, -0.5, 0.0];
        for (got, want) in re.iter().zip(want) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-12);
        }
        for v in vals.iter() {
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_preservation_on_random_states() {
        use rand::{Rng, SeedableRng};
        let dim = 4;
        let l = build(&SystemParams {
            delta: 1.3,
            u: -0.4,
            xi: C64::new(0.7, 0.2),
            gamma: 1.0,
            gamma_phi: 0.3,
            n_thermal: 0.2,
            xi2: 0.1,
            gamma2: 0.05,
            dim,
        })
        .unwrap();
        assert!(l.trace_preservation_residual() < 1e-9);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            // random Hermitian (not necessarily positive) test matrix
            let mut m = Array2::<C64>::zeros((dim, dim));
            for i in 0..dim {
                m[[i, i]] = C64::new(rng.gen::<f64>() - 0.5, 0.0);
                for j in i + 1..dim {
                    let z = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    m[[i, j]] = z;
                    m[[j, i]] = z.conj();
                }
            }
            let v = l.matrix().dot(&vec_of(&m));
            let out = unvec(&v.view(), dim);
            let tr: C64 = out.diag().sum();
            assert!(tr.norm() < 1e-10, "tr(Lρ) = {tr}");
        }
    }

    #[test]
    fn coherence_eigenvalue_formula() {
        // ξ=0: λ_{nm} = −iΔ(n−m) −iU[n(n−1)−m(m−1)] − γ(n+m)/2 in the spectrum
        let (delta, u, gamma) = (0.9, -0.35, 1.0);
        let dim = 5;
        let l = build(&simple(delta, u, 0.0, gamma, dim)).unwrap();
        let (vals, _) = l.matrix().eig().unwrap();
        for (n, m) in [(1usize, 0usize), (2, 1), (3, 0), (2, 2)] {
            let lam = C64::new(
                -gamma * (n + m) as f64 / 2.0,
                -(delta * (n as f64 - m as f64)
                    + u * ((n * (n.max(1) - 1)) as f64 - (m * (m.max(1) - 1)) as f64)),
            );
            let dist = vals.iter().map(|v| (v - lam).norm()).fold(f64::INFINITY, f64::min);
            assert!(dist < 1e-9, "λ_({n},{m}) = {lam} missing, nearest {dist:.2e}");
        }
    }

    #[test]
    fn minimal_three_term_model_matches_general_builder() {
        // independently coded minimal builder for −i[H,ρ] + (γ/2)D[a]ρ
        let params = simple(2.0, -0.7, 0.45, 1.3, 6);
        let d = params.dim;
        let mut a = Array2::<C64>::zeros((d, d));
        for n in 1..d {
            a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        let adag = a.t().mapv(|z: C64| z.conj());
        let mut h = Array2::<C64>::zeros((d, d));
        for n in 0..d {
            h[[n, n]] = C64::new(params.delta * n as f64 + params.u * (n * (n.max(1) - 1)) as f64, 0.0);
        }
        let h = h + adag.mapv(|z| z * params.xi) + a.mapv(|z| z * params.xi.conj());

        let eye = Array2::<C64>::eye(d);
        let minus_i = C64::new(0.0, -1.0);
        let ada = adag.dot(&a);
        let lref = (kron(&eye, &h) - kron(&h.t().to_owned(), &eye)).mapv(|z| z * minus_i)
            + (kron(&a.mapv(|z| z.conj()), &a).mapv(|z| z * 2.0)
                - kron(&eye, &ada)
                - kron(&ada.t().to_owned(), &eye))
            .mapv(|z| z * (params.gamma / 2.0));

        let l = build(&params).unwrap();
        let diff = (&lref - l.matrix()).norm_l2();
        assert!(diff < 1e-12, "matrix mismatch {diff:.2e}");
    }

    #[test]
    fn apply_on_vacuum() {
        let dim = 6;
        // dark vacuum: ξ=0, nT=0
        let l = build(&simple(1.0, -0.3, 0.0, 1.0, dim)).unwrap();
        let vac = vacuum(dim).unwrap();
        let out = apply(&l, &vac).unwrap();
        assert!(out.frobenius_norm() < 1e-14);

        // driven vacuum: ‖Lρ‖_F = √2 |ξ|
        let xi = C64::new(0.4, -0.3);
        let l = build(&SystemParams::new(1.0, -0.3, xi, 1.0, dim).unwrap()).unwrap();
        let out = apply(&l, &vac).unwrap();
        assert_abs_diff_eq!(out.frobenius_norm(), 2f64.sqrt() * xi.norm(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.entries()[[1, 0]].norm(), xi.norm(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.entries()[[0, 1]].norm(), xi.norm(), epsilon = 1e-12);
        assert!(out.trace().norm() < 1e-12);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let l = build(&simple(1.0, 0.0, 0.0, 1.0, 4)).unwrap();
        let rho = thermal_state(0.3, 6).unwrap();
        assert!(matches!(apply(&l, &rho), Err(Error::DimMismatch(4, 6))));
    }

    #[test]
    fn drive_superoperators_split() {
        let dim = 7;
        let xi = C64::new(0.31, -0.12);
        let p0 = simple(1.1, -0.2, 0.0, 0.8, dim);
        let l0 = build(&p0).unwrap();
        let lxi = build(&p0.clone().with_xi(xi)).unwrap();
        let (k1, k2) = drive_superoperators(dim).unwrap();
        let rebuilt =
            l0.matrix() + &k1.mapv(|z| z * xi) + &k2.mapv(|z| z * xi.conj());
        let diff = (&rebuilt - lxi.matrix()).norm_l2();
        assert!(diff < 1e-12);
    }

    #[test]
    fn conjugate_pairing_small_dim() {
        let l = build(&SystemParams {
            delta: 1.7,
            u: -0.5,
            xi: C64::new(0.6, 0.25),
            gamma: 1.0,
            gamma_phi: 0.1,
            n_thermal: 0.05,
            xi2: 0.0,
            gamma2: 0.0,
            dim: 6,
        })
        .unwrap();
        let (vals, _) = l.matrix().eig().unwrap();
        for v in vals.iter() {
            let dist = vals.iter().map(|w| (w - v.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(dist < 1e-8, "no conjugate partner for {v}");
        }
    }

    #[test]
    fn steadystate_of_driven_cavity_is_annihilated() {
        // U=0 linear cavity: steady state is coherent α = −iξ/(iΔ+γ/2)
        let dim = 25;
        let xi = C64::new(0.5, 0.0);
        let (delta, gamma) = (0.8, 1.0);
        let alpha = -C64::i() * xi / (C64::i() * delta + gamma / 2.0);
        let params = SystemParams::new(delta, 0.0, xi, gamma, dim).unwrap();
        let l = build(&params).unwrap();
        let rho = coherent_state(alpha, dim).unwrap();
        let res = apply(&l, &rho).unwrap().frobenius_norm();
        assert!(res < 1e-8 * gamma, "residual {res:.2e}");
    }
}
