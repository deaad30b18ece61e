//! Randomized invariants over the physical parameter space.

use duffing_core::analytic::{hyp0f2, moment};
use duffing_core::classical::{hysteresis_boundaries, solve_cubic, Regime};
use duffing_core::dynamics::evolve_rk;
use duffing_core::fock::vacuum;
use duffing_core::liouvillian::build;
use duffing_core::spectral::spectrum;
use duffing_core::SystemParams;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn params_strategy(dim: usize) -> impl Strategy<Value = SystemParams> {
    (-3.0f64..3.0, -1.2f64..-0.05, 0.0f64..1.2, 0.5f64..2.0).prop_map(
        move |(delta, u, xi, gamma)| {
            SystemParams::new(delta, u, C64::new(xi, 0.0), gamma, dim).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The identity is always a left null vector of the generator: evolution
    /// preserves the trace no matter the parameters.
    #[test]
    fn trace_preservation(p in params_strategy(8)) {
        let l = build(&p).unwrap();
        let scale = l.matrix().iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        prop_assert!(l.trace_preservation_residual() <= 1e-10 * scale * l.dim() as f64);
    }

    /// Lindblad generators are real maps: eigenvalues come in conjugate
    /// pairs and every decay rate is nonnegative.
    #[test]
    fn spectrum_conjugate_pairs(p in params_strategy(7)) {
        let spec = spectrum(&build(&p).unwrap(), None).unwrap();
        let scale = spec.eigenvalues.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        for lam in &spec.eigenvalues {
            prop_assert!(lam.re <= 1e-8 * scale);
            let mate = spec
                .eigenvalues
                .iter()
                .map(|m| (m - lam.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(mate <= 1e-7 * scale, "unpaired eigenvalue {lam}");
        }
    }

    /// Exact moments obey ⟨a†ʲaᵏ⟩ = ⟨a†ᵏaʲ⟩*.
    #[test]
    fn moment_conjugation(p in params_strategy(4)) {
        for (j, k) in [(0usize, 1usize), (0, 2), (1, 2), (1, 3)] {
            let a = moment(&p, j, k).unwrap();
            let b = moment(&p, k, j).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-10 * (a.norm() + 1e-30));
        }
    }

    /// The series is a real-analytic function of its arguments:
    /// ₀F₂(x̄, ȳ; z̄) = ₀F₂(x, y; z)*.
    #[test]
    fn hypergeometric_conjugate_symmetry(
        re_x in -8.0f64..8.0,
        im_x in 0.2f64..6.0,
        z_mag in 1e-2f64..1e3,
    ) {
        let x = C64::new(re_x, im_x);
        let y = C64::new(re_x + 1.0, -im_x);
        let z = C64::new(z_mag, 0.3 * z_mag);
        let a = hyp0f2(x, y, z).unwrap().value();
        let b = hyp0f2(x.conj(), y.conj(), z.conj()).unwrap().value();
        prop_assert!((a - b.conj()).norm() <= 1e-9 * a.norm());
    }

    /// The mean-field regime label agrees with the closed-form fold pair.
    #[test]
    fn classical_labels_match_boundaries(
        delta in -20.0f64..20.0,
        u in -1.5f64..-0.02,
        xi in 0.01f64..20.0,
        gamma in 0.5f64..4.0,
    ) {
        let p = SystemParams::new(delta, u, C64::new(xi, 0.0), gamma, 4).unwrap();
        let sol = solve_cubic(&p).unwrap();
        let inside = hysteresis_boundaries(delta, u, gamma)
            .map(|(lo, hi)| xi > lo * (1.0 + 1e-9) && xi < hi * (1.0 - 1e-9))
            .unwrap_or(false);
        if sol.regime != Regime::Boundary {
            prop_assert_eq!(sol.regime == Regime::Bistable, inside);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Short integrations keep states physical; the density-matrix
    /// constructor inside the integrator enforces trace, Hermiticity, and
    /// positivity, so success plus nonnegative populations is the check.
    #[test]
    fn trajectories_stay_physical(p in params_strategy(10)) {
        let l = build(&p).unwrap();
        let traj = evolve_rk(&l, &vacuum(10).unwrap(), 2.0 / p.gamma, 1e-9, 3).unwrap();
        prop_assert!(traj.final_state.populations().iter().all(|&q| q >= -1e-8));
        for m in &traj.moments {
            prop_assert!(m.m11 >= -1e-10);
            prop_assert!(m.m11 + 1e-9 >= m.m10.norm_sqr());
        }
    }
}
