//! Classical (mean-field) Duffing steady states.
//!
//! At ȧ = 0 the mean-field equation gives the cubic in n = |α|²
//!
//! ```text
//! 4U²n³ + 4ΔUn² + [(γ/2)² + Δ²]n − |ξ|² = 0,
//! ```
//!
//! with one, two, or three real nonnegative roots. Stability is decided by
//! the slope of the drive-power curve, ∂|ξ|²/∂n > 0. The bistable (hysteretic)
//! drive window exists only when Δ² > 3(γ/2)², with boundary photon numbers
//! n± = [−2Δ ± √(Δ² − 3(γ/2)²)]/(6U).

use crate::fock::SystemParams;
use crate::{Error, Result, C64};
use ndarray::prelude::*;
use ndarray_linalg::Eig;

/// A classical steady-state amplitude branch.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Branch {
    /// Steady amplitude α.
    pub alpha: C64,
    /// Photon number n = |α|².
    pub n: f64,
    /// Whether the branch is dynamically stable (∂|ξ|²/∂n > 0).
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Monostable,
    Bistable,
    /// Exactly at a fold point: a double root within tolerance.
    Boundary,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MeanFieldSolution {
    /// Branches sorted by ascending photon number.
    pub amplitudes: Vec<Branch>,
    pub regime: Regime,
}

/// Real nonnegative roots of a real cubic c3 x³ + c2 x² + c1 x + c0 = 0 via
/// the companion matrix; uniform accuracy near fold points where the
/// closed-form branches lose digits.
fn real_nonneg_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let roots: Vec<C64> = if c3.abs() < 1e-300 {
        // linear cavity degenerates to c1 x + c0 = 0
        if c2.abs() < 1e-300 {
            if c1.abs() < 1e-300 {
                vec![]
            } else {
                vec![C64::new(-c0 / c1, 0.0)]
            }
        } else {
            let disc = C64::new(c1 * c1 - 4.0 * c2 * c0, 0.0).sqrt();
            vec![(-c1 + disc) / (2.0 * c2), (-c1 - disc) / (2.0 * c2)]
        }
    } else {
        let comp = array![
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-c0 / c3, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(-c1 / c3, 0.0)],
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-c2 / c3, 0.0)],
        ];
        let (vals, _) = comp.eig().expect("3x3 eigensolve");
        vals.to_vec()
    };

    let mut out: Vec<f64> = roots
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.re.abs().max(1.0))
        .map(|z| z.re)
        .filter(|&x| x >= -1e-12)
        .map(|x| x.max(0.0))
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
    out
}

/// All classical steady branches for the given parameters.
pub fn solve_cubic(params: &SystemParams) -> Result<MeanFieldSolution> {
    params.validate()?;
    let (delta, u, gamma) = (params.delta, params.u, params.gamma);
    let p = params.xi.norm_sqr();
    let half = 0.5 * gamma;
    let c1 = half * half + delta * delta;

    let roots = real_nonneg_cubic_roots(4.0 * u * u, 4.0 * delta * u, c1, -p);
    if roots.is_empty() {
        return Err(Error::SingularSystem("classical cubic produced no real root".into()));
    }

    // ∂|ξ|²/∂n of the cubic: 12U²n² + 8ΔUn + (γ/2)² + Δ²
    let slope = |n: f64| 12.0 * u * u * n * n + 8.0 * delta * u * n + c1;

    let mut amplitudes = Vec::with_capacity(roots.len());
    for &n in &roots {
        let denom = C64::i() * (delta + 2.0 * u * n) + half;
        // steady point of α̇ = −i(Δ + 2U|α|²)α − (γ/2)α − iξ; the −i on the
        // forcing keeps the classical phase aligned with the quantum ⟨a⟩
        let alpha = if p == 0.0 { C64::new(0.0, 0.0) } else { -C64::i() * params.xi / denom };
        amplitudes.push(Branch { alpha, n, stable: slope(n) > 0.0 });
    }

    let stable = amplitudes.iter().filter(|b| b.stable).count();
    let regime = match (amplitudes.len(), stable) {
        (3, 2) => Regime::Bistable,
        (1, 1) => Regime::Monostable,
        _ => Regime::Boundary,
    };
    Ok(MeanFieldSolution { amplitudes, regime })
}

/// Drive magnitudes (ξ−, ξ+) bounding the bistable window, or `None` when
/// the parameters do not admit bistability (requires Δ² > 3(γ/2)² and both
/// fold photon numbers positive, hence ΔU < 0).
pub fn hysteresis_boundaries(delta: f64, u: f64, gamma: f64) -> Option<(f64, f64)> {
    if u == 0.0 {
        return None;
    }
    let disc = delta * delta - 3.0 * (0.5 * gamma) * (0.5 * gamma);
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let n1 = (-2.0 * delta + s) / (6.0 * u);
    let n2 = (-2.0 * delta - s) / (6.0 * u);
    if n1 <= 0.0 || n2 <= 0.0 {
        return None;
    }
    // drive power at each fold from the cubic itself
    let power = |n: f64| {
        4.0 * u * u * n * n * n
            + 4.0 * delta * u * n * n
            + ((0.5 * gamma) * (0.5 * gamma) + delta * delta) * n
    };
    let (p1, p2) = (power(n1), power(n2));
    if p1 <= 0.0 || p2 <= 0.0 {
        return None;
    }
    let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
    Some((lo.sqrt(), hi.sqrt()))
}

/// Many-photon rescaling U → U0/N, ξ → √N ξ0 at fixed (Δ, γ). In the scaled
/// variable x = n/N the classical cubic is N-independent.
pub fn rescale(params0: &SystemParams, n_scale: f64) -> Result<SystemParams> {
    if !(n_scale >= 1.0) || !n_scale.is_finite() {
        return Err(Error::InvalidParams(format!("rescale requires N >= 1, got {n_scale}")));
    }
    let mut p = params0.clone();
    p.u = params0.u / n_scale;
    p.xi = params0.xi * n_scale.sqrt();
    Ok(p)
}
