//! Wigner-function reconstruction from low-order moments.
//!
//! The exact steady state is a two-parameter family in (c, d); fitting those
//! two complex numbers to the measured first- and second-order moments
//! (⟨a⟩, ⟨a†a⟩, ⟨a²⟩ — an overdetermined set) and inserting them back into
//! the exact Wigner formula reconstructs the full distribution. The method
//! leans on knowing the steady-state family, so every reconstruction carries
//! its fit residual: a large residual means the state was *not* in the
//! family and the picture should not be trusted.

use crate::analytic::{moment_cd, wigner_cd, DrummondParams, GridSpec, WignerGrid};
use crate::fock::SystemParams;
use crate::optim::nelder_mead;
use crate::{par, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// First two orders of (signal) moments with per-moment fit weights
/// ordered as (⟨a⟩, ⟨a†a⟩, ⟨a²⟩).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentSet {
    pub m10: C64,
    pub m11: f64,
    pub m20: C64,
    pub weights: [f64; 3],
}

impl MomentSet {
    pub fn new(m10: C64, m11: f64, m20: C64) -> Result<Self> {
        let s = Self { m10, m11, m20, weights: [1.0; 3] };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m11 >= 0.0) {
            return Err(Error::InvalidParams(format!("m11 = {} must be >= 0", self.m11)));
        }
        if self.m11 < self.m10.norm_sqr() - 1e-9 {
            return Err(Error::InvalidParams(format!(
                "unphysical moments: m11 = {} < |m10|^2 = {}",
                self.m11,
                self.m10.norm_sqr()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParams("weights must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        (self.m10.norm_sqr() + self.m11 * self.m11 + self.m20.norm_sqr()).sqrt()
    }
}

/// Relative residual above which a fit is rejected as unreliable
/// (as a fraction of the moment-vector norm).
pub const POOR_FIT_FRAC: f64 = 0.1;

// search space: x = [Re c, ln Im c, ln |d|, arg d]; Im c > 0 by
// construction (Im c = −γ/(2U) with U < 0), |d| > 0 likewise
fn unpack(x: &[f64]) -> (C64, C64) {
    let c = C64::new(x[0], x[1].exp());
    let d = C64::from_polar(x[2].exp(), x[3]);
    (c, d)
}

fn objective(x: &[f64], m: &MomentSet) -> f64 {
    let (c, d) = unpack(x);
    let pred = |j, k| moment_cd(c, d, j, k);
    match (pred(0, 1), pred(1, 1), pred(0, 2)) {
        (Ok(p10), Ok(p11), Ok(p20)) => {
            m.weights[0] * (p10 - m.m10).norm_sqr()
                + m.weights[1] * (p11.re - m.m11).powi(2)
                + m.weights[2] * (p20 - m.m20).norm_sqr()
        }
        _ => 1e12,
    }
}

fn splitmix64(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Fit (c, d) to a moment set by multi-start simplex search.
///
/// Starts: the supplied guess, coarse heuristics built from the moments
/// themselves, and seeded random perturbations (≥ 8 in total, deterministic
/// for a fixed seed). Returns the best parameters and the fit residual
/// (square root of the weighted squared error); residuals above
/// [`POOR_FIT_FRAC`]·‖moments‖ are rejected.
pub fn fit_cd(
    moments: &MomentSet,
    initial_guess: Option<DrummondParams>,
    seed: u64,
) -> Result<(DrummondParams, f64)> {
    moments.validate()?;
    if moments.norm() < 1e-10 {
        return Err(Error::DegenerateDesign(
            "vacuum moments: d = 0 and any c fits with zero residual".into(),
        ));
    }

    let mut starts: Vec<[f64; 4]> = Vec::new();
    if let Some(g) = initial_guess {
        if g.c.im > 0.0 && g.d.norm() > 0.0 {
            starts.push([g.c.re, g.c.im.ln(), g.d.norm().ln(), g.d.arg()]);
        }
    }
    // heuristics: in the weak-nonlinearity limit ⟨a⟩ ≈ d/c, so seed d = c·m10
    // at a few |c| scales and both detuning signs
    let amp = moments.m10.norm().max(moments.m11.sqrt()).max(0.1);
    for cmag in [1.0, 4.0, 16.0] {
        for sign in [1.0, -1.0] {
            let c = C64::new(sign * cmag, 0.5 * cmag);
            let d = if moments.m10.norm() > 1e-6 {
                c * moments.m10
            } else {
                C64::new(cmag * amp, 0.0)
            };
            starts.push([c.re, c.im.ln(), d.norm().max(1e-6).ln(), d.arg()]);
        }
    }
    let mut rng = seed;
    while starts.len() < 10 {
        let u = [
            8.0 * (splitmix64(&mut rng) - 0.5) * 2.0,
            3.0 * (splitmix64(&mut rng) - 0.5) * 2.0,
            (amp.ln() + 2.0 * (splitmix64(&mut rng) - 0.5) * 2.0).clamp(-6.0, 8.0),
            std::f64::consts::PI * (splitmix64(&mut rng) - 0.5) * 2.0,
        ];
        starts.push(u);
    }

    let m = *moments;
    let results = par::map_collect(starts, move |x0| {
        let (x, v) = nelder_mead(|x| objective(x, &m), &x0, &[0.3, 0.3, 0.3, 0.2], 2000, 1e-18);
        // polish the winner-to-be a little
        let (x, v2) = nelder_mead(|x| objective(x, &m), &x, &[0.02, 0.02, 0.02, 0.02], 1000, 1e-20);
        (x, v.min(v2))
    });

    let (best_x, best_v) = results
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("at least one start");
    let residual = best_v.max(0.0).sqrt();
    let threshold = POOR_FIT_FRAC * moments.norm();
    if residual > threshold {
        return Err(Error::PoorFit { residual, threshold });
    }
    let (c, d) = unpack(&best_x);
    Ok((DrummondParams { c, d }, residual))
}

/// System parameters consistent with fitted (c, d), in the γ = 1 gauge:
/// `U = −γ/(2 Im c)`, `Δ = U·Re c`, `ξ = −d·U`. Only the pair (c, d) is
/// physical; the gauge fixes the overall rate scale for re-simulation.
pub fn synthesize_params(cd: &DrummondParams, gamma: f64, dim: usize) -> Result<SystemParams> {
    if !(cd.c.im > 0.0) {
        return Err(Error::InvalidParams(format!(
            "Im c = {} must be positive (c = (Δ − iγ/2)/U with U < 0, γ > 0)",
            cd.c.im
        )));
    }
    let u = -gamma / (2.0 * cd.c.im);
    SystemParams::new(u * cd.c.re, u, -cd.d * u, gamma, dim)
}

/// Insert fitted (c, d) back into the exact Wigner formula.
pub fn reconstruct(cd: &DrummondParams, spec: &GridSpec) -> Result<WignerGrid> {
    wigner_cd(cd.c, cd.d, spec)
}

/// Uniform power trim (dB) aligning the last point of a moment series to its
/// reference, bounded to ±1 dB; anything larger signals calibration drift,
/// not a trim.
pub fn gain_trim(series: &[f64], reference: &[f64]) -> Result<f64> {
    if series.is_empty() || series.len() != reference.len() {
        return Err(Error::DegenerateDesign(format!(
            "series/reference lengths {} vs {}",
            series.len(),
            reference.len()
        )));
    }
    let (s, r) = (*series.last().unwrap(), *reference.last().unwrap());
    if !(s > 0.0) || !(r > 0.0) {
        return Err(Error::DegenerateDesign("last points must be positive powers".into()));
    }
    let trim_db = 10.0 * (r / s).log10();
    if trim_db.abs() > 1.0 {
        return Err(Error::CalibrationDrift(trim_db, 1.0));
    }
    Ok(trim_db)
}
