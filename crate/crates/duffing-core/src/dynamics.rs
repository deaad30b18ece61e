//! Time evolution and the pulsed hysteresis protocols.
//!
//! Two propagation paths share every entry point:
//! * an adaptive Dormand–Prince 5(4) integrator on vec(ρ), used for short
//!   spans and for time-dependent drive ramps, and
//! * exact eigen-stepping ρ(t) = Σ cₙ e^{λₙt} rₙ through the spectral module,
//!   used for long constant-drive spans where an explicit integrator would
//!   crawl (the stiffness grows as δ₁ shrinks near criticality).
//!
//! The pulsed protocols never sweep parameters continuously: each grid point
//! is prepared from scratch (vacuum, or a deep high-amplitude well), the
//! drive is switched to the target value, and moments are read out after a
//! delay τ. Time is measured in the inverse units of the rates; the defaults
//! (`ramp_time = 0.25`, etc.) assume rates in 1/μs.

use crate::analytic::trace_moment;
use crate::classical;
use crate::fock::{vacuum, DensityMatrix, Operator, SystemParams};
use crate::liouvillian::{build, drive_superoperators, unvec, vec_of, LiouvillianMatrix};
use crate::spectral::{spectrum, LiouvillianSpectrum, DENSE_DIM_LIMIT};
use crate::{par, Error, Result, C64};
use ndarray::prelude::*;
use ndarray_linalg::Norm;
use serde::Serialize;

/// Eigen-stepping is auto-selected for constant spans with γ·t above this.
/// (The precise criterion would be δ₁·t; γ·t is a free upper proxy since
/// δ₁ ≤ O(γ), and the exact path computes δ₁ anyway once chosen.)
pub const EIGEN_STEP_THRESHOLD: f64 = 50.0;

/// First two orders of moments plus the fourth-order correlator, read
/// directly off a density matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Moments {
    pub m10: C64,
    pub m11: f64,
    pub m20: C64,
    pub m22: f64,
}

impl Moments {
    pub fn from_matrix(rho: &Array2<C64>) -> Self {
        Moments {
            m10: trace_moment(rho, 0, 1),
            m11: trace_moment(rho, 1, 1).re,
            m20: trace_moment(rho, 0, 2),
            m22: trace_moment(rho, 2, 2).re,
        }
    }

    pub fn g2(&self) -> Option<f64> {
        (self.m11 > 1e-12).then(|| self.m22 / (self.m11 * self.m11))
    }
}

/// Sampled moments along an evolution, plus the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub moments: Vec<Moments>,
    pub final_state: DensityMatrix,
}

/// Transition into a pulse segment.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Ramp {
    /// Sudden switch.
    Step,
    /// Linear drive ramp over `ramp_time`, prepended to the segment hold.
    Linear { ramp_time: f64 },
}

/// One constant-drive segment; `ramp` describes how the drive gets there
/// from the previous segment's value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Segment {
    pub xi: C64,
    pub duration: f64,
    pub ramp: Ramp,
}

#[derive(Debug, Clone, Serialize)]
pub struct PulseProgram {
    pub segments: Vec<Segment>,
}

impl PulseProgram {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidParams("pulse program has no segments".into()));
        }
        for s in &self.segments {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "segment duration {} must be positive and finite",
                    s.duration
                )));
            }
            if let Ramp::Linear { ramp_time } = s.ramp {
                if !(ramp_time >= 0.0) || !ramp_time.is_finite() {
                    return Err(Error::InvalidParams(format!("ramp_time {ramp_time} invalid")));
                }
            }
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// b5 − b4: the embedded error weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate y' = f(t, y) from t0 to t1 in place, adapting the step.
fn rk45_span<F>(f: &F, y: &mut Array1<C64>, t0: f64, t1: f64, tol: f64, h: &mut f64) -> Result<()>
where
    F: Fn(f64, &Array1<C64>) -> Array1<C64>,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    let mut t = t0;
    let mut k: Vec<Array1<C64>> = Vec::with_capacity(7);
    if !(*h > 0.0) {
        *h = span * 1e-3;
    }
    while t < t1 {
        let hh = h.min(t1 - t);
        k.clear();
        k.push(f(t, y));
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    ys.zip_mut_with(kj, |o, &v| *o += hh * a * v);
                }
            }
            k.push(f(t + C[s] * hh, &ys));
        }
        // 5th-order solution is the last stage's argument (FSAL layout):
        // y5 = y + h Σ A[5][j] k_j ... but stage 7 was evaluated at y5,
        // so rebuild y5 from the weights and form the embedded error.
        let mut y5 = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let a = A[5][j];
            if a != 0.0 {
                y5.zip_mut_with(kj, |o, &v| *o += hh * a * v);
            }
        }
        let mut err = Array1::<C64>::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err.zip_mut_with(kj, |o, &v| *o += hh * E[j] * v);
            }
        }
        let scale = tol * (1.0 + y.norm_l2());
        let enorm = err.norm_l2() / scale;
        if enorm <= 1.0 {
            t += hh;
            *y = y5;
        }
        let factor = (0.9 * enorm.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        *h = hh * factor;
        if *h < 1e-13 * span.max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
    }
    Ok(())
}

fn sample_times(t_final: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect()
}

fn finish_state(rho: Array2<C64>) -> Result<DensityMatrix> {
    let rho = {
        let h = (&rho + &rho.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let tr: C64 = h.diag().sum();
        h.mapv(|z| z / tr.re)
    };
    DensityMatrix::new_with_pos_tol(Operator::new(rho)?, 1e-7)
}

fn check_trace(rho: &Array2<C64>, t: f64) -> Result<()> {
    let tr: C64 = rho.diag().sum();
    if (tr.re - 1.0).abs() > 1e-7 || tr.im.abs() > 1e-7 {
        return Err(Error::NotDensityMatrix(format!("trace {tr} drifted at t = {t:.4}")));
    }
    Ok(())
}

/// Truncation-adequacy guard on a raw propagated matrix.
fn check_tail(rho: &Array2<C64>) -> Result<()> {
    let d = rho.nrows();
    let lo = d.saturating_sub(crate::fock::TRUNCATION_LEVELS);
    let tail: f64 = (lo..d).map(|i| rho[[i, i]].re).sum();
    if tail.abs() > crate::fock::TRUNCATION_TOL {
        return Err(Error::TruncationInadequate(format!(
            "tail population {tail:.2e} in the top Fock levels at D = {d}"
        )));
    }
    Ok(())
}

/// Constant-generator evolution by explicit integration.
pub fn evolve_rk(
    l: &LiouvillianMatrix,
    rho0: &DensityMatrix,
    t_final: f64,
    tol: f64,
    samples: usize,
) -> Result<Trajectory> {
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(Error::InvalidParams(format!("tol {tol:e} outside [1e-10, 1e-4]")));
    }
    if l.dim() != rho0.dim() {
        return Err(Error::DimMismatch(l.dim(), rho0.dim()));
    }
    let m = l.matrix();
    let f = |_t: f64, y: &Array1<C64>| m.dot(y);
    let mut y = vec_of(rho0.matrix());
    let times = sample_times(t_final, samples);
    let mut moments = Vec::with_capacity(times.len());
    let mut h = 0.0;
    let mut prev = 0.0;
    for &t in &times {
        rk45_span(&f, &mut y, prev, t, tol, &mut h)?;
        prev = t;
        let rho = unvec(&y.view(), l.dim());
        check_trace(&rho, t)?;
        moments.push(Moments::from_matrix(&rho));
    }
    let final_state = finish_state(unvec(&y.view(), l.dim()))?;
    Ok(Trajectory { times, moments, final_state })
}

/// Constant-generator evolution via the exact eigendecomposition.
pub fn evolve_eigen(
    l: &LiouvillianMatrix,
    rho0: &DensityMatrix,
    t_final: f64,
    samples: usize,
) -> Result<Trajectory> {
    let spec = spectrum(l, None)?;
    evolve_with_spectrum(&spec, rho0, t_final, samples)
}

/// As [`evolve_eigen`] with a caller-provided (reusable) spectrum.
pub fn evolve_with_spectrum(
    spec: &LiouvillianSpectrum,
    rho0: &DensityMatrix,
    t_final: f64,
    samples: usize,
) -> Result<Trajectory> {
    let times = sample_times(t_final, samples);
    let mut moments = Vec::with_capacity(times.len());
    let mut last = rho0.matrix().clone();
    for &t in &times {
        last = spec.propagate(rho0, t)?;
        check_trace(&last, t)?;
        moments.push(Moments::from_matrix(&last));
    }
    let final_state = finish_state(last)?;
    Ok(Trajectory { times, moments, final_state })
}

/// Constant-drive evolution; picks eigen-stepping for long spans (see
/// [`EIGEN_STEP_THRESHOLD`]) and falls back to the integrator when the
/// spectrum is numerically defective.
pub fn evolve(
    l: &LiouvillianMatrix,
    rho0: &DensityMatrix,
    t_final: f64,
    tol: f64,
    samples: usize,
) -> Result<Trajectory> {
    let long = l.params().gamma * t_final > EIGEN_STEP_THRESHOLD;
    if long && l.dim() <= DENSE_DIM_LIMIT {
        match evolve_eigen(l, rho0, t_final, samples) {
            Err(Error::DefectiveSpectrum(_)) => {}
            other => return other,
        }
    }
    evolve_rk(l, rho0, t_final, tol, samples)
}

/// Evolve under a linear drive ramp ξ(t): ξ_from → ξ_to over `duration`.
fn evolve_ramp(
    params: &SystemParams,
    rho0: &Array2<C64>,
    xi_from: C64,
    xi_to: C64,
    duration: f64,
    tol: f64,
) -> Result<Array2<C64>> {
    if duration <= 0.0 || xi_from == xi_to {
        return Ok(rho0.clone());
    }
    let base = build(&params.clone().with_xi(C64::new(0.0, 0.0)))?;
    let (k1, k2) = drive_superoperators(params.dim)?;
    let l0 = base.matrix();
    let f = |t: f64, y: &Array1<C64>| {
        let xi = xi_from + (xi_to - xi_from) * (t / duration).clamp(0.0, 1.0);
        let mut out = l0.dot(y);
        out = out + k1.dot(y).mapv(|z| z * xi);
        out + k2.dot(y).mapv(|z| z * xi.conj())
    };
    let mut y = vec_of(rho0);
    let mut h = 0.0;
    rk45_span(&f, &mut y, 0.0, duration, tol, &mut h)?;
    let rho = unvec(&y.view(), params.dim);
    check_trace(&rho, duration)?;
    Ok(rho)
}

/// Evolve a pulse program; moments are recorded at every segment boundary
/// and at `samples_per_segment` points within each hold.
pub fn evolve_program(
    params: &SystemParams,
    program: &PulseProgram,
    rho0: &DensityMatrix,
    tol: f64,
    samples_per_segment: usize,
) -> Result<Trajectory> {
    program.validate()?;
    let mut rho = rho0.matrix().clone();
    let mut xi_prev = params.xi;
    let mut t0 = 0.0;
    let mut times = vec![0.0];
    let mut moments = vec![Moments::from_matrix(&rho)];

    for seg in &program.segments {
        if let Ramp::Linear { ramp_time } = seg.ramp {
            if ramp_time > 0.0 && xi_prev != seg.xi {
                rho = evolve_ramp(params, &rho, xi_prev, seg.xi, ramp_time, tol)?;
                t0 += ramp_time;
                times.push(t0);
                moments.push(Moments::from_matrix(&rho));
            }
        }
        let p = params.clone().with_xi(seg.xi);
        let l = build(&p)?;
        let start = finish_state(rho.clone())?;
        let traj = evolve(&l, &start, seg.duration, tol, samples_per_segment.max(2))?;
        for (i, &t) in traj.times.iter().enumerate().skip(1) {
            times.push(t0 + t);
            moments.push(traj.moments[i]);
        }
        rho = traj.final_state.matrix().clone();
        t0 += seg.duration;
        xi_prev = seg.xi;
    }
    Ok(Trajectory { times, moments, final_state: finish_state(rho)? })
}

/// Which classical well to prepare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Well {
    Low,
    High,
}

/// Knobs of the well-preparation protocol; the defaults assume rates in
/// 1/μs (250 ns ramp, settle time 10/γ).
#[derive(Debug, Clone, Copy)]
pub struct PrepareOptions {
    /// The high-well preparation drive is this factor times the upper
    /// hysteresis-boundary drive ξ₊ (deep single-well regime).
    pub prep_factor: f64,
    /// Linear-ramp time into the target drive; 0 means a sudden step.
    pub ramp_time: f64,
    /// Settle time at the preparation drive; default 10/γ.
    pub settle_time: Option<f64>,
    pub tol: f64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions { prep_factor: 5.0, ramp_time: 0.25, settle_time: None, tol: 1e-8 }
    }
}

/// Preparation drive for a well: 0 for the low well, `prep_factor`·ξ₊ with
/// the target drive's phase for the high well.
pub fn preparation_drive(params: &SystemParams, well: Well, opts: &PrepareOptions) -> C64 {
    match well {
        Well::Low => C64::new(0.0, 0.0),
        Well::High => {
            let mag = classical::hysteresis_boundaries(params.delta, params.u, params.gamma)
                .map(|(_, hi)| hi)
                .unwrap_or(params.xi.norm());
            let phase = if params.xi.norm() > 0.0 { params.xi.arg() } else { 0.0 };
            C64::from_polar(opts.prep_factor * mag, phase)
        }
    }
}

/// Settle the system at the preparation drive (from vacuum), then take the
/// drive to `params.xi`. Returns the post-ramp state, i.e. the state at
/// delay τ = 0 of the pulsed protocols.
pub fn prepare_well(params: &SystemParams, well: Well, opts: &PrepareOptions) -> Result<DensityMatrix> {
    let xi_prep = preparation_drive(params, well, opts);
    let settle = opts.settle_time.unwrap_or(10.0 / params.gamma);
    let p_prep = params.clone().with_xi(xi_prep);
    let l = build(&p_prep)?;
    let settled = evolve(&l, &vacuum(params.dim)?, settle, opts.tol, 2)?.final_state;
    if !crate::fock::truncation_converged(&settled) {
        return Err(Error::TruncationInadequate(format!(
            "preparation drive |xi| = {:.3} pushes population into the top Fock levels at D = {}",
            xi_prep.norm(),
            params.dim
        )));
    }
    let rho = evolve_ramp(params, settled.matrix(), xi_prep, params.xi, opts.ramp_time, opts.tol)?;
    let out = finish_state(rho)?;
    if !crate::fock::truncation_converged(&out) {
        return Err(Error::TruncationInadequate(format!(
            "post-ramp state not converged at D = {}",
            params.dim
        )));
    }
    Ok(out)
}

/// Per-ξ result of the pulsed hysteresis protocol: moments of both branch
/// preparations at each requested delay.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub xi: C64,
    /// `low[i]`, `high[i]` correspond to `taus[i]`.
    pub low: Vec<Moments>,
    pub high: Vec<Moments>,
    pub error: Option<String>,
}

/// Relax both prepared wells of `params` for every delay in `taus`.
///
/// One spectrum (or one incremental integration) serves all delays, which is
/// what makes area-vs-τ curves affordable.
pub fn branch_relaxation(
    params: &SystemParams,
    taus: &[f64],
    opts: &PrepareOptions,
) -> Result<(Vec<Moments>, Vec<Moments>)> {
    let low = prepare_well(params, Well::Low, opts)?;
    let high = prepare_well(params, Well::High, opts)?;
    relax_states(params, &[low, high], taus, opts.tol).map(|mut v| {
        let b = v.pop().unwrap();
        let a = v.pop().unwrap();
        (a, b)
    })
}

fn relax_states(
    params: &SystemParams,
    states: &[DensityMatrix],
    taus: &[f64],
    tol: f64,
) -> Result<Vec<Vec<Moments>>> {
    let l = build(params)?;
    if params.dim <= DENSE_DIM_LIMIT {
        match spectrum(&l, None) {
            Ok(spec) if !spec.biorthonormal => {} // fall through to RK
            Ok(spec) => {
                let mut out = Vec::with_capacity(states.len());
                for s in states {
                    let mut ms = Vec::with_capacity(taus.len());
                    for &tau in taus {
                        let rho = spec.propagate(s, tau)?;
                        check_trace(&rho, tau)?;
                        check_tail(&rho)?;
                        ms.push(Moments::from_matrix(&rho));
                    }
                    out.push(ms);
                }
                return Ok(out);
            }
            Err(Error::DefectiveSpectrum(_)) => {} // fall through to RK
            Err(e) => return Err(e),
        }
    }
    // incremental integration over sorted delays
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&i, &j| taus[i].partial_cmp(&taus[j]).unwrap());
    let m = l.matrix();
    let f = |_t: f64, y: &Array1<C64>| m.dot(y);
    let mut out = vec![vec![]; states.len()];
    for (si, s) in states.iter().enumerate() {
        let mut y = vec_of(s.matrix());
        let mut prev = 0.0;
        let mut h = 0.0;
        let mut ms = vec![
            Moments { m10: C64::new(0.0, 0.0), m11: 0.0, m20: C64::new(0.0, 0.0), m22: 0.0 };
            taus.len()
        ];
        for &i in &order {
            rk45_span(&f, &mut y, prev, taus[i], tol, &mut h)?;
            prev = taus[i];
            let rho = unvec(&y.view(), params.dim);
            check_trace(&rho, prev)?;
            check_tail(&rho)?;
            ms[i] = Moments::from_matrix(&rho);
        }
        out[si] = ms;
    }
    Ok(out)
}

/// The pulsed hysteresis sweep: every (ξ, well) point prepared independently
/// (no state carry-over), then read out at each delay in `taus`. Per-point
/// failures are isolated into the point's `error` field.
pub fn hysteresis_sweep(
    params: &SystemParams,
    xis: &[C64],
    taus: &[f64],
    opts: &PrepareOptions,
) -> Vec<SweepPoint> {
    let taus = taus.to_vec();
    let opts = *opts;
    let base = params.clone();
    par::map_collect(xis.to_vec(), move |xi| {
        let p = base.clone().with_xi(xi);
        match branch_relaxation(&p, &taus, &opts) {
            Ok((low, high)) => SweepPoint { xi, low, high, error: None },
            Err(e) => SweepPoint { xi, low: vec![], high: vec![], error: Some(e.to_string()) },
        }
    })
}

/// Shoelace area of the closed polygon traced by one branch followed by the
/// other reversed, in the complex plane of the supplied moment. Returns the
/// absolute area (a self-intersecting polygon still yields its net |area|).
pub fn loop_area(branch_a: &[C64], branch_b: &[C64]) -> f64 {
    let poly: Vec<C64> = branch_a.iter().chain(branch_b.iter().rev()).cloned().collect();
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        twice += p.re * q.im - q.re * p.im;
    }
    0.5 * twice.abs()
}

/// Single-exponential fit `v(t) = A e^{−rate·t}` by least squares on log v.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
}

pub fn fit_exponential(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<ExpFit> {
    if times.len() != values.len() {
        return Err(Error::DimMismatch(times.len(), values.len()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values.iter())
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 4 {
        return Err(Error::FitRefused(format!("{} points in window, need at least 4", pts.len())));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::FitRefused(format!("nonpositive value {v} at t = {t}")));
    }
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (t, v) in &pts {
        let y = v.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let det = n * stt - st * st;
    if det.abs() < 1e-30 {
        return Err(Error::DegenerateDesign("all samples at one time".into()));
    }
    let slope = (n * sty - st * sy) / det;
    let intercept = (sy - slope * st) / n;
    let mut ss = 0.0;
    for (t, v) in &pts {
        let r = v.ln() - (intercept + slope * t);
        ss += r * r;
    }
    Ok(ExpFit { rate: -slope, amplitude: intercept.exp(), residual: (ss / n).sqrt() })
}

/// One row of a thermodynamic-scaling scan.
#[derive(Debug, Clone, Serialize)]
pub struct DptPoint {
    pub n_scale: f64,
    pub xi0: f64,
    pub dim: usize,
    /// ⟨a†a⟩/N of the steady state.
    pub density: Option<f64>,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

/// Fock truncation adequate for a scaled point: the saturated density is
/// ≈ 3.1 photons per N, kept with a 4× headroom.
pub fn dpt_dim(n_scale: f64) -> usize {
    ((13.0 * n_scale).ceil() as usize).max(20)
}

/// Steady-state photon density (and optionally the gap δ₁) across the
/// rescaled family U → U0/N, ξ → √N ξ0. `base` carries (Δ, U0, γ); ξ0 runs
/// over `xi0_grid` (real drive).
pub fn dpt_scan(
    base: &SystemParams,
    n_list: &[f64],
    xi0_grid: &[f64],
    compute_gap: bool,
    dim_override: Option<usize>,
) -> Vec<DptPoint> {
    let mut jobs = Vec::new();
    for &n in n_list {
        for &xi0 in xi0_grid {
            jobs.push((n, xi0));
        }
    }
    let base = base.clone();
    par::map_collect(jobs, move |(n_scale, xi0)| {
        let dim = dim_override.unwrap_or_else(|| dpt_dim(n_scale));
        let mut point =
            DptPoint { n_scale, xi0, dim, density: None, gap: None, error: None };
        let run = || -> Result<(f64, Option<f64>)> {
            let p0 = base.clone().with_xi(C64::new(xi0, 0.0)).with_dim(dim);
            let p = classical::rescale(&p0, n_scale)?;
            let l = build(&p)?;
            let ss = crate::spectral::steady_state(&l)?;
            if !crate::fock::truncation_converged(&ss) {
                return Err(Error::TruncationInadequate(format!(
                    "tail population {:.2e} at D = {dim}",
                    crate::fock::tail_population(&ss)
                )));
            }
            let density = trace_moment(ss.matrix(), 1, 1).re / n_scale;
            let gap = if compute_gap {
                Some(if dim <= DENSE_DIM_LIMIT {
                    spectrum(&l, Some(8))?.gap()?
                } else {
                    crate::spectral::spectrum_iterative(&l, 6)?.gap()?
                })
            } else {
                None
            };
            Ok((density, gap))
        };
        match run() {
            Ok((density, gap)) => {
                point.density = Some(density);
                point.gap = gap;
            }
            Err(e) => point.error = Some(e.to_string()),
        }
        point
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::fock::coherent_state;
    use crate::spectral::steady_state;
    use approx::assert_abs_diff_eq;

    fn simple(delta: f64, u: f64, xi: f64, gamma: f64, dim: usize) -> SystemParams {
        SystemParams::new(delta, u, C64::new(xi, 0.0), gamma, dim).unwrap()
    }

    #[test]
    fn linear_cavity_decay_closed_form() {
        let (delta, gamma) = (1.4, 1.0);
        let dim = 15;
        let alpha = C64::new(1.0, 0.4);
        let p = simple(delta, 0.0, 0.0, gamma, dim);
        let l = build(&p).unwrap();
        let rho0 = coherent_state(alpha, dim).unwrap();
        let traj = evolve_rk(&l, &rho0, 2.0, 1e-9, 9).unwrap();
        for (i, &t) in traj.times.iter().enumerate() {
            let want = alpha * (C64::new(-0.5 * gamma, -delta) * t).exp();
            let got = traj.moments[i].m10;
            assert!((got - want).norm() < 1e-7, "t = {t}: {got} vs {want}");
        }
    }

    #[test]
    fn steady_state_is_stationary() {
        let p = simple(1.0, -0.4, 0.5, 1.0, 14);
        let l = build(&p).unwrap();
        let ss = steady_state(&l).unwrap();
        let traj = evolve_rk(&l, &ss, 3.0, 1e-9, 7).unwrap();
        let m0 = traj.moments[0];
        for m in &traj.moments {
            assert!((m.m10 - m0.m10).norm() < 1e-7);
            assert!((m.m11 - m0.m11).abs() < 1e-7);
        }
    }

    #[test]
    fn eigen_and_rk_paths_agree() {
        let p = simple(1.2, -0.35, 0.6, 1.0, 12);
        let l = build(&p).unwrap();
        let rho0 = coherent_state(C64::new(0.7, 0.0), 12).unwrap();
        let t = 5.0;
        let a = evolve_rk(&l, &rho0, t, 1e-9, 2).unwrap().final_state;
        let b = evolve_eigen(&l, &rho0, t, 2).unwrap().final_state;
        let diff = (a.matrix() - b.matrix()).norm_l2();
        assert!(diff < 1e-7, "trace distance proxy {diff:.2e}");
    }

    #[test]
    fn composition_within_tolerance() {
        let p = simple(0.9, -0.3, 0.45, 1.0, 10);
        let l = build(&p).unwrap();
        let rho0 = coherent_state(C64::new(0.5, -0.2), 10).unwrap();
        let tol = 1e-8;
        let once = evolve_rk(&l, &rho0, 3.0, tol, 2).unwrap().final_state;
        let mid = evolve_rk(&l, &rho0, 1.3, tol, 2).unwrap().final_state;
        let twice = evolve_rk(&l, &mid, 1.7, tol, 2).unwrap().final_state;
        let diff = (once.matrix() - twice.matrix()).norm_l2();
        assert!(diff < 2.0 * tol * 1e3, "diff {diff:.2e}"); // tol is per-step; allow slack
        assert!(diff < 1e-6);
    }

    #[test]
    fn monostable_wells_converge_to_same_state() {
        // Δ = γ/2: no hysteresis regime at all
        let p = simple(0.5, -0.2, 0.3, 1.0, 20);
        let opts = PrepareOptions { prep_factor: 2.0, ramp_time: 0.1, ..Default::default() };
        let (low, high) = branch_relaxation(&p, &[25.0], &opts).unwrap();
        assert!((low[0].m10 - high[0].m10).norm() < 1e-4);
        assert!((low[0].m11 - high[0].m11).abs() < 1e-4);
    }

    #[test]
    fn step_and_fast_ramp_agree_for_weak_drive() {
        let p = simple(1.0, -0.3, 0.2, 1.0, 10);
        let step = PrepareOptions { ramp_time: 0.0, prep_factor: 2.0, ..Default::default() };
        let fast = PrepareOptions { ramp_time: 1e-4, prep_factor: 2.0, ..Default::default() };
        let a = prepare_well(&p, Well::Low, &step).unwrap();
        let b = prepare_well(&p, Well::Low, &fast).unwrap();
        let diff = (a.matrix() - b.matrix()).norm_l2();
        assert!(diff < 1e-4, "diff {diff:.2e}");
    }

    #[test]
    fn prepare_guards_truncation() {
        // absurd preparation drive on a tiny space must be refused
        let p = simple(3.0, -1.0, 2.0, 1.0, 8);
        let opts = PrepareOptions { prep_factor: 20.0, ..Default::default() };
        assert!(matches!(
            prepare_well(&p, Well::High, &opts),
            Err(Error::TruncationInadequate(_))
        ));
    }

    #[test]
    fn pulse_program_runs_and_preserves_trace() {
        let p = simple(1.0, -0.3, 0.0, 1.0, 10);
        let program = PulseProgram {
            segments: vec![
                Segment { xi: C64::new(0.5, 0.0), duration: 1.0, ramp: Ramp::Step },
                Segment {
                    xi: C64::new(0.2, 0.1),
                    duration: 1.5,
                    ramp: Ramp::Linear { ramp_time: 0.25 },
                },
            ],
        };
        let traj = evolve_program(&p, &program, &vacuum(10).unwrap(), 1e-8, 4).unwrap();
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(traj.times.last().unwrap(), &2.75, epsilon = 1e-12);
        // final state validated (trace, Hermiticity, positivity) by construction
        assert!(crate::fock::truncation_converged(&traj.final_state));
    }

    #[test]
    fn invalid_programs_rejected() {
        let program = PulseProgram { segments: vec![] };
        assert!(program.validate().is_err());
        let program = PulseProgram {
            segments: vec![Segment { xi: C64::new(0.1, 0.0), duration: -1.0, ramp: Ramp::Step }],
        };
        assert!(program.validate().is_err());
    }

    #[test]
    fn loop_area_trivial_cases() {
        let sq = [
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 1.0),
            C64::new(0.0, 1.0),
        ];
        // both branches traced along the same sweep axis (left to right)
        let up = [sq[0], sq[1]];
        let down = [sq[3], sq[2]];
        assert_abs_diff_eq!(loop_area(&up, &down), 1.0, epsilon = 1e-15);
        let b = [C64::new(0.3, 0.1), C64::new(0.5, -0.2), C64::new(0.9, 0.4)];
        assert_abs_diff_eq!(loop_area(&b, &b), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_exponential_exact_noisy_constant() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let clean: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let f = fit_exponential(&times, &clean, (0.0, 5.0)).unwrap();
        assert_abs_diff_eq!(f.rate, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.amplitude, 1.0, epsilon = 1e-10);
        assert!(f.residual < 1e-12);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noisy: Vec<f64> =
            clean.iter().map(|v| v * (1.0 + 0.01 * (rng.gen::<f64>() - 0.5) * 2.0)).collect();
        let f = fit_exponential(&times, &noisy, (0.0, 5.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 0.1, "rate {}", f.rate);

        let flat = vec![0.7; 50];
        let f = fit_exponential(&times, &flat, (0.0, 5.0)).unwrap();
        assert_abs_diff_eq!(f.rate, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_exponential_refusals() {
        let times = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            fit_exponential(&times, &[1.0, 0.5, -0.1, 0.1], (0.0, 4.0)),
            Err(Error::FitRefused(_))
        ));
        assert!(matches!(
            fit_exponential(&times, &[1.0, 0.5, 0.2, 0.1], (0.0, 1.0)),
            Err(Error::FitRefused(_))
        ));
    }

    #[test]
    fn dpt_scan_n1_matches_exact_moments() {
        let base = simple(3.0, -1.0, 0.0, 1.0, 20);
        let pts = dpt_scan(&base, &[1.0], &[0.6, 0.95], false, None);
        assert_eq!(pts.len(), 2);
        for pt in &pts {
            assert!(pt.error.is_none(), "{:?}", pt.error);
            let p = simple(3.0, -1.0, pt.xi0, 1.0, pt.dim);
            let want = analytic::moment(&p, 1, 1).unwrap().re;
            assert_abs_diff_eq!(pt.density.unwrap(), want, epsilon = 1e-6 * want.max(1.0));
        }
    }

    #[test]
    fn sweep_isolates_failures_and_orders_points() {
        // huge drives overflow the truncation → per-point error fields
        let p = simple(3.0, -1.0, 0.0, 1.0, 30);
        let xis = [C64::new(0.2, 0.0), C64::new(500.0, 0.0)];
        let opts = PrepareOptions { prep_factor: 1.0, ramp_time: 0.0, ..Default::default() };
        let pts = hysteresis_sweep(&p, &xis, &[1.0], &opts);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].xi, xis[0]);
        assert!(pts[0].error.is_none(), "{:?}", pts[0].error);
        assert!(pts[1].error.is_some());
    }
}
