//! The measurement chain: Caves amplification, blackbody calibration of the
//! output gain and added noise, input-attenuation calibration, the binomial
//! combination of intracavity and noise moments, Q-function noise
//! convolution, and the reflection-coefficient resonance model.
//!
//! Interface units are SI (watts, kelvin, volts, rad/s); dB values are power
//! dB. Internally everything is double precision with no unit tracking —
//! the conversions live at the function boundaries and nowhere else.

use crate::analytic::{GridSpec, WignerGrid};
use crate::optim::nelder_mead;
use crate::{Error, Result, C64};
use ndarray::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const HBAR: f64 = 1.054571817e-34;
pub const KB: f64 = 1.380649e-23;
/// Line impedance assumed for drive-power conversion.
pub const Z0: f64 = 50.0;

/// Amplification-chain description.
///
/// `n_noise` is treated as a dimensionless added-quanta number (the source
/// material quotes it with inverse s·Hz units but uses it dimensionlessly in
/// the power formula; we follow the usage).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainModel {
    /// Power gain in dB.
    pub gain_db: f64,
    /// Added noise quanta referred to the input.
    pub n_noise: f64,
    /// Filter bandwidth B/2π in Hz.
    pub bandwidth_hz: f64,
    /// Carrier angular frequency (rad/s).
    pub omega: f64,
    /// Output coupling rate of the resonator (1/s).
    pub gamma_m: f64,
    /// Documented correction applied when inferring intracavity photon
    /// numbers from output flux (bandwidth-vs-coupling mismatch); override
    /// by setting it to 0.
    #[serde(default = "default_gain_correction")]
    pub gain_correction_db: f64,
}

fn default_gain_correction() -> f64 {
    -3.0
}

impl ChainModel {
    pub fn validate(&self) -> Result<()> {
        if self.gain_db < 30.0 {
            return Err(Error::InvalidParams(format!(
                "gain {} dB below the high-gain regime (need >= 30 dB)",
                self.gain_db
            )));
        }
        if !(self.n_noise >= 0.0) {
            return Err(Error::InvalidParams(format!("n_noise = {} must be >= 0", self.n_noise)));
        }
        if !(self.bandwidth_hz > 0.0) || !(self.omega > 0.0) || !(self.gamma_m >= 0.0) {
            return Err(Error::InvalidParams("bandwidth, omega must be > 0, gamma_m >= 0".into()));
        }
        Ok(())
    }

    /// Linear power gain.
    pub fn gain(&self) -> f64 {
        10f64.powf(self.gain_db / 10.0)
    }

    /// Linear power gain including [`gain_correction_db`](Self::gain_correction_db).
    pub fn compensated_gain(&self) -> f64 {
        10f64.powf((self.gain_db + self.gain_correction_db) / 10.0)
    }

    /// Angular filter bandwidth B (rad/s).
    pub fn bandwidth_angular(&self) -> f64 {
        std::f64::consts::TAU * self.bandwidth_hz
    }
}

/// Bose occupation n̄(ω, T) = 1/(e^{ħω/kBT} − 1).
pub fn planck_occupation(omega: f64, t_kelvin: f64) -> Result<f64> {
    if !(t_kelvin > 0.0) {
        return Err(Error::InvalidParams(format!("temperature {t_kelvin} K must be > 0")));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParams(format!("omega {omega} must be > 0")));
    }
    Ok(1.0 / ((HBAR * omega / (KB * t_kelvin)).exp() - 1.0))
}

/// Temperature at which a mode at `omega` has occupation `n` (inverse of
/// [`planck_occupation`]); the noise-temperature report.
pub fn noise_temperature(omega: f64, n: f64) -> Result<f64> {
    if !(n > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidParams(format!("need n > 0 and omega > 0, got {n}, {omega}")));
    }
    Ok(HBAR * omega / (KB * (1.0 + 1.0 / n).ln()))
}

/// Measured signal power of a thermal input: P = G·B·ħω/π·(n̄ + n + 1).
pub fn output_power(chain: &ChainModel, n_signal_thermal: f64) -> f64 {
    chain.gain() * chain.bandwidth_angular() * HBAR * chain.omega / std::f64::consts::PI
        * (n_signal_thermal + chain.n_noise + 1.0)
}

/// Named parameter estimates with an uncertainty matrix (same order).
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationFit {
    pub estimates: Vec<(String, f64)>,
    pub covariance: Vec<Vec<f64>>,
    /// RMS misfit in the fit's native variable.
    pub residual: f64,
}

impl CalibrationFit {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

/// Calibrate (G, n) from a temperature sweep of thermal input power.
///
/// P is linear in n̄(T): P = a·n̄ + b with a = G·K, b = G·K·(n+1),
/// K = Bħω/π — an ordinary linear least-squares problem.
pub fn fit_output_calibration(
    samples: &[(f64, f64)],
    omega: f64,
    bandwidth_hz: f64,
) -> Result<CalibrationFit> {
    if samples.len() < 5 {
        return Err(Error::DegenerateDesign(format!(
            "{} samples, need at least 5",
            samples.len()
        )));
    }
    let nbars: Vec<f64> =
        samples.iter().map(|&(t, _)| planck_occupation(omega, t)).collect::<Result<_>>()?;
    let (nmin, nmax) = nbars.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if nmax < 3.0 * nmin {
        return Err(Error::DegenerateDesign(format!(
            "occupation span {nmin:.3}..{nmax:.3} below the required factor 3"
        )));
    }

    let m = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&(_, p), &x) in samples.iter().zip(&nbars) {
        sx += x;
        sy += p;
        sxx += x * x;
        sxy += x * p;
    }
    let det = m * sxx - sx * sx;
    if det.abs() < 1e-30 {
        return Err(Error::DegenerateDesign("all temperatures equal".into()));
    }
    let a = (m * sxy - sx * sy) / det;
    let b = (sy - a * sx) / m;
    if !(a > 0.0) || !(b > a) {
        return Err(Error::DegenerateDesign(format!(
            "unphysical linear solution a = {a:.3e}, b = {b:.3e}"
        )));
    }
    let k = std::f64::consts::TAU * bandwidth_hz * HBAR * omega / std::f64::consts::PI;
    let g = a / k;
    let n = b / a - 1.0;

    let mut ss = 0.0;
    for (&(_, p), &x) in samples.iter().zip(&nbars) {
        ss += (p - a * x - b).powi(2);
    }
    let sigma2 = ss / (m - 2.0).max(1.0);
    // covariance of (a, b) from the normal equations, propagated loosely to
    // (G, n) by the leading diagonal terms
    let var_a = sigma2 * m / det;
    let var_b = sigma2 * sxx / det;
    let var_g = var_a / (k * k);
    let var_n = var_b / (a * a) + var_a * (b / (a * a)).powi(2);

    Ok(CalibrationFit {
        estimates: vec![
            ("gain_db".into(), 10.0 * g.log10()),
            ("gain".into(), g),
            ("n_noise".into(), n),
        ],
        covariance: vec![
            vec![var_g, 0.0, 0.0],
            vec![0.0, var_g, 0.0],
            vec![0.0, 0.0, var_n],
        ],
        residual: (ss / m).sqrt(),
    })
}

/// Drive power reaching the sample: P_d = (V − V_off)²/(2 Z0).
pub fn drive_power(v: f64, v_off: f64) -> f64 {
    (v - v_off) * (v - v_off) / (2.0 * Z0)
}

/// Hamiltonian drive strength from generator power:
/// ξ = −i √(γ_port · A · P_d / ħω_d).
pub fn drive_xi(gamma_port: f64, attenuation_linear: f64, p_d: f64, omega_d: f64) -> C64 {
    -C64::i() * (gamma_port * attenuation_linear * p_d / (HBAR * omega_d)).sqrt()
}

/// Calibrate input attenuation and voltage offset from a drive sweep,
/// P = G·[A·(V−V_off)²/(2Z0) + Bħω(n+1)/π]: closed-form A at fixed V_off,
/// outer simplex search over V_off.
pub fn fit_input_calibration(samples: &[(f64, f64)], chain: &ChainModel) -> Result<CalibrationFit> {
    chain.validate()?;
    if samples.len() < 5 {
        return Err(Error::DegenerateDesign(format!(
            "{} samples, need at least 5",
            samples.len()
        )));
    }
    let vs: Vec<f64> = samples.iter().map(|&(v, _)| v).collect();
    let vspan = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - vs.iter().cloned().fold(f64::INFINITY, f64::min);
    if vspan < 1e-6 {
        return Err(Error::DegenerateDesign("voltage range too small to separate A from V_off".into()));
    }
    let g = chain.gain();
    let background =
        chain.bandwidth_angular() * HBAR * chain.omega / std::f64::consts::PI * (chain.n_noise + 1.0);
    // signal part of each sample, y = A·P_d(V)
    let ys: Vec<f64> = samples.iter().map(|&(_, p)| p / g - background).collect();

    let a_for = |v_off: f64| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&v, &y) in vs.iter().zip(&ys) {
            let x = drive_power(v, v_off);
            num += x * y;
            den += x * x;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let sse = |v_off: f64| -> f64 {
        let a = a_for(v_off);
        vs.iter()
            .zip(&ys)
            .map(|(&v, &y)| (y - a * drive_power(v, v_off)).powi(2))
            .sum()
    };

    // work in units of the signal's own scale: raw powers are ~1e-15 W and
    // would otherwise sit below any absolute convergence floor
    let y_norm: f64 = ys.iter().map(|y| y * y).sum::<f64>().max(1e-300);
    let (x, _) =
        nelder_mead(|x| sse(x[0]) / y_norm, &[0.0], &[0.05 * vspan.max(1e-3)], 2000, 1e-24);
    let v_off = x[0];
    let a = a_for(v_off);
    if !(a > 0.0) {
        return Err(Error::DegenerateDesign(format!("fitted attenuation {a:.3e} not positive")));
    }
    // separability guard: the quadratic and its V_off derivative must not be
    // collinear over the sampled voltages
    let xbar: f64 = vs.iter().map(|&v| v - v_off).sum::<f64>() / vs.len() as f64;
    let x2bar: f64 = vs.iter().map(|&v| (v - v_off).powi(2)).sum::<f64>() / vs.len() as f64;
    if x2bar < 1e-12 || xbar.abs() / x2bar.sqrt() > 0.999_999 {
        return Err(Error::DegenerateDesign("V range insufficient to separate A from V_off".into()));
    }

    let m = samples.len() as f64;
    let ss = sse(v_off);
    let sigma2 = ss / (m - 2.0).max(1.0);
    // Gauss–Newton covariance in (A, V_off) by finite-difference Jacobian
    let mut jtj = [[0.0f64; 2]; 2];
    for &v in &vs {
        let j0 = drive_power(v, v_off);
        let j1 = -a * (v - v_off) / Z0;
        jtj[0][0] += j0 * j0;
        jtj[0][1] += j0 * j1;
        jtj[1][0] += j1 * j0;
        jtj[1][1] += j1 * j1;
    }
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let cov = if det.abs() > 1e-300 {
        vec![
            vec![sigma2 * jtj[1][1] / det, -sigma2 * jtj[0][1] / det],
            vec![-sigma2 * jtj[1][0] / det, sigma2 * jtj[0][0] / det],
        ]
    } else {
        vec![vec![0.0, 0.0], vec![0.0, 0.0]]
    };

    Ok(CalibrationFit {
        estimates: vec![
            ("attenuation_db".into(), 10.0 * a.log10()),
            ("attenuation".into(), a),
            ("v_off".into(), v_off),
        ],
        covariance: cov,
        residual: (ss / m).sqrt(),
    })
}

/// Moment table ⟨·†ᵏ ·ˡ⟩ keyed by (k, l).
pub type MomentTable = BTreeMap<(usize, usize), C64>;

/// Reference (vacuum-cavity) output moments of a thermal noise mode:
/// ⟨b_r,out†ᵏ bˡ⟩ = (BG/π)^{(k+l)/2} ⟨b_n,inᵏ b_n,in†ˡ⟩ with antinormal
/// thermal moments δ_{kl}·k!·(n+1)ᵏ.
pub fn vacuum_reference_moments(chain: &ChainModel, max_order: usize) -> MomentTable {
    let bg = chain.bandwidth_angular() * chain.gain() / std::f64::consts::PI;
    let mut t = MomentTable::new();
    for k in 0..=max_order {
        for l in 0..=max_order {
            let v = if k == l {
                let mut fac = 1.0f64;
                for i in 1..=k {
                    fac *= i as f64;
                }
                bg.powf(k as f64) * fac * (chain.n_noise + 1.0).powi(k as i32)
            } else {
                0.0
            };
            t.insert((k, l), C64::new(v, 0.0));
        }
    }
    t
}

fn binom(n: usize, k: usize) -> f64 {
    let mut v = 1.0f64;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Combine intracavity and reference-noise moments into an output moment:
/// ⟨b_s,out†ᵏ bˡ⟩ = Σ_{k′,l′} (γ_m B G/π)^{(k′+l′)/2} C(k,k′) C(l,l′)
/// ⟨a†ᵏ′aˡ′⟩ ⟨b_r,out†^{k−k′} b^{l−l′}⟩.
pub fn combine_output_moments(
    cavity: &MomentTable,
    noise_ref: &MomentTable,
    chain: &ChainModel,
    k: usize,
    l: usize,
) -> Result<C64> {
    let flux = chain.gamma_m * chain.bandwidth_angular() * chain.gain() / std::f64::consts::PI;
    let mut total = C64::new(0.0, 0.0);
    for kp in 0..=k {
        for lp in 0..=l {
            let a = cavity.get(&(kp, lp)).ok_or(Error::MissingMomentOrder(kp, lp))?;
            let b = noise_ref
                .get(&(k - kp, l - lp))
                .ok_or(Error::MissingMomentOrder(k - kp, l - lp))?;
            total += flux.powf((kp + lp) as f64 / 2.0) * binom(k, kp) * binom(l, lp) * a * b;
        }
    }
    Ok(total)
}

/// Q-function of the amplified field: the input Q is stretched by √G (grid
/// coordinates rescale, values divide by G) and convolved with the amplifier
/// noise Gaussian of complex variance (G−1)·n. For G → 1 or n → 0 the kernel
/// collapses to a delta and the map is the identity on the stretched grid —
/// the vacuum half-quantum is already inside Q_in.
pub fn convolve_q(q_in: &WignerGrid, gain_linear: f64, n: f64) -> Result<WignerGrid> {
    if !(gain_linear >= 1.0) || !(n >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "need G >= 1 and n >= 0, got {gain_linear}, {n}"
        )));
    }
    let root_g = gain_linear.sqrt();
    let spec = GridSpec {
        x_min: q_in.spec.x_min * root_g,
        x_max: q_in.spec.x_max * root_g,
        p_min: q_in.spec.p_min * root_g,
        p_max: q_in.spec.p_max * root_g,
        nx: q_in.spec.nx,
        np: q_in.spec.np,
    };
    let scaled = q_in.values.mapv(|v| v / gain_linear);

    let s = (gain_linear - 1.0) * n; // kernel ⟨|v|²⟩
    let values = if s < 1e-12 {
        scaled
    } else {
        let xs = spec.xs();
        let ps = spec.ps();
        let dx = xs[1] - xs[0];
        let dp = ps[1] - ps[0];
        // grid must resolve the kernel
        if dx * dx > s || dp * dp > s {
            return Err(Error::ExtentInsufficient(format!(
                "grid step {:.3e} too coarse for noise kernel width {:.3e}",
                dx.max(dp),
                s.sqrt()
            )));
        }
        let kern = |u: f64| (-u * u / s).exp() / (std::f64::consts::PI * s).sqrt();
        let (nx, np) = (spec.nx, spec.np);
        let mut tmp = Array2::<f64>::zeros((nx, np));
        for i in 0..nx {
            for ii in 0..nx {
                let w = kern(xs[i] - xs[ii]) * dx;
                if w < 1e-300 {
                    continue;
                }
                for j in 0..np {
                    tmp[[i, j]] += w * scaled[[ii, j]];
                }
            }
        }
        let mut out = Array2::<f64>::zeros((nx, np));
        for j in 0..np {
            for jj in 0..np {
                let w = kern(ps[j] - ps[jj]) * dp;
                if w < 1e-300 {
                    continue;
                }
                for i in 0..nx {
                    out[[i, j]] += w * tmp[[i, jj]];
                }
            }
        }
        out
    };

    let grid = WignerGrid { spec, values };
    let mass: f64 = grid.values.sum() * spec.cell_area();
    if (mass - 1.0).abs() > 1e-3 {
        return Err(Error::ExtentInsufficient(format!(
            "convolved mass {mass:.6} deviates from 1 by more than 1e-3; widen the grid"
        )));
    }
    Ok(grid)
}

/// Parameters of the reflection resonance
/// S22(ω) = A e^{−i(τω+φ0)} (1 − e^{iφ} (2Ql/|Qc|) / (1 + 2iQl(ω/ωr − 1))).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReflectionParams {
    pub a: f64,
    /// Cable delay (s).
    pub tau: f64,
    /// Environment phase offset.
    pub phi0: f64,
    /// Impedance-mismatch phase of the dip.
    pub phi: f64,
    pub q_l: f64,
    pub q_c_mag: f64,
    /// Resonance angular frequency (rad/s).
    pub omega_r: f64,
}

impl ReflectionParams {
    /// Internal quality factor from 1/Qi = 1/Ql − 1/|Qc|.
    pub fn q_i(&self) -> f64 {
        1.0 / (1.0 / self.q_l - 1.0 / self.q_c_mag)
    }

    /// (γ0, γm): internal and coupling rates in rad/s.
    pub fn rates(&self) -> (f64, f64) {
        (self.omega_r / self.q_i(), self.omega_r / self.q_c_mag)
    }
}

pub fn reflection_model(omegas: &[f64], p: &ReflectionParams) -> Vec<C64> {
    omegas
        .iter()
        .map(|&w| {
            let env = p.a * C64::from_polar(1.0, -(p.tau * w + p.phi0));
            let dip = C64::from_polar(1.0, p.phi) * (2.0 * p.q_l / p.q_c_mag)
                / (1.0 + C64::i() * 2.0 * p.q_l * (w / p.omega_r - 1.0));
            env * (1.0 - dip)
        })
        .collect()
}

/// Fit the resonance model to complex reflection data: analytic initial
/// guesses (baseline amplitude/delay from the band edges, dip circle on
/// resonance, width from the half-depth points) refined by simplex search.
pub fn fit_reflection(omegas: &[f64], s22: &[C64]) -> Result<(ReflectionParams, CalibrationFit)> {
    if omegas.len() != s22.len() {
        return Err(Error::DimMismatch(omegas.len(), s22.len()));
    }
    if omegas.len() < 7 {
        return Err(Error::DegenerateDesign(format!("{} samples, need at least 7", omegas.len())));
    }
    let mags: Vec<f64> = s22.iter().map(|z| z.norm()).collect();
    let (mut i_min, mut m_min, mut m_max) = (0usize, f64::INFINITY, 0.0f64);
    for (i, &m) in mags.iter().enumerate() {
        if m < m_min {
            m_min = m;
            i_min = i;
        }
        m_max = m_max.max(m);
    }
    if m_max <= 0.0 || (m_max - m_min) / m_max < 0.1 {
        return Err(Error::FitRefused(format!(
            "no resonance dip in the data (depth {:.1}%)",
            100.0 * (m_max - m_min) / m_max.max(1e-300)
        )));
    }
    let omega_r0 = omegas[i_min];

    // baseline from the edges: amplitude and phase slope (cable delay)
    let edge = (omegas.len() / 10).max(1);
    let a0 = (mags[..edge].iter().sum::<f64>() + mags[mags.len() - edge..].iter().sum::<f64>())
        / (2 * edge) as f64;
    let th0 = s22[0].arg();
    let th1 = s22[omegas.len() - 1].arg();
    let mut dth = th1 - th0;
    // unwrap assuming less than a full turn of residual phase across the band
    while dth > std::f64::consts::PI {
        dth -= std::f64::consts::TAU;
    }
    while dth < -std::f64::consts::PI {
        dth += std::f64::consts::TAU;
    }
    let tau0 = -dth / (omegas[omegas.len() - 1] - omegas[0]);
    let phi0_0 = -(s22[0].arg() + tau0 * omegas[0]);

    // normalized dip: S' = S/(A e^{−i(τω+φ0)}) ≈ 1 − e^{iφ}·depth·Lorentzian
    let normalize = |w: f64, z: C64| z / (a0 * C64::from_polar(1.0, -(tau0 * w + phi0_0)));
    let dip_vec = C64::new(1.0, 0.0) - normalize(omega_r0, s22[i_min]);
    let depth0 = dip_vec.norm(); // = 2Ql/|Qc| on resonance
    let phi_0 = dip_vec.arg();

    // width from half-depth crossings of |1 − S'|
    let half = depth0 / 2.0;
    let mut lo = omegas[0];
    let mut hi = omegas[omegas.len() - 1];
    for i in (0..i_min).rev() {
        if (C64::new(1.0, 0.0) - normalize(omegas[i], s22[i])).norm() < half {
            lo = omegas[i];
            break;
        }
    }
    for i in i_min..omegas.len() {
        if (C64::new(1.0, 0.0) - normalize(omegas[i], s22[i])).norm() < half {
            hi = omegas[i];
            break;
        }
    }
    // |dip| halves at 2Ql·x = √3
    let width = (hi - lo).max((omegas[1] - omegas[0]).abs());
    let ql0 = (3.0f64.sqrt() * omega_r0 / width).max(10.0);
    let qc0 = (2.0 * ql0 / depth0.clamp(1e-3, 1.999)).max(ql0);

    // refine all seven parameters; scale-free internal coordinates
    let wr_scale = omega_r0;
    let pack = |p: &ReflectionParams| {
        [
            p.a,
            p.tau * wr_scale,
            p.phi0,
            p.phi,
            p.q_l.ln(),
            p.q_c_mag.ln(),
            p.omega_r / wr_scale,
        ]
    };
    let unpack = |x: &[f64]| ReflectionParams {
        a: x[0],
        tau: x[1] / wr_scale,
        phi0: x[2],
        phi: x[3],
        q_l: x[4].exp(),
        q_c_mag: x[5].exp(),
        omega_r: x[6] * wr_scale,
    };
    let objective = |x: &[f64]| -> f64 {
        let p = unpack(x);
        reflection_model(omegas, &p)
            .iter()
            .zip(s22)
            .map(|(m, d)| (m - d).norm_sqr())
            .sum()
    };
    let start = ReflectionParams {
        a: a0,
        tau: tau0,
        phi0: phi0_0,
        phi: phi_0,
        q_l: ql0,
        q_c_mag: qc0,
        omega_r: omega_r0,
    };
    let x0 = pack(&start);
    let scale = [0.05 * a0, 0.1, 0.1, 0.1, 0.2, 0.2, 1e-5];
    let (x, v) = nelder_mead(objective, &x0, &scale, 8000, 1e-26);
    let (x, v2) = nelder_mead(objective, &x, &[0.005 * a0, 0.01, 0.01, 0.01, 0.02, 0.02, 1e-7], 4000, 1e-28);
    let best = unpack(&x);
    let sse = v.min(v2);
    if best.q_l > best.q_c_mag {
        return Err(Error::FitRefused(format!(
            "inconsistent quality factors Ql = {:.1} > |Qc| = {:.1}",
            best.q_l, best.q_c_mag
        )));
    }
    let (g0, gm) = best.rates();
    let fit = CalibrationFit {
        estimates: vec![
            ("a".into(), best.a),
            ("tau".into(), best.tau),
            ("phi0".into(), best.phi0),
            ("phi".into(), best.phi),
            ("q_l".into(), best.q_l),
            ("q_c_mag".into(), best.q_c_mag),
            ("q_i".into(), best.q_i()),
            ("omega_r".into(), best.omega_r),
            ("gamma_0".into(), g0),
            ("gamma_m".into(), gm),
        ],
        covariance: vec![],
        residual: (sse / omegas.len() as f64).sqrt(),
    };
    Ok((best, fit))
}
