//! Declarative experiment configs (TOML primary, JSON accepted).
//!
//! Frequencies are entered as f/2π in MHz to match how drive and detuning
//! values are usually quoted; decay rates are entered directly in 1/μs.
//! Everything is converted to angular rates once, here, at the boundary.

use duffing_core::SystemParams;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Steady,
    Sweep,
    Spectrum,
    Pulse,
    Loop,
    Dpt,
    Tomography,
    Calibrate,
    Classical,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Kind::Steady => "steady",
            Kind::Sweep => "sweep",
            Kind::Spectrum => "spectrum",
            Kind::Pulse => "pulse",
            Kind::Loop => "loop",
            Kind::Dpt => "dpt",
            Kind::Tomography => "tomography",
            Kind::Calibrate => "calibrate",
            Kind::Classical => "classical",
        };
        f.write_str(s)
    }
}

/// A 1-D scan axis: either an inclusive span or an explicit list.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Axis {
    Span { start: f64, stop: f64, points: usize },
    List { list: Vec<f64> },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Axis::Span { start, stop, points } => {
                if *points < 2 {
                    return Err(format!("axis needs at least 2 points, got {points}"));
                }
                if !(start.is_finite() && stop.is_finite()) || stop <= start {
                    return Err(format!("bad axis span [{start}, {stop}]"));
                }
                let n = *points;
                Ok((0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect())
            }
            Axis::List { list } => {
                if list.is_empty() {
                    return Err("axis list is empty".into());
                }
                if list.iter().any(|v| !v.is_finite()) {
                    return Err("axis list holds a non-finite value".into());
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub delta_mhz: f64,
    pub u_mhz: f64,
    #[serde(default)]
    pub xi_mhz: f64,
    /// Energy dissipation rate in 1/μs.
    pub gamma: f64,
    pub dim: usize,
    #[serde(default)]
    pub n_thermal: f64,
    #[serde(default)]
    pub gamma_phi: f64,
    /// Two-photon drive as a fraction of ξ.
    #[serde(default)]
    pub xi2_frac: f64,
    /// Two-photon loss as a fraction of γ.
    #[serde(default)]
    pub gamma2_frac: f64,
}

impl ParamsBlock {
    pub fn resolve(&self, dim_override: Option<usize>) -> Result<SystemParams, String> {
        let dim = dim_override.unwrap_or(self.dim);
        let xi = TAU * self.xi_mhz;
        let mut p = SystemParams::new(
            TAU * self.delta_mhz,
            TAU * self.u_mhz,
            C64::new(xi, 0.0),
            self.gamma,
            dim,
        )
        .map_err(|e| e.to_string())?;
        if self.n_thermal != 0.0 {
            p = p.with_thermal(self.n_thermal);
        }
        if self.gamma_phi != 0.0 {
            p = p.with_dephasing(self.gamma_phi);
        }
        if self.xi2_frac != 0.0 || self.gamma2_frac != 0.0 {
            p = p.with_two_photon(self.xi2_frac * xi, self.gamma2_frac * self.gamma);
        }
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    pub fn has_extras(&self) -> bool {
        self.n_thermal != 0.0
            || self.gamma_phi != 0.0
            || self.xi2_frac != 0.0
            || self.gamma2_frac != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    /// Liouvillian null-space solve at `params.dim`.
    #[default]
    Numeric,
    /// Closed-form moments; only valid for the bare model (no thermal,
    /// dephasing, or two-photon terms).
    Exact,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub xi_mhz: Axis,
    #[serde(default)]
    pub method: SweepMethod,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    /// Number of slowest eigenvalues written per point.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Optional drive scan; absent means one point at `params.xi_mhz`.
    pub xi_mhz: Option<Axis>,
}

fn default_count() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSegment {
    pub xi_mhz: f64,
    /// Hold time in μs.
    pub duration: f64,
    /// Linear ramp time in μs; 0 means a step.
    #[serde(default)]
    pub ramp_time: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    pub segments: Vec<PulseSegment>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples_per_segment: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_samples() -> usize {
    25
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LoopBlock {
    pub xi_mhz: Axis,
    /// Measurement delays in μs.
    pub taus: Vec<f64>,
    #[serde(default = "default_prep_factor")]
    pub prep_factor: f64,
    #[serde(default)]
    pub ramp_time: f64,
    /// Settle time at the preparation drive; default 10/γ.
    pub settle_time: Option<f64>,
}

fn default_prep_factor() -> f64 {
    1.02
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DptBlock {
    pub n_list: Vec<f64>,
    pub xi0_mhz: Axis,
    #[serde(default)]
    pub compute_gap: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyBlock {
    pub n_scale: f64,
    pub xi0_mhz: Axis,
    #[serde(default = "default_extent")]
    pub grid_half_extent: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Optionally dump the full Wigner raster at this ξ0/2π (MHz).
    pub wigner_at: Option<f64>,
}

fn default_extent() -> f64 {
    7.0
}
fn default_grid_points() -> usize {
    121
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrateMode {
    Output,
    Input,
    Reflection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    pub mode: CalibrateMode,
    /// CSV input: (T_K, P_W), (V_V, P_W), or (f_Hz, Re S22, Im S22).
    pub data: String,
    pub gain_db: Option<f64>,
    pub n_noise: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub omega_ghz: Option<f64>,
    pub gamma_m: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalBlock {
    /// Optional drive scan; boundaries are reported either way.
    pub xi_mhz: Option<Axis>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyBlock {
    pub wigner_half_extent: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub wigner_points: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub params: Option<ParamsBlock>,
    pub sweep: Option<SweepBlock>,
    pub spectrum: Option<SpectrumBlock>,
    pub pulse: Option<PulseBlock>,
    #[serde(rename = "loop")]
    pub loop_: Option<LoopBlock>,
    pub dpt: Option<DptBlock>,
    pub tomography: Option<TomographyBlock>,
    pub calibrate: Option<CalibrateBlock>,
    pub classical: Option<ClassicalBlock>,
    pub steady: Option<SteadyBlock>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        let cfg: ExperimentConfig = if json {
            serde_json::from_str(text).map_err(|e| e.to_string())?
        } else {
            toml::from_str(text).map_err(|e| e.to_string())?
        };
        cfg.check_blocks()?;
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.to_string())
    }

    /// Every kind gets exactly the blocks it needs; stray blocks are as much
    /// a config bug as unknown fields.
    fn check_blocks(&self) -> Result<(), String> {
        let need_params = !matches!(self.kind, Kind::Calibrate);
        if need_params && self.params.is_none() {
            return Err(format!("kind \"{}\" requires a [params] block", self.kind));
        }
        let blocks: [(&str, bool, bool); 8] = [
            ("sweep", self.sweep.is_some(), self.kind == Kind::Sweep),
            ("spectrum", self.spectrum.is_some(), self.kind == Kind::Spectrum),
            ("pulse", self.pulse.is_some(), self.kind == Kind::Pulse),
            ("loop", self.loop_.is_some(), self.kind == Kind::Loop),
            ("dpt", self.dpt.is_some(), self.kind == Kind::Dpt),
            ("tomography", self.tomography.is_some(), self.kind == Kind::Tomography),
            ("calibrate", self.calibrate.is_some(), self.kind == Kind::Calibrate),
            ("steady", self.steady.is_some(), self.kind == Kind::Steady),
        ];
        for (name, present, wanted) in blocks {
            if wanted && !present && name != "classical" && name != "steady" && name != "spectrum"
            {
                return Err(format!("kind \"{}\" requires a [{name}] block", self.kind));
            }
            if present && !wanted {
                return Err(format!("[{name}] block does not belong to kind \"{}\"", self.kind));
            }
        }
        if self.classical.is_some() && self.kind != Kind::Classical {
            return Err(format!("[classical] block does not belong to kind \"{}\"", self.kind));
        }
        if let (Kind::Sweep, Some(p), Some(s)) = (self.kind, &self.params, &self.sweep) {
            if s.method == SweepMethod::Exact && p.has_extras() {
                return Err(
                    "sweep method \"exact\" is only valid for the bare model (no thermal, \
                     dephasing, or two-photon terms)"
                        .into(),
                );
            }
        }
        Ok(())
    }
}
