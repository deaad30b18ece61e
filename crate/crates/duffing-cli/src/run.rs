//! Experiment execution and artifact emission.
//!
//! Every run writes one primary CSV plus a manifest JSON with the resolved
//! parameters, tool version, wall time, and any per-point failures. Outputs
//! are deterministic for a fixed config and seed.

use crate::config::*;
use duffing_core::analytic::{
    gaussian_moment_deviation, moment, squeezing_level, trace_moment, wigner_cd, DrummondParams,
    GridSpec, WignerGrid,
};
use duffing_core::chain::{fit_input_calibration, fit_output_calibration, fit_reflection, ChainModel};
use duffing_core::classical::{hysteresis_boundaries, solve_cubic};
use duffing_core::dynamics::{
    dpt_scan, evolve_program, hysteresis_sweep, loop_area, PrepareOptions, PulseProgram, Ramp,
    Segment,
};
use duffing_core::fock::vacuum;
use duffing_core::liouvillian::build;
use duffing_core::spectral::{spectrum, spectrum_iterative, steady_state, DENSE_DIM_LIMIT};
use duffing_core::tomography::{fit_cd, MomentSet};
use duffing_core::SystemParams;
use num_complex::Complex64 as C64;
use serde_json::json;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub dim_override: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, serde::Serialize)]
struct Failure {
    index: usize,
    at: String,
    error: String,
}

/// Collects rows for one CSV artifact.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), String> {
        let mut text = self.header.join(",");
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
    }
}

fn num(v: f64) -> String {
    // shortest representation that round-trips: deterministic and diff-able
    format!("{v:?}")
}

fn cnum(z: C64) -> Vec<String> {
    vec![num(z.re), num(z.im)]
}

pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<i32, String> {
    let started = Instant::now();
    let label = cfg.label();
    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|e| format!("creating {}: {e}", opts.out_dir.display()))?;
    let seed = opts.seed.unwrap_or(cfg.seed);

    let mut failures: Vec<Failure> = Vec::new();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut extra_manifest = serde_json::Map::new();
    let mut dims_used: Vec<usize> = Vec::new();

    let params = match &cfg.params {
        Some(block) => Some(block.resolve(opts.dim_override)?),
        None => None,
    };
    if let Some(p) = &params {
        dims_used.push(p.dim);
    }

    let csv_path = opts.out_dir.join(format!("{label}.csv"));
    match cfg.kind {
        Kind::Steady => {
            let p = params.clone().unwrap();
            let ss = steady_state(&build(&p).map_err(err)?).map_err(err)?;
            let mut t = Table::new(&[
                "re_a", "im_a", "n", "re_a2", "im_a2", "g2", "purity",
            ]);
            let m10 = trace_moment(ss.matrix(), 0, 1);
            let m11 = trace_moment(ss.matrix(), 1, 1).re;
            let m20 = trace_moment(ss.matrix(), 0, 2);
            let m22 = trace_moment(ss.matrix(), 2, 2).re;
            let purity = ss.matrix().dot(ss.matrix()).diag().iter().map(|z| z.re).sum::<f64>();
            let mut row = cnum(m10);
            row.push(num(m11));
            row.extend(cnum(m20));
            row.push(num(if m11 > 1e-12 { m22 / (m11 * m11) } else { f64::NAN }));
            row.push(num(purity));
            t.push(row);
            t.write(&csv_path)?;
            if let Some(SteadyBlock { wigner_half_extent: Some(ext), wigner_points }) =
                cfg.steady.clone()
            {
                let cd = DrummondParams::from_system(&p).map_err(err)?;
                let w = wigner_cd(cd.c, cd.d, &GridSpec::centered(ext, wigner_points))
                    .map_err(err)?;
                let wpath = opts.out_dir.join(format!("{label}_wigner.csv"));
                write_wigner(&w, &wpath)?;
                outputs.push(wpath);
            }
        }
        Kind::Sweep => {
            let block = cfg.sweep.as_ref().unwrap();
            let p0 = params.clone().unwrap();
            let xis = block.xi_mhz.values()?;
            let mut t = Table::new(&[
                "xi_mhz", "re_a", "im_a", "n", "re_a2", "im_a2", "g2", "s_db", "gauss_dev",
            ]);
            for (i, &xi_mhz) in xis.iter().enumerate() {
                let p = p0.clone().with_xi(C64::new(TAU * xi_mhz, 0.0));
                let point = sweep_point(&p, block.method);
                match point {
                    Ok(row) => {
                        let mut full = vec![num(xi_mhz)];
                        full.extend(row);
                        t.push(full);
                    }
                    Err(e) => failures.push(Failure {
                        index: i,
                        at: format!("xi_mhz = {xi_mhz}"),
                        error: e,
                    }),
                }
            }
            t.write(&csv_path)?;
        }
        Kind::Spectrum => {
            let block = cfg.spectrum.clone().unwrap_or(SpectrumBlock { count: 8, xi_mhz: None });
            let p0 = params.clone().unwrap();
            match &block.xi_mhz {
                None => {
                    let spec = spectral_for(&p0, block.count).map_err(err)?;
                    let mut t = Table::new(&["index", "re_lambda", "im_lambda", "delta"]);
                    for (i, lam) in spec.iter().enumerate() {
                        t.push(vec![i.to_string(), num(lam.re), num(lam.im), num(-lam.re)]);
                    }
                    t.write(&csv_path)?;
                }
                Some(axis) => {
                    let mut t = Table::new(&["xi_mhz", "delta1", "delta2"]);
                    for (i, &xi_mhz) in axis.values()?.iter().enumerate() {
                        let p = p0.clone().with_xi(C64::new(TAU * xi_mhz, 0.0));
                        match spectral_for(&p, block.count) {
                            Ok(lams) => {
                                let mut deltas: Vec<f64> =
                                    lams.iter().map(|l| -l.re).collect();
                                deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
                                let gap_floor = 1e-6 * p.gamma;
                                let nz: Vec<f64> =
                                    deltas.into_iter().filter(|&d| d > gap_floor).collect();
                                t.push(vec![
                                    num(xi_mhz),
                                    num(nz.first().copied().unwrap_or(f64::NAN)),
                                    num(nz.get(1).copied().unwrap_or(f64::NAN)),
                                ]);
                            }
                            Err(e) => failures.push(Failure {
                                index: i,
                                at: format!("xi_mhz = {xi_mhz}"),
                                error: e.to_string(),
                            }),
                        }
                    }
                    t.write(&csv_path)?;
                }
            }
        }
        Kind::Pulse => {
            let block = cfg.pulse.as_ref().unwrap();
            let p = params.clone().unwrap();
            let program = PulseProgram {
                segments: block
                    .segments
                    .iter()
                    .map(|s| Segment {
                        xi: C64::new(TAU * s.xi_mhz, 0.0),
                        duration: s.duration,
                        ramp: if s.ramp_time > 0.0 {
                            Ramp::Linear { ramp_time: s.ramp_time }
                        } else {
                            Ramp::Step
                        },
                    })
                    .collect(),
            };
            let traj = evolve_program(
                &p,
                &program,
                &vacuum(p.dim).map_err(err)?,
                block.tol,
                block.samples_per_segment,
            )
            .map_err(err)?;
            let mut t = Table::new(&["t_us", "re_a", "im_a", "n", "re_a2", "im_a2"]);
            for (time, m) in traj.times.iter().zip(traj.moments.iter()) {
                let mut row = vec![num(*time)];
                row.extend(cnum(m.m10));
                row.push(num(m.m11));
                row.extend(cnum(m.m20));
                t.push(row);
            }
            t.write(&csv_path)?;
        }
        Kind::Loop => {
            let block = cfg.loop_.as_ref().unwrap();
            let p = params.clone().unwrap();
            let xis_mhz = block.xi_mhz.values()?;
            let xis: Vec<C64> =
                xis_mhz.iter().map(|&x| C64::new(TAU * x, 0.0)).collect();
            let opts_prep = PrepareOptions {
                prep_factor: block.prep_factor,
                ramp_time: block.ramp_time,
                settle_time: block.settle_time,
                tol: 1e-8,
            };
            let points = hysteresis_sweep(&p, &xis, &block.taus, &opts_prep);
            let mut t = Table::new(&[
                "xi_mhz", "tau_us", "re_a_low", "im_a_low", "n_low", "re_a_high", "im_a_high",
                "n_high",
            ]);
            for (i, pt) in points.iter().enumerate() {
                if let Some(e) = &pt.error {
                    failures.push(Failure {
                        index: i,
                        at: format!("xi_mhz = {}", xis_mhz[i]),
                        error: e.clone(),
                    });
                    continue;
                }
                for (k, &tau) in block.taus.iter().enumerate() {
                    let mut row = vec![num(xis_mhz[i]), num(tau)];
                    row.extend(cnum(pt.low[k].m10));
                    row.push(num(pt.low[k].m11));
                    row.extend(cnum(pt.high[k].m10));
                    row.push(num(pt.high[k].m11));
                    t.push(row);
                }
            }
            t.write(&csv_path)?;
            // loop area per delay over the drives that survived
            let mut ta = Table::new(&["tau_us", "area"]);
            for (k, &tau) in block.taus.iter().enumerate() {
                let low: Vec<C64> = points
                    .iter()
                    .filter(|pt| pt.error.is_none())
                    .map(|pt| pt.low[k].m10)
                    .collect();
                let high: Vec<C64> = points
                    .iter()
                    .filter(|pt| pt.error.is_none())
                    .map(|pt| pt.high[k].m10)
                    .collect();
                ta.push(vec![num(tau), num(loop_area(&low, &high))]);
            }
            let apath = opts.out_dir.join(format!("{label}_areas.csv"));
            ta.write(&apath)?;
            outputs.push(apath);
        }
        Kind::Dpt => {
            let block = cfg.dpt.as_ref().unwrap();
            let p0 = params.clone().unwrap();
            let xi0: Vec<f64> =
                block.xi0_mhz.values()?.iter().map(|&x| TAU * x).collect();
            let points =
                dpt_scan(&p0, &block.n_list, &xi0, block.compute_gap, opts.dim_override);
            let mut t = Table::new(&["n_scale", "xi0_mhz", "dim", "density", "gap"]);
            for (i, pt) in points.iter().enumerate() {
                dims_used.push(pt.dim);
                if let Some(e) = &pt.error {
                    failures.push(Failure {
                        index: i,
                        at: format!("N = {}, xi0_mhz = {}", pt.n_scale, pt.xi0 / TAU),
                        error: e.clone(),
                    });
                    continue;
                }
                t.push(vec![
                    num(pt.n_scale),
                    num(pt.xi0 / TAU),
                    pt.dim.to_string(),
                    num(pt.density.unwrap_or(f64::NAN)),
                    num(pt.gap.unwrap_or(f64::NAN)),
                ]);
            }
            t.write(&csv_path)?;
        }
        Kind::Tomography => {
            let block = cfg.tomography.as_ref().unwrap();
            let p0 = params.clone().unwrap();
            let grid = GridSpec::centered(block.grid_half_extent, block.grid_points);
            let mut t = Table::new(&[
                "xi0_mhz", "re_c", "im_c", "re_d", "im_d", "fit_residual", "modes", "re_a",
                "im_a", "n",
            ]);
            for (i, &xi0_mhz) in block.xi0_mhz.values()?.iter().enumerate() {
                let p = p0
                    .clone()
                    .with_xi(C64::new(block.n_scale.sqrt() * TAU * xi0_mhz, 0.0));
                let mut run = || -> Result<Vec<String>, String> {
                    let m = MomentSet::new(
                        moment(&p, 0, 1).map_err(err)?,
                        moment(&p, 1, 1).map_err(err)?.re,
                        moment(&p, 0, 2).map_err(err)?,
                    )
                    .map_err(err)?;
                    let guess = DrummondParams::from_system(&p).ok();
                    let (cd, residual) = fit_cd(&m, guess, seed).map_err(err)?;
                    let w = wigner_cd(cd.c, cd.d, &grid).map_err(err)?;
                    if Some(xi0_mhz) == block.wigner_at {
                        let wpath = opts.out_dir.join(format!("{label}_wigner.csv"));
                        write_wigner(&w, &wpath)?;
                        outputs.push(wpath);
                    }
                    let mut row = vec![num(xi0_mhz)];
                    row.extend(cnum(cd.c));
                    row.extend(cnum(cd.d));
                    row.push(num(residual));
                    row.push(w.count_modes(0.10).to_string());
                    row.extend(cnum(m.m10));
                    row.push(num(m.m11));
                    Ok(row)
                };
                match run() {
                    Ok(row) => t.push(row),
                    Err(e) => failures.push(Failure {
                        index: i,
                        at: format!("xi0_mhz = {xi0_mhz}"),
                        error: e,
                    }),
                }
            }
            t.write(&csv_path)?;
        }
        Kind::Calibrate => {
            let block = cfg.calibrate.as_ref().unwrap();
            let fit = run_calibration(block)?;
            let jpath = opts.out_dir.join(format!("{label}_fit.json"));
            std::fs::write(&jpath, serde_json::to_string_pretty(&fit).unwrap())
                .map_err(|e| e.to_string())?;
            outputs.push(jpath);
            let mut t = Table::new(&["name", "value"]);
            for (name, value) in &fit.estimates {
                t.push(vec![name.clone(), num(*value)]);
            }
            t.write(&csv_path)?;
        }
        Kind::Classical => {
            let p0 = params.clone().unwrap();
            let bounds = hysteresis_boundaries(p0.delta, p0.u, p0.gamma);
            extra_manifest.insert(
                "hysteresis_boundaries_mhz".into(),
                match bounds {
                    Some((lo, hi)) => json!([lo / TAU, hi / TAU]),
                    None => serde_json::Value::Null,
                },
            );
            let axis = cfg
                .classical
                .as_ref()
                .and_then(|c| c.xi_mhz.clone())
                .unwrap_or(Axis::List { list: vec![p0.xi.norm() / TAU] });
            let mut t = Table::new(&[
                "xi_mhz", "regime", "n_low", "n_mid", "n_high", "re_a_low", "im_a_low",
                "re_a_high", "im_a_high",
            ]);
            for (i, &xi_mhz) in axis.values()?.iter().enumerate() {
                let p = p0.clone().with_xi(C64::new(TAU * xi_mhz, 0.0));
                match solve_cubic(&p) {
                    Ok(sol) => {
                        let ns: Vec<f64> = sol.amplitudes.iter().map(|b| b.n).collect();
                        let lo = sol.amplitudes.first();
                        let hi = sol.amplitudes.last();
                        t.push(vec![
                            num(xi_mhz),
                            format!("{:?}", sol.regime).to_lowercase(),
                            num(ns.first().copied().unwrap_or(f64::NAN)),
                            num(if ns.len() == 3 { ns[1] } else { f64::NAN }),
                            num(ns.last().copied().unwrap_or(f64::NAN)),
                            num(lo.map(|b| b.alpha.re).unwrap_or(f64::NAN)),
                            num(lo.map(|b| b.alpha.im).unwrap_or(f64::NAN)),
                            num(hi.map(|b| b.alpha.re).unwrap_or(f64::NAN)),
                            num(hi.map(|b| b.alpha.im).unwrap_or(f64::NAN)),
                        ]);
                    }
                    Err(e) => failures.push(Failure {
                        index: i,
                        at: format!("xi_mhz = {xi_mhz}"),
                        error: e.to_string(),
                    }),
                }
            }
            t.write(&csv_path)?;
        }
    }
    outputs.insert(0, csv_path);

    let manifest_path = opts.out_dir.join(format!("{label}_manifest.json"));
    let wall_ms = started.elapsed().as_millis() as u64;
    dims_used.sort_unstable();
    dims_used.dedup();
    let mut manifest = json!({
        "label": label,
        "kind": cfg.kind.to_string(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "wall_ms": wall_ms,
        "threads": opts.threads,
        "dim_override": opts.dim_override,
        "truncation_dims": dims_used,
        "params": cfg.params,
        "failures": failures,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    for (k, v) in extra_manifest {
        manifest.as_object_mut().unwrap().insert(k, v);
    }
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| e.to_string())?;

    let n_failed = manifest["failures"].as_array().unwrap().len();
    if n_failed > 0 {
        eprintln!("{n_failed} point(s) failed; see {}", manifest_path.display());
        return Ok(1);
    }
    println!("wrote {}", manifest_path.display());
    Ok(0)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// One steady-state row: moments, g², Gaussian squeezing diagnostics.
fn sweep_point(p: &SystemParams, method: SweepMethod) -> Result<Vec<String>, String> {
    let (m10, m11, m20, m22) = match method {
        SweepMethod::Exact => (
            moment(p, 0, 1).map_err(err)?,
            moment(p, 1, 1).map_err(err)?.re,
            moment(p, 0, 2).map_err(err)?,
            moment(p, 2, 2).map_err(err)?.re,
        ),
        SweepMethod::Numeric => {
            let ss = steady_state(&build(p).map_err(err)?).map_err(err)?;
            if !duffing_core::fock::truncation_converged(&ss) {
                return Err(format!("truncation tail too heavy at D = {}", p.dim));
            }
            (
                trace_moment(ss.matrix(), 0, 1),
                trace_moment(ss.matrix(), 1, 1).re,
                trace_moment(ss.matrix(), 0, 2),
                trace_moment(ss.matrix(), 2, 2).re,
            )
        }
    };
    let s_db = squeezing_level(m10, m11, m20).map(num).unwrap_or_else(|_| "nan".into());
    let dev = match method {
        SweepMethod::Exact => gaussian_moment_deviation(p).map(num).unwrap_or_else(|_| "nan".into()),
        SweepMethod::Numeric => {
            // same Wick construction, from the numeric moments
            let nbar = m11 - m10.norm_sqr();
            let m = m20 - m10 * m10;
            let wick = m10.norm_sqr() * m10.norm_sqr()
                + 4.0 * m10.norm_sqr() * nbar
                + 2.0 * (m10.conj() * m10.conj() * m).re
                + 2.0 * nbar * nbar
                + m.norm_sqr();
            num((m22 - wick).abs() / m22.abs().max(1e-12))
        }
    };
    let mut row = cnum(m10);
    row.push(num(m11));
    row.extend(cnum(m20));
    row.push(num(if m11 > 1e-12 { m22 / (m11 * m11) } else { f64::NAN }));
    row.push(s_db);
    row.push(dev);
    Ok(row)
}

/// Slowest `count` eigenvalues, dense or iterative by dimension.
fn spectral_for(p: &SystemParams, count: usize) -> Result<Vec<C64>, String> {
    let l = build(p).map_err(err)?;
    let spec = if p.dim <= DENSE_DIM_LIMIT {
        spectrum(&l, Some(count)).map_err(err)?
    } else {
        spectrum_iterative(&l, count).map_err(err)?
    };
    Ok(spec.eigenvalues.iter().take(count).cloned().collect())
}

fn write_wigner(w: &WignerGrid, path: &Path) -> Result<(), String> {
    let xs = w.spec.xs();
    let ps = w.spec.ps();
    let mut text = String::from("x,p,w\n");
    for (ix, &x) in xs.iter().enumerate() {
        for (ip, &p) in ps.iter().enumerate() {
            writeln!(text, "{x:?},{p:?},{:?}", w.values[[ix, ip]]).unwrap();
        }
    }
    std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn read_csv_columns(path: &str, cols: usize) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading {path}: {e}"))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        if fields.len() != cols {
            return Err(format!("{path}:{}: expected {cols} columns, got {}", lineno + 1, fields.len()));
        }
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        rows.push(parsed.map_err(|e| format!("{path}:{}: {e}", lineno + 1))?);
    }
    if rows.is_empty() {
        return Err(format!("{path}: no data rows"));
    }
    Ok(rows)
}

fn run_calibration(block: &CalibrateBlock) -> Result<duffing_core::chain::CalibrationFit, String> {
    let chain_of = || -> Result<ChainModel, String> {
        Ok(ChainModel {
            gain_db: block.gain_db.ok_or("calibrate: gain_db required")?,
            n_noise: block.n_noise.ok_or("calibrate: n_noise required")?,
            bandwidth_hz: block.bandwidth_hz.ok_or("calibrate: bandwidth_hz required")?,
            omega: TAU * 1e9 * block.omega_ghz.ok_or("calibrate: omega_ghz required")?,
            gamma_m: block.gamma_m.ok_or("calibrate: gamma_m required")?,
            gain_correction_db: -3.0,
        })
    };
    match block.mode {
        CalibrateMode::Output => {
            let rows = read_csv_columns(&block.data, 2)?;
            let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
            let omega = TAU * 1e9 * block.omega_ghz.ok_or("calibrate: omega_ghz required")?;
            let bw = block.bandwidth_hz.ok_or("calibrate: bandwidth_hz required")?;
            fit_output_calibration(&samples, omega, bw).map_err(err)
        }
        CalibrateMode::Input => {
            let rows = read_csv_columns(&block.data, 2)?;
            let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
            fit_input_calibration(&samples, &chain_of()?).map_err(err)
        }
        CalibrateMode::Reflection => {
            let rows = read_csv_columns(&block.data, 3)?;
            let ws: Vec<f64> = rows.iter().map(|r| r[0] * TAU).collect();
            let s22: Vec<C64> = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
            let (_, fit) = fit_reflection(&ws, &s22).map_err(err)?;
            Ok(fit)
        }
    }
}
