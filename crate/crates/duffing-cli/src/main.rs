//! `duffing-dpt`: experiment runner for the driven-dissipative Duffing
//! oscillator library.
//!
//! Exit codes: 0 success, 1 per-point compute failures (manifest still
//! written), 2 config/CLI validation errors.

mod config;
mod run;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use run::RunOptions;
use std::path::PathBuf;

const RECIPES: &[(&str, &str)] = &[
    ("fig1b", include_str!("../recipes/fig1b.toml")),
    ("fig1c", include_str!("../recipes/fig1c.toml")),
    ("fig2a_loop", include_str!("../recipes/fig2a_loop.toml")),
    ("fig2b_area", include_str!("../recipes/fig2b_area.toml")),
    ("fig2c_gap", include_str!("../recipes/fig2c_gap.toml")),
    ("fig3", include_str!("../recipes/fig3.toml")),
    ("fig4", include_str!("../recipes/fig4.toml")),
    ("figs7_closure", include_str!("../recipes/figs7_closure.toml")),
    ("figs8_gap", include_str!("../recipes/figs8_gap.toml")),
    ("figs11_squeezing", include_str!("../recipes/figs11_squeezing.toml")),
    ("figs12_moments", include_str!("../recipes/figs12_moments.toml")),
];

#[derive(Parser)]
#[command(name = "duffing-dpt", version, about = "Driven-dissipative Duffing oscillator toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute an experiment config
    Run {
        /// Path to a TOML config file (or JSON with --json)
        config: Option<PathBuf>,
        /// Run a bundled recipe instead of a config file
        #[arg(long, conflicts_with = "config")]
        recipe: Option<String>,
        /// Parse the config file as JSON instead of TOML
        #[arg(long)]
        json: bool,
        /// Output directory for CSV artifacts and the manifest
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (overrides DUFFING_DPT_THREADS; default all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Override the seed recorded in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Override the Fock-space truncation everywhere
        #[arg(long)]
        dim_override: Option<usize>,
    },
    /// List the bundled recipes
    Recipes {
        /// Print the full TOML of one recipe
        #[arg(long)]
        show: Option<String>,
    },
    /// Classical fixed points and hysteresis boundaries for one parameter set
    #[command(allow_negative_numbers = true)]
    Classical {
        /// Detuning Δ/2π in MHz
        #[arg(long)]
        delta_mhz: f64,
        /// Kerr coefficient U/2π in MHz
        #[arg(long)]
        u_mhz: f64,
        /// Energy decay rate in 1/μs
        #[arg(long)]
        gamma: f64,
        /// Drive ξ/2π in MHz; omit to report boundaries only
        #[arg(long)]
        xi_mhz: Option<f64>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { config, recipe, json, out, threads, seed, dim_override } => {
            cmd_run(config, recipe, json, out, threads, seed, dim_override)
        }
        Cmd::Recipes { show } => cmd_recipes(show),
        Cmd::Classical { delta_mhz, u_mhz, gamma, xi_mhz } => {
            cmd_classical(delta_mhz, u_mhz, gamma, xi_mhz)
        }
    };
    std::process::exit(code);
}

fn fail(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    2
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: Option<PathBuf>,
    recipe: Option<String>,
    json: bool,
    out: PathBuf,
    threads: Option<usize>,
    seed: Option<u64>,
    dim_override: Option<usize>,
) -> i32 {
    let text = match (&config, &recipe) {
        (Some(path), None) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(&format!("reading {}: {e}", path.display())),
        },
        (None, Some(name)) => match RECIPES.iter().find(|(n, _)| n == name) {
            Some((_, t)) => t.to_string(),
            None => {
                return fail(&format!(
                    "no recipe named \"{name}\"; run `duffing-dpt recipes` for the list"
                ))
            }
        },
        _ => return fail("pass a config file or --recipe NAME"),
    };
    let cfg = match ExperimentConfig::parse(&text, json) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let threads = threads.or_else(|| {
        std::env::var("DUFFING_DPT_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n == 0 {
            return fail("--threads must be positive");
        }
        init_thread_pool(n);
    }
    let opts = RunOptions { out_dir: out, seed, dim_override, threads };
    match run::execute(&cfg, &opts) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

#[cfg(feature = "parallel")]
fn init_thread_pool(n: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        eprintln!("warning: could not size the thread pool: {e}");
    }
}

#[cfg(not(feature = "parallel"))]
fn init_thread_pool(_n: usize) {}

fn cmd_recipes(show: Option<String>) -> i32 {
    match show {
        Some(name) => match RECIPES.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => {
                // a recipe that no longer validates is a packaging bug;
                // surface it here rather than at run time
                if let Err(e) = ExperimentConfig::parse(text, false) {
                    return fail(&format!("recipe \"{name}\" is invalid: {e}"));
                }
                print!("{text}");
                0
            }
            None => fail(&format!("no recipe named \"{name}\"")),
        },
        None => {
            for (name, text) in RECIPES {
                let blurb = text
                    .lines()
                    .next()
                    .unwrap_or("")
                    .trim_start_matches('#')
                    .trim();
                println!("{name:<18} {blurb}");
            }
            0
        }
    }
}

fn cmd_classical(delta_mhz: f64, u_mhz: f64, gamma: f64, xi_mhz: Option<f64>) -> i32 {
    use duffing_core::classical::{hysteresis_boundaries, solve_cubic};
    use num_complex::Complex64 as C64;
    use std::f64::consts::TAU;

    match hysteresis_boundaries(TAU * delta_mhz, TAU * u_mhz, gamma) {
        Some((lo, hi)) => println!(
            "hysteresis boundaries: xi/2pi = {:.6} .. {:.6} MHz",
            lo / TAU,
            hi / TAU
        ),
        None => println!("no bistable window at these parameters"),
    }
    let Some(xi_mhz) = xi_mhz else { return 0 };
    let p = match duffing_core::SystemParams::new(
        TAU * delta_mhz,
        TAU * u_mhz,
        C64::new(TAU * xi_mhz, 0.0),
        gamma,
        8,
    ) {
        Ok(p) => p,
        Err(e) => return fail(&e.to_string()),
    };
    match solve_cubic(&p) {
        Ok(sol) => {
            println!("xi/2pi = {xi_mhz} MHz: {:?}", sol.regime);
            for b in &sol.amplitudes {
                println!(
                    "  n = {:.6}  alpha = {:.6} {:+.6}i  stable: {}",
                    b.n, b.alpha.re, b.alpha.im, b.stable
                );
            }
            0
        }
        Err(e) => fail(&e.to_string()),
    }
}
