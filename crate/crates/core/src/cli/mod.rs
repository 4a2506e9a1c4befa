//! Command-line front end: option parsing, deterministic execution and reporting.
//!
//! Every subcommand accepts its options as flags or through `--config <file>` holding flat
//! `key = value` lines; flags win. Outputs start with a provenance line and are written
//! atomically when `--output` is given. Exit status: 0 success, 1 numerical failure,
//! 2 configuration or i/o error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::constants::{eta_and_c, region_bounds_at, self_similar_table};
use crate::error::{Error, Result};
use crate::mellin::{numeric_mellin, MellinClosedForm};
use crate::sim::lattice::Lattice;
use crate::sim::noise::{build_noise_basis, l2_drift_coefficient};
use crate::sim::run_ensemble;
use crate::symbol::fit::{fit_rho, local_slopes};
use crate::symbol::mc::{mc_all, Geometry};
use crate::symbol::reduced::symbol_parts;
use config::{optional, parse_key_values, required, sim_config, KeySpec, Resolved, SIMULATE_KEYS};
use output::{csv, emit, flatten, json, num, provenance};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "KLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "klab", version, about = "Constants, symbol checks and lattice simulations of the passive vector model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` file supplying any option of this subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file, written atomically; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Output format. Series default to csv, scalar tables to json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Admissible region roots for a dimension and roughness exponent.
    Region {
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        /// Also report the α-roots at this Sobolev index.
        #[arg(long)]
        s: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Every closed-form constant at one parameter point.
    Constants {
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form Mellin transform against numeric quadrature.
    MellinCheck {
        /// `lorentzian` (params `b`) or `angular` (params `a,b,s`).
        #[arg(long)]
        family: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        params: Option<String>,
        /// Evaluation point `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        z: Option<String>,
        /// Relative tolerance of the numeric transform [default: 1e-10].
        #[arg(long)]
        rel_tol: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Symbol integrals on a grid of |n| with power-law diagnostics.
    VerifyBound {
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        /// Comma-separated |n| values [default: 8,16,32,64,128,256].
        #[arg(long)]
        lambdas: Option<String>,
        /// Monte Carlo samples per |n| for an independent check of the symbol; 0 disables.
        #[arg(long)]
        mc_samples: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Ensemble simulation on a periodic lattice; options come from `--config`.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// gnuplot data files for the region, the symbol and the lattice noise.
    Report {
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        /// Cutoffs for the lattice table [default: 4,8,16].
        #[arg(long)]
        n_max_list: Option<String>,
        /// Directory receiving the data files [default: klab-report].
        #[arg(long)]
        out_dir: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<String>,
    },
}

/// Parses `args`, runs the subcommand and returns the process exit status.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("klab: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::config(0, format!("{THREADS_ENV} = {raw}: expected a positive integer")))?;
    // The global pool can only be set once per process; later calls keep the first size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn read_config(path: Option<&Path>) -> Result<Vec<(String, String, usize)>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config(0, format!("cannot read config {}: {e}", p.display())))?;
            parse_key_values(&text)
        }
    }
}

fn resolve(schema: &[KeySpec], config: Option<&Path>, flags: &[(&str, Option<String>)]) -> Result<Resolved> {
    Resolved::new(schema, &read_config(config)?, flags)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Region { d, alpha, s, common } => {
            const KEYS: &[KeySpec] = &[required("d"), required("alpha"), optional("s", "none"), optional("seed", "0")];
            let r = resolve(
                KEYS,
                common.config.as_deref(),
                &[("d", d.clone()), ("alpha", alpha.clone()), ("s", s.clone()), ("seed", common.seed.clone())],
            )?;
            let text = region(&r, common.format.unwrap_or(Format::Json))?;
            emit(common.output.as_deref(), &text)
        }
        Command::Constants { d, s, alpha, common } => {
            const KEYS: &[KeySpec] = &[required("d"), required("s"), required("alpha"), optional("seed", "0")];
            let r = resolve(
                KEYS,
                common.config.as_deref(),
                &[("d", d.clone()), ("s", s.clone()), ("alpha", alpha.clone()), ("seed", common.seed.clone())],
            )?;
            let text = constants(&r, common.format.unwrap_or(Format::Json))?;
            emit(common.output.as_deref(), &text)
        }
        Command::MellinCheck {
            family,
            params,
            z,
            rel_tol,
            common,
        } => {
            const KEYS: &[KeySpec] = &[
                required("family"),
                required("params"),
                required("z"),
                optional("rel_tol", "1e-10"),
                optional("seed", "0"),
            ];
            let r = resolve(
                KEYS,
                common.config.as_deref(),
                &[
                    ("family", family.clone()),
                    ("params", params.clone()),
                    ("z", z.clone()),
                    ("rel_tol", rel_tol.clone()),
                    ("seed", common.seed.clone()),
                ],
            )?;
            let text = mellin_check(&r, common.format.unwrap_or(Format::Json))?;
            emit(common.output.as_deref(), &text)
        }
        Command::VerifyBound {
            d,
            s,
            alpha,
            lambdas,
            mc_samples,
            common,
        } => {
            const KEYS: &[KeySpec] = &[
                required("d"),
                required("s"),
                required("alpha"),
                optional("lambdas", "8,16,32,64,128,256"),
                optional("mc_samples", "0"),
                optional("seed", "0"),
            ];
            let r = resolve(
                KEYS,
                common.config.as_deref(),
                &[
                    ("d", d.clone()),
                    ("s", s.clone()),
                    ("alpha", alpha.clone()),
                    ("lambdas", lambdas.clone()),
                    ("mc_samples", mc_samples.clone()),
                    ("seed", common.seed.clone()),
                ],
            )?;
            let text = verify_bound(&r, common.format.unwrap_or(Format::Csv))?;
            emit(common.output.as_deref(), &text)
        }
        Command::Simulate { common } => {
            let path = common
                .config
                .as_deref()
                .ok_or_else(|| Error::config(0, "simulate needs --config <file>"))?;
            let r = resolve(SIMULATE_KEYS, Some(path), &[("seed", common.seed.clone())])?;
            let text = simulate(&r, common.format.unwrap_or(Format::Csv))?;
            emit(common.output.as_deref(), &text)
        }
        Command::Report {
            d,
            s,
            alpha,
            n_max_list,
            out_dir,
            config,
            seed,
        } => {
            const KEYS: &[KeySpec] = &[
                optional("d", "3"),
                optional("s", "1.25"),
                optional("alpha", "0.25"),
                optional("n_max_list", "4,8,16"),
                optional("out_dir", "klab-report"),
                optional("seed", "0"),
            ];
            let r = resolve(
                KEYS,
                config.as_deref(),
                &[
                    ("d", d.clone()),
                    ("s", s.clone()),
                    ("alpha", alpha.clone()),
                    ("n_max_list", n_max_list.clone()),
                    ("out_dir", out_dir.clone()),
                    ("seed", seed.clone()),
                ],
            )?;
            for path in report(&r)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn header(command: &str, r: &Resolved) -> String {
    provenance(command, &r.echo())
}

/// One-row CSV of a flat JSON object.
fn table_csv(header: &str, fields: &Map<String, Value>) -> String {
    let cell = |v: &Value| match v {
        Value::Null => String::new(),
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), num),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    };
    let keys: Vec<&str> = fields.keys().map(|k| k.as_str()).collect();
    let vals: Vec<String> = fields.values().map(cell).collect();
    format!("# {header}\n{}\n{}\n", keys.join(","), vals.join(","))
}

fn scalar_table(header: &str, fields: Map<String, Value>, format: Format) -> Result<String> {
    match format {
        Format::Json => json(header, fields),
        Format::Csv => Ok(table_csv(header, &fields)),
    }
}

fn to_flat<T: serde::Serialize>(v: &T) -> Result<Map<String, Value>> {
    Ok(flatten(serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))?))
}

/// `region`: roots of the admissible region for `(d, α)`.
pub fn region(r: &Resolved, format: Format) -> Result<String> {
    let d = r.usize("d")?;
    if d < 2 {
        return Err(r.error("d", "violates d >= 2"));
    }
    let alpha = r.f64("alpha")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(r.error("alpha", "violates 0 < α < 1"));
    }
    let s = match r.raw("s") {
        "none" => None,
        _ => Some(r.f64("s")?),
    };
    let rb = region_bounds_at(d, alpha, s)?;
    scalar_table(&header("region", r), to_flat(&rb)?, format)
}

/// `constants`: the constants table merged with the region roots at `(d, α, s)`.
pub fn constants(r: &Resolved, format: Format) -> Result<String> {
    let p = r.model_params()?;
    let table = self_similar_table(&p)?;
    let mut fields = to_flat(&region_bounds_at(p.d, p.alpha, Some(p.s))?)?;
    fields.extend(to_flat(&table)?);
    scalar_table(&header("constants", r), fields, format)
}

/// `mellin-check`: closed form against numeric quadrature at one point.
pub fn mellin_check(r: &Resolved, format: Format) -> Result<String> {
    let params = r.f64_list("params")?;
    let family = r.raw("family");
    let cf = match (family, params.as_slice()) {
        ("lorentzian", &[b]) => MellinClosedForm::lorentzian(b),
        ("angular", &[a, b, s]) => MellinClosedForm::angular(a, b, s),
        ("lorentzian", _) => return Err(r.error("params", "lorentzian takes one parameter `b`")),
        ("angular", _) => return Err(r.error("params", "angular takes three parameters `a,b,s`")),
        _ => return Err(r.error("family", "expected `lorentzian` or `angular`")),
    }
    .map_err(|e| r.error("params", e))?;
    let zs = r.f64_list("z")?;
    let z = match zs.as_slice() {
        &[re] => Complex64::new(re, 0.0),
        &[re, im] => Complex64::new(re, im),
        _ => return Err(r.error("z", "expected `re,im`")),
    };
    let (lo, hi) = cf.fundamental_strip;
    if !(z.re > lo && z.re < hi) {
        return Err(r.error("z", format!("Re z violates {lo} < Re z < {hi} (fundamental strip)")));
    }
    let rel_tol = r.f64("rel_tol")?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(r.error("rel_tol", "violates 0 < rel_tol < 1"));
    }
    let closed = cf.eval(z)?;
    let numeric = numeric_mellin(|t| cf.function(t).unwrap_or(f64::NAN), z, (lo, hi), rel_tol)?;
    let diff = (closed - numeric.value).norm();
    let mut m = Map::new();
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    put("family", Value::String(family.to_string()));
    put("params", serde_json::json!(params));
    put("z_re", serde_json::json!(z.re));
    put("z_im", serde_json::json!(z.im));
    put("strip_lo", serde_json::json!(lo));
    put("strip_hi", serde_json::json!(hi));
    put("closed_re", serde_json::json!(closed.re));
    put("closed_im", serde_json::json!(closed.im));
    put("numeric_re", serde_json::json!(numeric.value.re));
    put("numeric_im", serde_json::json!(numeric.value.im));
    put("numeric_error_estimate", serde_json::json!(numeric.error));
    put("numeric_evals", serde_json::json!(numeric.evals));
    put("abs_discrepancy", serde_json::json!(diff));
    put("rel_discrepancy", serde_json::json!(diff / closed.norm()));
    scalar_table(&header("mellin-check", r), m, format)
}

const VERIFY_COLUMNS: [&str; 9] = [
    "lambda", "i_tra", "i_str", "i_mix", "h_form", "err", "eta_fit", "slope_fit", "rho_fit",
];

/// `verify-bound`: reduced-quadrature symbol on a `λ` grid.
///
/// `eta_fit` is the local prefactor `−h(λ)λ^{2s−2+2α}`, `slope_fit` the local log-slope of
/// `|h|`, and `rho_fit` the single `ρ̂` bounding `|h + ηλ^{−2s+2−2α}|λ^{2s}` on the grid.
/// With Monte Carlo enabled two columns follow: `h_mc` and its standard error.
pub fn verify_bound(r: &Resolved, format: Format) -> Result<String> {
    let p = r.model_params()?;
    p.require_symbol_range().map_err(|e| match e {
        Error::Domain(msg) => r.error("s", msg),
        other => other,
    })?;
    let lambdas = r.f64_list("lambdas")?;
    if lambdas.len() < 2 || lambdas.iter().any(|l| *l <= 0.0) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(r.error("lambdas", "need at least two positive, strictly increasing values"));
    }
    let mc_samples = r.u64("mc_samples")?;
    let seed = r.u64("seed")?;
    let parts: Vec<_> = lambdas.par_iter().map(|&l| symbol_parts(&p, l)).collect::<Result<_>>()?;
    let h: Vec<f64> = parts.iter().map(|x| x.h_form.value).collect();
    let (eta, _) = eta_and_c(&p)?;
    let rho = fit_rho(&lambdas, &h, eta, p.s, p.alpha);
    let slopes = local_slopes(&lambdas, &h);
    let e = 2.0 * p.s - 2.0 + 2.0 * p.alpha;
    let mc: Vec<Option<(f64, f64)>> = if mc_samples > 0 {
        lambdas
            .iter()
            .map(|&l| {
                let res = mc_all(&p, &Geometry::canonical(p.d, l), mc_samples, seed)?;
                Ok(Some((res[3].value, res[3].error_estimate)))
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; lambdas.len()]
    };
    let mut columns: Vec<&str> = VERIFY_COLUMNS.to_vec();
    if mc_samples > 0 {
        columns.extend(["h_mc", "h_mc_stderr"]);
    }
    let rows: Vec<Vec<f64>> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let x = &parts[i];
            let mut row = vec![
                l,
                x.i_tra.value,
                x.i_str.value,
                x.i_mix.value,
                x.h_form.value,
                x.h_form.error_estimate,
                -x.h_form.value * l.powf(e),
                slopes[i],
                rho,
            ];
            if let Some((v, se)) = mc[i] {
                row.extend([v, se]);
            }
            row
        })
        .collect();
    series(&header("verify-bound", r), &columns, &rows, format)
}

/// Series as CSV, or as a JSON object of columns.
fn series(header: &str, columns: &[&str], rows: &[Vec<f64>], format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(csv(header, columns, rows)),
        Format::Json => {
            let mut m = Map::new();
            for (j, c) in columns.iter().enumerate() {
                m.insert(c.to_string(), serde_json::json!(rows.iter().map(|r| r[j]).collect::<Vec<_>>()));
            }
            json(header, m)
        }
    }
}

const SIMULATE_COLUMNS: [&str; 7] = [
    "t",
    "mean_hs",
    "stderr_hs",
    "mean_gain",
    "stderr_gain",
    "mean_l2",
    "stderr_l2",
];

/// `simulate`: ensemble norms at the output times.
pub fn simulate(r: &Resolved, format: Format) -> Result<String> {
    let cfg = sim_config(r)?;
    let out = run_ensemble(&cfg).map_err(|e| match e {
        Error::StabilityGuard { limit, .. } => r.error("dt", format!("violates the stability guard dt <= {}", num(limit))),
        other => other,
    })?;
    let rows: Vec<Vec<f64>> = (0..out.times.len())
        .map(|i| {
            vec![
                out.times[i],
                out.mean_hs_norm_sq[i],
                out.stderr_hs_norm_sq[i],
                out.mean_gain_norm_sq[i],
                out.stderr_gain_norm_sq[i],
                out.mean_l2_sq[i],
                out.stderr_l2_sq[i],
            ]
        })
        .collect();
    series(&header("simulate", r), &SIMULATE_COLUMNS, &rows, format)
}

/// `report`: gnuplot data files; returns the paths written.
pub fn report(r: &Resolved) -> Result<Vec<PathBuf>> {
    let p = r.model_params()?;
    p.require_symbol_range().map_err(|e| match e {
        Error::Domain(msg) => r.error("s", msg),
        other => other,
    })?;
    let n_list = r.f64_list("n_max_list")?;
    if n_list.iter().any(|n| *n < 1.0 || n.fract() != 0.0) {
        return Err(r.error("n_max_list", "expected positive integers"));
    }
    let dir = PathBuf::from(r.raw("out_dir"));
    std::fs::create_dir_all(&dir).map_err(|e| r.error("out_dir", e))?;
    let head = header("report", r);
    let mut written = Vec::new();
    let mut write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        output::atomic_write(&path, format!("# {head}\n{body}").as_bytes())?;
        written.push(path);
        Ok(())
    };

    // One gnuplot index per dimension.
    let mut region = String::from("# alpha s_hat_minus s_upper (s_upper = min(s_hat_plus, d/2)); index i is d = i + 3\n");
    for d in 3..=6 {
        let top = region_bounds_at(d, 0.5, None)?.alpha_hat_plus.unwrap_or(1.0).min(1.0);
        region.push_str(&format!("# d = {d}\n"));
        for k in 1..200 {
            let a = top * k as f64 / 200.0;
            let rb = region_bounds_at(d, a, None)?;
            if let (Some(lo), Some(hi)) = (rb.s_hat_minus, rb.s_hat_plus) {
                region.push_str(&format!("{} {} {}\n", num(a), num(lo), num(hi.min(rb.s_cap))));
            }
        }
        region.push_str("\n\n");
    }
    write("region.dat", region)?;

    let lambdas: Vec<f64> = (0..=16).map(|k| 2f64.powf(0.5 * k as f64)).collect();
    let parts: Vec<_> = lambdas.par_iter().map(|&l| symbol_parts(&p, l)).collect::<Result<_>>()?;
    let (eta, _) = eta_and_c(&p)?;
    let e = 2.0 * p.s - 2.0 + 2.0 * p.alpha;
    let mut sym = String::from("# lambda minus_h eta_lambda_power i_tra i_str i_mix err\n");
    for (l, x) in lambdas.iter().zip(&parts) {
        sym.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            num(*l),
            num(-x.h_form.value),
            num(eta * l.powf(-e)),
            num(x.i_tra.value),
            num(x.i_str.value),
            num(x.i_mix.value),
            num(x.h_form.error_estimate)
        ));
    }
    write("symbol.dat", sym)?;

    let mut lat = String::from("# n_max l2_drift_coefficient c0_truncated\n");
    for n in n_list {
        let l = Lattice::new(p.d, n as usize)?;
        let nb = build_noise_basis(&l, p.alpha)?;
        lat.push_str(&format!("{} {} {}\n", n, num(l2_drift_coefficient(&l, &nb)), num(nb.c0_truncated)));
    }
    write("lattice.dat", lat)?;
    Ok(written)
}
