//! Command-line front end. Every command is a pure function of its config
//! file, flags and seed.
//!
//! Config files are flat `key = value` text (`#` starts a comment). Each
//! command accepts its own key set and rejects anything else with the line
//! number.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::baselines::{shamai_bettesh_asymptotic, tdma_classical};
use crate::bounds::{evaluate, from_db, to_db, BoundEvaluation, BoundKind, SystemConfig};
use crate::error::{Error, Result};
use crate::mc_sim::{amp_experiment, beta_law_check, projection_pupe, AmpOptions};
use crate::replica::replica_pupe;
use crate::scalar_channel::SectionSize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const THREADS_ENV: &str = "MANYMAC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "manymac", version, about = "Energy-per-bit bounds for the many-user fading MAC")]
pub struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to MANYMAC_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Energy-per-bit curves over a log-spaced mu grid (CSV).
    Sweep,
    /// One bound (or replica point) as a JSON record.
    Point,
    /// Replica PUPE and multiuser efficiency curves (long CSV).
    Replica,
    /// Monte Carlo experiments: amp, projection or beta-law.
    Simulate,
    /// Classical-regime frontier: Shamai-Bettesh limit and TDMA (CSV).
    Classical,
}

impl Command {
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Sweep => &["bounds", "k", "eps", "mu_min", "mu_max", "mu_points", "seed", "threads"],
            Command::Point => &["bound", "k", "mu", "eps", "ebno_db", "seed", "threads"],
            Command::Replica => &["k", "mu_list", "ebno_db_min", "ebno_db_max", "ebno_db_step", "seed", "threads"],
            Command::Simulate => &[
                "experiment", "n", "mu", "k", "ptot", "t_max", "runs", "onsager", "users", "m", "trials", "big_k", "t",
                "seed", "threads",
            ],
            Command::Classical => &["eps", "s_min", "s_max", "s_points", "seed", "threads"],
        }
    }
}

/// Parsed `key = value` settings with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, (String, usize)>,
}

impl Settings {
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::Config { line, msg: format!("expected `key = value`, got `{content}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(Error::Config { line, msg: format!("unknown key `{k}`; valid keys: {}", allowed.join(", ")) });
            }
            if s.values.insert(k.to_string(), (v.to_string(), line)).is_some() {
                return Err(Error::Config { line, msg: format!("duplicate key `{k}`") });
            }
        }
        Ok(s)
    }

    fn apply_overrides(&mut self, pairs: &[String], allowed: &[&str]) -> Result<()> {
        for p in pairs {
            let Some((k, v)) = p.split_once('=') else {
                return Err(Error::Usage(format!("--set expects KEY=VALUE, got `{p}`")));
            };
            let k = k.trim();
            if !allowed.contains(&k) {
                return Err(Error::Usage(format!("unknown key `{k}`; valid keys: {}", allowed.join(", "))));
            }
            self.values.insert(k.to_string(), (v.trim().to_string(), 0));
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.values.get(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| bad_value(key, v, *line)),
        }
    }

    fn get_str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).map(|(v, _)| v.as_str()).unwrap_or(default)
    }

    fn get_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some((v, line)) => {
                v.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad_value(key, v, *line))).collect()
            }
        }
    }
}

fn bad_value(key: &str, v: &str, line: usize) -> Error {
    let msg = format!("invalid value `{v}` for `{key}`");
    if line == 0 {
        Error::Usage(msg)
    } else {
        Error::Config { line, msg }
    }
}

/// `%.6f`, or `inf` for infinite values.
pub fn fmt_db(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.6}")
    }
}

fn round6(x: f64) -> Value {
    if x.is_finite() {
        json!((x * 1e6).round() / 1e6)
    } else {
        json!(fmt_db(x))
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_db(x))
    }
}

pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && min < max) || points < 2 {
        return Err(Error::Usage(format!("grid needs 0 < min < max and points >= 2, got ({min}, {max}, {points})")));
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|i| {
            if i == 0 {
                min
            } else if i + 1 == points {
                max
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

/// Output of one command: named files (or stdout) plus the exit status.
#[derive(Debug, Default)]
pub struct Outcome {
    pub main: String,
    /// Extra files written next to `--out`, as (suffix, contents).
    pub side: Vec<(String, String)>,
    pub infeasible_only: bool,
}

fn parse_bounds(list: &str) -> Result<Vec<BoundKind>> {
    list.split(',').map(|s| s.trim().parse::<BoundKind>()).collect()
}

fn gnuplot_script(csv_name: &str, columns: &[String], xlabel: &str, logx: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    if logx {
        let _ = writeln!(s, "set logscale x");
    }
    let plots: Vec<String> =
        (0..columns.len()).map(|i| format!("'{csv_name}' using 1:{} with lines title '{}'", i + 2, columns[i])).collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

fn cmd_sweep(s: &Settings, out_name: &str) -> Result<Outcome> {
    let bounds = parse_bounds(s.get_str("bounds", "amp,nocsi,csir,converse,tdma,tin"))?;
    let k: f64 = s.get("k", 100.0)?;
    let eps: f64 = s.get("eps", 0.1)?;
    let mus = log_grid(s.get("mu_min", 1e-4)?, s.get("mu_max", 0.3)?, s.get("mu_points", 25usize)?)?;
    let cfgs = mus.iter().map(|&mu| SystemConfig::new(k, mu, eps)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<BoundEvaluation>> = cfgs
        .par_iter()
        .map(|c| bounds.iter().map(|&b| evaluate(b, c).unwrap_or_else(|_| BoundEvaluation::infeasible(b))).collect())
        .collect();
    let cols: Vec<String> = bounds.iter().map(|b| format!("{}_db", b.name())).collect();
    let mut csv = format!("mu,{}\n", cols.join(","));
    let mut any = false;
    for (mu, row) in mus.iter().zip(&rows) {
        let cells: Vec<String> = row.iter().map(|e| fmt_db(e.ebno_db)).collect();
        any |= row.iter().any(|e| e.feasible);
        let _ = writeln!(csv, "{mu:.6e},{}", cells.join(","));
    }
    let gp = gnuplot_script(out_name, &cols, "mu", true);
    Ok(Outcome { main: csv, side: vec![(".gp".into(), gp)], infeasible_only: !any })
}

fn bound_record(e: &BoundEvaluation, cfg: &SystemConfig) -> Value {
    let w = &e.witness;
    json!({
        "bound": e.kind.name(),
        "k": cfg.k(),
        "mu": cfg.mu(),
        "eps": cfg.eps(),
        "feasible": e.feasible,
        "ebno_db": round6(e.ebno_db),
        "ebno_linear": num(e.ebno_linear),
        "ptot": num(e.ptot),
        "witness": {
            "theta": w.theta, "xi": w.xi, "rho": w.rho, "nu": w.nu,
            "active": w.active.map(|a| a.name()),
        },
        "flags": e.flags,
    })
}

fn cmd_point(s: &Settings) -> Result<Outcome> {
    let name = s.get_str("bound", "converse");
    let k: f64 = s.get("k", 100.0)?;
    let mu: f64 = s.get("mu", 1e-3)?;
    if name == "replica" {
        let ebno_db: f64 = s.get("ebno_db", 0.0)?;
        let p = replica_pupe(mu, from_db(ebno_db), SectionSize::new(k)?)?;
        let v = json!({
            "bound": "replica",
            "k": k,
            "mu": mu,
            "ebno_db": round6(ebno_db),
            "b2": p.b2,
            "eta_star": p.eta_star,
            "sigma2_eff": p.sigma2_eff,
            "pe": p.pe,
            "pe_saturated": p.pe_saturated,
            "rigor": p.rigor,
        });
        return Ok(Outcome { main: format!("{v}\n"), ..Outcome::default() });
    }
    let kind: BoundKind = name.parse()?;
    let cfg = SystemConfig::new(k, mu, s.get("eps", 0.1)?)?;
    let e = evaluate(kind, &cfg)?;
    Ok(Outcome { main: format!("{}\n", bound_record(&e, &cfg)), infeasible_only: !e.feasible, ..Outcome::default() })
}

fn cmd_replica(s: &Settings, out_name: &str) -> Result<Outcome> {
    let k: f64 = s.get("k", 100.0)?;
    let m = SectionSize::new(k)?;
    let mus = s.get_list("mu_list", &[1e-4, 1e-3, 0.006])?;
    let (lo, hi, step): (f64, f64, f64) = (s.get("ebno_db_min", -2.0)?, s.get("ebno_db_max", 6.0)?, s.get("ebno_db_step", 0.1)?);
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::Usage(format!("need ebno_db_step > 0 and max >= min, got ({lo}, {hi}, {step})")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    let jobs: Vec<(f64, f64)> = mus.iter().flat_map(|&mu| grid.iter().map(move |&db| (mu, db))).collect();
    let pts = jobs.par_iter().map(|&(mu, db)| replica_pupe(mu, from_db(db), m)).collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("mu,ebno_db,pe,eta_star\n");
    for ((mu, db), p) in jobs.iter().zip(&pts) {
        let _ = writeln!(csv, "{mu:.6e},{},{:.6e},{:.6}", fmt_db(*db), p.pe, p.eta_star);
    }
    let gp = format!(
        "set datafile separator ','\nset logscale y\nset xlabel 'Eb/N0 (dB)'\nset ylabel 'Pe'\n\
         plot '{out_name}' using 2:3 every ::1 with points title 'replica prediction'\n"
    );
    Ok(Outcome { main: csv, side: vec![(".gp".into(), gp)], infeasible_only: false })
}

fn cmd_simulate(s: &Settings, seed: u64) -> Result<Outcome> {
    match s.get_str("experiment", "amp") {
        "amp" => {
            let e = amp_experiment(
                s.get("n", 1024usize)?,
                s.get("mu", 0.25)?,
                s.get("k", 2u32)?,
                s.get("ptot", 10.0)?,
                s.get("t_max", 10usize)?,
                s.get("runs", 20usize)?,
                seed,
                AmpOptions { onsager: s.get("onsager", true)? },
            )?;
            let mut lines = String::new();
            for r in &e.runs {
                let _ = writeln!(lines, "{}", serde_json::to_string(r).expect("plain data"));
            }
            let summary = format!(
                "pupe_emp_mean,pupe_pred,stderr,n_runs,sigma2_inf\n{:.6e},{:.6e},{:.6e},{},{:.6e}\n",
                e.pupe_emp_mean, e.pupe_pred, e.stderr, e.n_runs, e.sigma2_inf
            );
            let mut traj = String::from("t,se,sigma2_emp_mean,deviation\n");
            for t in 0..e.se.len() {
                let _ = writeln!(traj, "{t},{:.6e},{:.6e},{:.6e}", e.se[t], e.sigma2_emp_mean[t], e.deviation[t]);
            }
            Ok(Outcome {
                main: lines,
                side: vec![(".summary.csv".into(), summary), (".trajectory.csv".into(), traj)],
                infeasible_only: false,
            })
        }
        "projection" => {
            let (n, users, m, ptot, trials) =
                (s.get("n", 16usize)?, s.get("users", 2usize)?, s.get("m", 4usize)?, s.get("ptot", 20.0)?, s.get("trials", 2000usize)?);
            let est = projection_pupe(n, users, m, ptot, trials, seed)?;
            let summary = format!("pupe_mean,stderr,trials\n{:.6e},{:.6e},{}\n", est.mean, est.stderr, est.trials);
            Ok(Outcome { main: summary, ..Outcome::default() })
        }
        "beta-law" => {
            let r = beta_law_check(s.get("n", 64usize)?, s.get("big_k", 16usize)?, s.get("t", 4usize)?, s.get("trials", 2000usize)?, seed)?;
            Ok(Outcome { main: format!("{}\n", serde_json::to_string(&r).expect("plain data")), ..Outcome::default() })
        }
        other => Err(Error::Usage(format!("unknown experiment `{other}`; valid: amp, projection, beta-law"))),
    }
}

/// Smallest `P_tot` whose limiting Shamai-Bettesh PUPE is at most `eps`.
fn sb_min_ptot(s: f64, eps: f64) -> Result<f64> {
    let ok = |p: f64| shamai_bettesh_asymptotic(s, p).map(|pe| pe <= eps);
    let mut hi = 1.0;
    while !ok(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn cmd_classical(s: &Settings, out_name: &str) -> Result<Outcome> {
    let eps: f64 = s.get("eps", 0.1)?;
    let grid = log_grid(s.get("s_min", 0.05)?, s.get("s_max", 4.0)?, s.get("s_points", 25usize)?)?;
    let rows = grid
        .par_iter()
        .map(|&sv| Ok((sb_min_ptot(sv, eps)? / sv, tdma_classical(sv, eps)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mut csv = String::from("s,sb_ebno_db,tdma_ebno_db\n");
    for (sv, (sb, td)) in grid.iter().zip(&rows) {
        let _ = writeln!(csv, "{sv:.6e},{},{}", fmt_db(to_db(*sb)), fmt_db(to_db(*td)));
    }
    let gp = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'Eb/N0 (dB)'\nset ylabel 'S'\n\
         plot '{out_name}' using 2:1 with lines, '{out_name}' using 3:1 with lines\n"
    );
    Ok(Outcome { main: csv, side: vec![(".gp".into(), gp)], infeasible_only: false })
}

fn thread_count(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag.or(config) {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Usage(format!("{THREADS_ENV} must be an integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs one command and writes its outputs; the result is the outcome
/// before writing, so callers can inspect it.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let allowed = cli.command.keys();
    let mut settings = match &cli.config {
        Some(p) => Settings::parse(&fs::read_to_string(p)?, allowed)?,
        None => Settings::default(),
    };
    settings.apply_overrides(&cli.set, allowed)?;
    let seed = match cli.seed {
        Some(s) => s,
        None => settings.get("seed", 1u64)?,
    };
    let threads = thread_count(cli.threads, settings.raw("threads").map(|_| settings.get("threads", 0usize)).transpose()?)?;
    let out_name = cli.out.as_ref().and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "-".into());
    let run = || match cli.command {
        Command::Sweep => cmd_sweep(&settings, &out_name),
        Command::Point => cmd_point(&settings),
        Command::Replica => cmd_replica(&settings, &out_name),
        Command::Simulate => cmd_simulate(&settings, seed),
        Command::Classical => cmd_classical(&settings, &out_name),
    };
    let outcome = match threads {
        Some(0) => return Err(Error::Usage("thread count must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Resource(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    match &cli.out {
        Some(path) => {
            fs::write(path, &outcome.main)?;
            for (suffix, text) in &outcome.side {
                fs::write(side_path(path, suffix), text)?;
            }
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(outcome.main.as_bytes())?;
            for (suffix, text) in &outcome.side {
                if suffix.ends_with(".csv") {
                    stdout.write_all(b"\n")?;
                    stdout.write_all(text.as_bytes())?;
                }
            }
        }
    }
    Ok(outcome)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(o) if o.infeasible_only => EXIT_INFEASIBLE,
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("manymac: {e}");
            exit_code(&e)
        }
    }
}
