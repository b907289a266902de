//! The `bhmft` command-line front end.
//!
//! Every subcommand takes the same flat set of flags; a JSON file passed with
//! `--config` supplies defaults and explicit flags override it. Each run
//! resolves the configuration, validates it, computes, and writes one artifact
//! atomically. Exit codes: 0 success, 1 failed contract, 2 configuration error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::coreshell::{
    check_holder, check_laplacian_cs, check_m2_bound, convergence_csv, convergence_table,
    core_shell_energy, m2_bound_coefficients, CoreShellBasis,
};
use crate::definetti::{verification_suite, CheckRecord, SuiteSettings};
use crate::error::Error;
use crate::lattice::{ground_energy_per_site, make_ball_graph, make_torus, BHParams, Graph};
use crate::meanfield::{linspace, minimize_scan_default, phase_scan, DEFAULT_ALPHA_THRESHOLD};
use crate::numerics::RngSeed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "BHMFT_THREADS";
/// Tolerance of the energy sandwich and the convergence-table sign check.
pub const SANDWICH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    PhaseDiagram,
    ConvergeZ,
    LatticeEd,
    DefinettiCheck,
    InequalitySuite,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::PhaseDiagram => "phase-diagram",
            Self::ConvergeZ => "converge-z",
            Self::LatticeEd => "lattice-ed",
            Self::DefinettiCheck => "definetti-check",
            Self::InequalitySuite => "inequality-suite",
        }
    }
}

/// All options; unset fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// JSON file with default values for any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads (default: BHMFT_THREADS, then the number of cores)
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,

    /// Hopping J
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    /// Chemical potential μ
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// On-site repulsion U
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    /// Fock cutoff
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    /// Phase grid as `<J points>x<μ points>`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// Mott threshold on |α|
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_threshold: Option<f64>,

    /// Coordination numbers, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<usize>>,

    /// Torus dimension
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Torus / ball-graph side length
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    /// Ball-graph radius (a ball graph replaces the torus when set)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Graph JSON to load instead of generating one
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    /// Write the graph used as JSON
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_out: Option<String>,

    /// Shell one-particle dimension minus one
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Number of shell particles
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,
    /// Reduced density matrix order
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_dim: Option<usize>,
    /// Random states per check
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    /// Monte-Carlo samples
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Random trial vectors per inequality
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl Params {
    /// Fields set in `self` win over `base`.
    pub fn merged_over(self, base: Params) -> Params {
        macro_rules! pick {
            ($($f:ident),*) => { Params { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            config,
            out,
            format,
            seed,
            threads,
            j,
            mu,
            u,
            n_max,
            j_min,
            j_max,
            mu_min,
            mu_max,
            grid,
            alpha_threshold,
            z,
            d,
            l,
            radius,
            graph,
            graph_out,
            m,
            big_n,
            k,
            core_dim,
            states,
            samples,
            trials
        )
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bhmft",
    version,
    about = "Bose-Hubbard mean-field limit toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean-field phase diagram over a (J/U, μ/U) grid
    PhaseDiagram(Params),
    /// Gap between mean-field and core-shell energies as z grows
    ConvergeZ(Params),
    /// Exact diagonalization on a small regular graph
    LatticeEd(Params),
    /// De Finetti, Schur and localization checks
    DefinettiCheck(Params),
    /// Moment-operator inequalities of the core-shell Hamiltonian
    InequalitySuite(Params),
}

/// Parsed and merged configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Contract(_) | Self::Failure(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidSize(_)
            | Error::DimensionGuard { .. }
            | Error::QuadratureBudget { .. }
            | Error::BadK { .. }
            | Error::BadExponents(..) => CliError::Config(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

/// Outcome of a successful parse.
#[derive(Debug)]
pub enum Parsed {
    Run(RunConfig),
    /// Help or version text to print; exit 0.
    Info(String),
}

/// Parse `argv` (without the program name) and merge `--config`.
pub fn parse_config<I, T>(argv: I) -> Result<Parsed, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if args.is_empty() {
        return Err(CliError::Config(usage()));
    }
    let cli = match Cli::try_parse_from(std::iter::once(OsString::from("bhmft")).chain(args)) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Ok(Parsed::Info(e.to_string()))
                }
                _ => Err(CliError::Config(e.to_string())),
            };
        }
    };
    let (command, flags) = match cli.command {
        Command::PhaseDiagram(p) => (CommandKind::PhaseDiagram, p),
        Command::ConvergeZ(p) => (CommandKind::ConvergeZ, p),
        Command::LatticeEd(p) => (CommandKind::LatticeEd, p),
        Command::DefinettiCheck(p) => (CommandKind::DefinettiCheck, p),
        Command::InequalitySuite(p) => (CommandKind::InequalitySuite, p),
    };
    let params = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
            let file: Params = serde_json::from_str(&text).map_err(|e| config_err("config", e))?;
            flags.merged_over(file)
        }
        None => flags,
    };
    Ok(Parsed::Run(RunConfig { command, params }))
}

pub fn usage() -> String {
    use clap::CommandFactory;
    Cli::command().render_help().to_string()
}

/// Fill per-command defaults and validate every value.
pub fn resolve(cfg: &RunConfig) -> Result<RunConfig, CliError> {
    let mut p = cfg.params.clone();
    let cmd = cfg.command;
    p.config = None;
    p.threads = None;
    p.seed.get_or_insert(42);
    let default_format = match cmd {
        CommandKind::PhaseDiagram | CommandKind::ConvergeZ => Format::Csv,
        _ => Format::Json,
    };
    let format = *p.format.get_or_insert(default_format);
    if format == Format::Csv && default_format == Format::Json {
        return Err(config_err(
            "format",
            format!("{} writes JSON only", cmd.name()),
        ));
    }
    let ext = if format == Format::Csv { "csv" } else { "json" };
    p.out.get_or_insert_with(|| format!("{}.{ext}", cmd.name()));

    let positive = |key: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(config_err(key, format!("must be positive, got {v}")))
        }
    };
    let finite = |key: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(config_err(key, format!("must be finite, got {v}")))
        }
    };
    let nonneg_j = |key: &str, v: f64| {
        finite(key, v)?;
        if v < 0.0 {
            Err(config_err(key, format!("J must be >= 0, got {v}")))
        } else {
            Ok(())
        }
    };
    let at_least = |key: &str, v: usize, lo: usize| {
        if v >= lo {
            Ok(())
        } else {
            Err(config_err(key, format!("must be >= {lo}, got {v}")))
        }
    };

    match cmd {
        CommandKind::PhaseDiagram => {
            nonneg_j("j_min", *p.j_min.get_or_insert(0.0))?;
            nonneg_j("j_max", *p.j_max.get_or_insert(0.25))?;
            finite("mu_min", *p.mu_min.get_or_insert(0.0))?;
            finite("mu_max", *p.mu_max.get_or_insert(3.0))?;
            if let Some(j) = p.j {
                nonneg_j("j", j)?;
            }
            if p.j_max < p.j_min || p.mu_max < p.mu_min {
                return Err(config_err("grid", "ranges must satisfy min <= max"));
            }
            at_least("n_max", *p.n_max.get_or_insert(10), 1)?;
            positive(
                "alpha_threshold",
                *p.alpha_threshold.get_or_insert(DEFAULT_ALPHA_THRESHOLD),
            )?;
            parse_grid(p.grid.get_or_insert_with(|| "128x256".into()))?;
        }
        CommandKind::ConvergeZ | CommandKind::LatticeEd | CommandKind::InequalitySuite => {
            let j = *p.j.get_or_insert(0.05);
            if cmd == CommandKind::InequalitySuite {
                finite("j", j)?;
            } else {
                nonneg_j("j", j)?;
            }
            finite("mu", *p.mu.get_or_insert(0.5))?;
            positive("u", *p.u.get_or_insert(1.0))?;
            let n_max_default = match cmd {
                CommandKind::ConvergeZ => 6,
                CommandKind::LatticeEd => 2,
                _ => 3,
            };
            at_least("n_max", *p.n_max.get_or_insert(n_max_default), 1)?;
            match cmd {
                CommandKind::ConvergeZ => {
                    let z = p.z.get_or_insert_with(|| vec![2, 4, 8, 16, 32]);
                    if z.is_empty() || z.contains(&0) {
                        return Err(config_err(
                            "z",
                            "need a non-empty list of positive integers",
                        ));
                    }
                }
                CommandKind::LatticeEd => {
                    if p.graph.is_none() {
                        if let Some(r) = p.radius {
                            positive("radius", r)?;
                            p.d = None;
                            p.l.get_or_insert(7);
                        } else {
                            at_least("d", *p.d.get_or_insert(1), 1)?;
                            at_least("l", *p.l.get_or_insert(6), 3)?;
                        }
                    }
                }
                _ => {
                    let z = p.z.get_or_insert_with(|| vec![4]);
                    if z.is_empty() || z.contains(&0) {
                        return Err(config_err(
                            "z",
                            "need a non-empty list of positive integers",
                        ));
                    }
                    p.trials.get_or_insert(20);
                }
            }
        }
        CommandKind::DefinettiCheck => {
            at_least("m", *p.m.get_or_insert(1), 1)?;
            let n = *p.big_n.get_or_insert(6);
            at_least("N", n, 1)?;
            let k = *p.k.get_or_insert(1);
            if k > n {
                return Err(config_err("k", format!("must not exceed N = {n}, got {k}")));
            }
            at_least("core_dim", *p.core_dim.get_or_insert(2), 1)?;
            p.states.get_or_insert(20);
            p.samples.get_or_insert(0);
        }
    }
    Ok(RunConfig {
        command: cmd,
        params: p,
    })
}

/// `"<J points>x<μ points>"`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || {
        config_err(
            "grid",
            format!("expected <J points>x<mu points>, got {s:?}"),
        )
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let nj: usize = parts[0].trim().parse().map_err(|_| bad())?;
    let nm: usize = parts[1].trim().parse().map_err(|_| bad())?;
    if nj < 2 || nm < 2 {
        return Err(config_err("grid", "need at least 2 points per axis"));
    }
    Ok((nj, nm))
}

/// Product of a run: file content plus a one-line headline.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub content: String,
    pub headline: String,
    pub violation: Option<String>,
}

fn header_json(cfg: &RunConfig) -> String {
    serde_json::to_string(cfg).expect("configuration serializes")
}

fn with_csv_header(cfg: &RunConfig, body: &str) -> String {
    format!("# bhmft {VERSION} config={}\n{body}", header_json(cfg))
}

fn json_document(cfg: &RunConfig, body: serde_json::Value) -> String {
    let doc = json!({
        "header": format!("bhmft {VERSION}"),
        "config": cfg,
        "result": body,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn params_of(p: &Params) -> Result<BHParams, CliError> {
    Ok(BHParams::new(
        p.j.unwrap_or(0.0),
        p.mu.unwrap_or(0.0),
        p.u.unwrap_or(1.0),
        p.n_max.unwrap_or(1),
    )?)
}

/// Compute the artifact of a resolved configuration.
pub fn execute(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p = &cfg.params;
    let seed = RngSeed(p.seed.unwrap_or(42));
    let format = p.format.unwrap_or(Format::Json);
    match cfg.command {
        CommandKind::PhaseDiagram => {
            let (nj, nm) = parse_grid(p.grid.as_deref().unwrap_or("128x256"))?;
            let js = linspace(p.j_min.unwrap(), p.j_max.unwrap(), nj);
            let mus = linspace(p.mu_min.unwrap(), p.mu_max.unwrap(), nm);
            let pd = phase_scan(&js, &mus, p.n_max.unwrap(), p.alpha_threshold.unwrap())?;
            let frac = pd.mott_count() as f64 / (nj * nm) as f64;
            let content = match format {
                Format::Csv => with_csv_header(cfg, &pd.to_csv()),
                Format::Json => {
                    json_document(cfg, serde_json::to_value(&pd).expect("serializable"))
                }
            };
            Ok(Artifact {
                content,
                headline: format!("Mott fraction {frac:.4}"),
                violation: None,
            })
        }
        CommandKind::ConvergeZ => {
            let bh = params_of(p)?;
            let rows = convergence_table(p.z.as_deref().unwrap(), &bh, seed)?;
            let worst = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
            let violation = (worst < -SANDWICH_TOL)
                .then(|| format!("core-shell energy exceeds mean field by {:.3e}", -worst));
            let content = match format {
                Format::Csv => with_csv_header(cfg, &convergence_csv(&rows)),
                Format::Json => {
                    json_document(cfg, serde_json::to_value(&rows).expect("serializable"))
                }
            };
            let headline = match (rows.first(), rows.last()) {
                (Some(a), Some(b)) => {
                    format!("gap z={}: {:.6e}, z={}: {:.6e}", a.z, a.gap, b.z, b.gap)
                }
                _ => "empty table".into(),
            };
            Ok(Artifact {
                content,
                headline,
                violation,
            })
        }
        CommandKind::LatticeEd => lattice_ed(cfg, seed),
        CommandKind::DefinettiCheck => {
            let settings = SuiteSettings {
                m: p.m.unwrap(),
                n: p.big_n.unwrap(),
                k: p.k.unwrap(),
                core_dim: p.core_dim.unwrap(),
                states: p.states.unwrap(),
                samples: p.samples.unwrap(),
                seed,
            };
            let checks = verification_suite(&settings)?;
            Ok(report_artifact(cfg, checks))
        }
        CommandKind::InequalitySuite => {
            let bh = params_of(p)?;
            let mut checks = Vec::new();
            for &z in p.z.as_deref().unwrap() {
                checks.extend(inequality_checks(z, &bh, p.trials.unwrap(), seed)?);
            }
            Ok(report_artifact(cfg, checks))
        }
    }
}

fn report_artifact(cfg: &RunConfig, checks: Vec<CheckRecord>) -> Artifact {
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    let worst = checks
        .iter()
        .map(|c| c.distance - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let violation = (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", ")));
    let headline = format!(
        "{} checks, worst distance - bound {worst:.3e}",
        checks.len()
    );
    let content = json_document(cfg, json!({ "checks": checks }));
    Artifact {
        content,
        headline,
        violation,
    }
}

/// Hölder, Cauchy-Schwarz and both branches of the `M_2` estimate for one `z`.
pub fn inequality_checks(
    z: usize,
    p: &BHParams,
    trials: usize,
    seed: RngSeed,
) -> Result<Vec<CheckRecord>, CliError> {
    let basis = CoreShellBasis::new(z, p.n_max)?;
    let mut out = Vec::new();
    for (b1, b2) in [(0.0, 2.0), (0.5, 2.0), (1.0, 2.0), (1.0, 3.0), (2.0, 2.0)] {
        let v = check_holder(b1, b2, &basis)?;
        out.push(CheckRecord::new(
            "holder",
            json!({"z": z, "n_max": p.n_max, "beta1": b1, "beta2": b2}),
            v,
            1e-12,
        ));
    }
    let v = check_laplacian_cs(z, p.n_max, trials, seed)?;
    out.push(CheckRecord::new(
        "cauchy_schwarz",
        json!({"z": z, "n_max": p.n_max, "trials": trials}),
        v,
        1e-10,
    ));

    // the configured point plus a companion in the other branch
    let j_minus = (-p.j).max(0.0);
    let companion_mu = if 2.0 * j_minus + p.mu + 0.5 * p.u <= 0.0 {
        0.5 * p.u
    } else {
        -(p.u + 2.0 * j_minus)
    };
    for mu in [p.mu, companion_mu] {
        let q = BHParams { mu, ..*p };
        let (branch, _, _) = m2_bound_coefficients(&q)?;
        let v = check_m2_bound(z, &q, trials, seed)?;
        out.push(CheckRecord::new(
            "m2_estimate",
            json!({"z": z, "n_max": q.n_max, "J": q.j, "mu": q.mu, "U": q.u, "branch": branch}),
            v,
            1e-8,
        ));
    }
    Ok(out)
}

fn load_graph(p: &Params) -> Result<Graph, CliError> {
    if let Some(path) = &p.graph {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("graph", format!("{path}: {e}")))?;
        return Graph::from_json(&text).map_err(|e| config_err("graph", e));
    }
    Ok(match p.radius {
        Some(r) => make_ball_graph(p.l.unwrap(), r)?,
        None => make_torus(p.d.unwrap(), p.l.unwrap())?,
    })
}

fn lattice_ed(cfg: &RunConfig, _seed: RngSeed) -> Result<Artifact, CliError> {
    let p = &cfg.params;
    let g = load_graph(p)?;
    if let Some(path) = &p.graph_out {
        write_atomic(Path::new(path), &g.to_json())
            .map_err(|e| CliError::Failure(format!("{path}: {e}")))?;
    }
    let bh = params_of(p)?;
    let e_lattice = ground_energy_per_site(&g, &bh)?;
    let e_mf = minimize_scan_default(&bh)?.energy;
    let e_cs = core_shell_energy(g.coordination, &bh)?;
    let pass = e_cs - SANDWICH_TOL <= e_lattice && e_lattice <= e_mf + SANDWICH_TOL;
    let violation = (!pass).then(|| format!("sandwich fails: {e_cs} <= {e_lattice} <= {e_mf}"));
    let body = json!({
        "n_vertices": g.n_vertices,
        "z": g.coordination,
        "n_edges": g.edges.len(),
        "core_shell_energy": e_cs,
        "lattice_energy_per_site": e_lattice,
        "mean_field_energy": e_mf,
        "pass": pass,
    });
    Ok(Artifact {
        content: json_document(cfg, body),
        headline: format!("E_1z/2z {e_cs:.10} <= E_lattice {e_lattice:.10} <= E_mf {e_mf:.10}"),
        violation,
    })
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(config_err("threads", "must be positive"))
        } else {
            Ok(Some(n))
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config_err(
                THREADS_ENV,
                format!("expected a positive integer, got {v:?}"),
            )),
        },
        Err(_) => Ok(None),
    }
}

/// Resolve, execute and write; returns the summary line.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let threads = thread_count(cfg.params.threads)?;
    let resolved = resolve(cfg)?;
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let artifact = pool.install(|| execute(&resolved))?;
    let out = resolved.params.out.clone().expect("resolved");
    write_atomic(Path::new(&out), &artifact.content)
        .map_err(|e| CliError::Failure(format!("{out}: {e}")))?;
    let summary = format!(
        "{} [{:.2}s] {} -> {}",
        resolved.command.name(),
        start.elapsed().as_secs_f64(),
        artifact.headline,
        out
    );
    match artifact.violation {
        Some(v) => Err(CliError::Contract(format!("{v} ({summary})"))),
        None => Ok(summary),
    }
}

/// Entry point shared by the binary: returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_config(argv).and_then(|parsed| match parsed {
        Parsed::Info(text) => Ok(text.trim_end().to_string()),
        Parsed::Run(cfg) => run(&cfg),
    });
    match result {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        match parse_config(args.iter().copied())? {
            Parsed::Run(c) => Ok(c),
            Parsed::Info(_) => panic!("unexpected info"),
        }
    }

    #[test]
    fn empty_argv_is_a_configuration_error() {
        let e = parse_config(Vec::<String>::new()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn negative_hopping_is_rejected() {
        let cfg = parse(&["phase-diagram", "--j", "-0.1"]).unwrap();
        assert_eq!(cfg.params.j, Some(-0.1));
        let e = resolve(&cfg).unwrap_err();
        assert!(matches!(&e, CliError::Config(msg) if msg.starts_with("j:")));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn flags_and_lists() {
        let cfg = parse(&["converge-z", "--z", "2,4,8", "--n-max", "6", "--mu", "0.5"]).unwrap();
        assert_eq!(cfg.command, CommandKind::ConvergeZ);
        assert_eq!(cfg.params.z, Some(vec![2, 4, 8]));
        assert_eq!(cfg.params.n_max, Some(6));
        let cfg = parse(&[
            "definetti-check",
            "--m",
            "1",
            "--N",
            "6",
            "--k",
            "1",
            "--core-dim",
            "2",
            "--seed",
            "7",
        ])
        .unwrap();
        assert_eq!(cfg.params.big_n, Some(6));
        assert_eq!(cfg.params.seed, Some(7));
    }

    #[test]
    fn config_round_trip() {
        let cfg = parse(&[
            "phase-diagram",
            "--j-max",
            "0.25",
            "--grid",
            "16x32",
            "--n-max",
            "10",
        ])
        .unwrap();
        let resolved = resolve(&cfg).unwrap();
        for c in [cfg, resolved] {
            let text = serde_json::to_string(&c).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("128x256").unwrap(), (128, 256));
        assert!(parse_grid("128").is_err());
        assert!(parse_grid("1x5").is_err());
    }

    #[test]
    fn csv_rejected_for_reports() {
        let cfg = parse(&["definetti-check", "--format", "csv"]).unwrap();
        assert_eq!(resolve(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let cfg = parse(&["definetti-check", "--N", "2", "--k", "3"]).unwrap();
        assert!(matches!(resolve(&cfg), Err(CliError::Config(_))));
    }

    #[test]
    fn merge_prefers_flags() {
        let file = Params {
            j: Some(0.1),
            mu: Some(0.3),
            ..Default::default()
        };
        let flags = Params {
            j: Some(0.2),
            ..Default::default()
        };
        let merged = flags.merged_over(file);
        assert_eq!((merged.j, merged.mu), (Some(0.2), Some(0.3)));
    }

    #[test]
    fn inequality_suite_covers_both_branches() {
        let p = BHParams::new(0.1, 0.5, 1.0, 2).unwrap();
        let checks = inequality_checks(2, &p, 5, RngSeed(1)).unwrap();
        let branches: Vec<String> = checks
            .iter()
            .filter(|c| c.name == "m2_estimate")
            .map(|c| c.params["branch"].to_string())
            .collect();
        assert_eq!(branches, vec!["\"shifted\"", "\"linear\""]);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }
}
