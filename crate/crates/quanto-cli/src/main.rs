//! Command-line surface over the pricing library: price one contract, run a
//! built-in benchmark case, emit an implied-vol smile, or synthesize an
//! expert matrix.
//!
//! Every command that writes a CSV also writes `<out>.manifest` next to it,
//! a flat `key = value` record of the resolved inputs (seed, paths, config,
//! any calibrated parameter) so the CSV can be regenerated byte-identically.
//! Usage errors exit 2; domain and I/O errors exit 1 with a message naming
//! the violated precondition.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use quanto::copula::{
    calibrate_frank_alpha, generate_expert_matrix, CopulaFamily, ExpertMatrix, KernelCopula,
};
use quanto::experiments::{
    default_market, default_strike_grid, emit_smile, run_case, smile_to_csv_string, CaseSpec,
    EXPERT_ROWS,
};
use quanto::heston::{simulate_heston_terminal, DswParams, SimGrid};
use quanto::kv;
use quanto::marginals::EmpiricalMarginal;
use quanto::market::{ContractSpec, HestonParams, MarketConfig};
use quanto::pricing::{price_copula, price_dsw, price_practitioner, PriceResult};

#[derive(Parser)]
#[command(
    name = "quanto",
    version,
    about = "Quanto call pricing: closed form, coupled stochastic-vol simulation, and empirical-copula Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one contract and print `price=<v> se=<e>`.
    Price(PriceArgs),
    /// Run a built-in benchmark case and write its comparison table.
    Case(CaseArgs),
    /// Simulate vanillas on one leg and write the implied-vol smile.
    Smile(SmileArgs),
    /// Synthesize an expert matrix from a parametric dependence family.
    GenExpert(GenExpertArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Closed-form drift-adjusted Black-Scholes.
    Practitioner,
    /// Coupled four-factor stochastic-vol Monte Carlo.
    Dsw,
    /// Kernel-copula Monte Carlo over simulated marginals.
    Copula,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Family {
    Gaussian,
    T,
    Frank,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::T => "t",
            Family::Frank => "frank",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Leg {
    /// Foreign asset: spot s0, drift rf, discounting at rf.
    Asset,
    /// Inverted FX rate: spot 1/q0, drift rf - r, discounting at rf.
    Fx,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Market config file (flat `key = value`).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    strike: f64,
    /// Years to expiry.
    #[arg(long)]
    maturity: f64,
    /// At-the-money asset vol (practitioner).
    #[arg(long)]
    vol_sf: Option<f64>,
    /// At-the-money FX vol (practitioner).
    #[arg(long)]
    vol_q: Option<f64>,
    /// At-strike asset vol (practitioner); defaults to --vol-sf.
    #[arg(long)]
    vol_sf_strike: Option<f64>,
    /// Asset variance dynamics as rho,kappa,v_bar,v0,eta (dsw, copula).
    #[arg(long, value_parser = parse_phi)]
    phi_sf: Option<HestonParams>,
    /// Inverted-FX variance dynamics as rho,kappa,v_bar,v0,eta (dsw, copula).
    #[arg(long, value_parser = parse_phi)]
    phi_qinv: Option<HestonParams>,
    /// Expert matrix CSV with header `s_f,q_inv` (copula).
    #[arg(long)]
    expert_matrix: Option<PathBuf>,
    /// Generator family for a synthetic expert matrix (copula).
    #[arg(long, value_enum)]
    copula_family: Option<Family>,
    /// Family parameter, repeatable: rho=-0.7, dof=3, alpha=-5.
    #[arg(long, value_parser = parse_param)]
    copula_param: Vec<(String, f64)>,
    /// Monte Carlo paths (dsw, copula).
    #[arg(long, default_value_t = 200_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CaseArgs {
    /// Benchmark case id.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    id: u8,
    /// Output CSV path; the manifest lands at `<out>.manifest`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Monte Carlo paths per pricing run.
    #[arg(long, default_value_t = 200_000)]
    paths: usize,
    /// Market config file; omitted = the built-in benchmark market.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SmileArgs {
    /// Which leg to scan.
    #[arg(long, value_enum)]
    leg: Leg,
    /// Variance dynamics as rho,kappa,v_bar,v0,eta.
    #[arg(long, value_parser = parse_phi)]
    phi: HestonParams,
    /// Output CSV path; the manifest lands at `<out>.manifest`.
    #[arg(long)]
    out: PathBuf,
    /// Years to expiry.
    #[arg(long, default_value_t = 3.0)]
    maturity: f64,
    #[arg(long, default_value_t = 200_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Market config file; omitted = the built-in benchmark market.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenExpertArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Family parameter, repeatable: rho=-0.7, dof=3, alpha=-5. For frank,
    /// rho=R calibrates alpha to that rank correlation.
    #[arg(long, value_parser = parse_param)]
    param: Vec<(String, f64)>,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path; the manifest lands at `<out>.manifest`.
    #[arg(long)]
    out: PathBuf,
}

fn parse_phi(s: &str) -> Result<HestonParams, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 5 {
        return Err(format!(
            "expected rho,kappa,v_bar,v0,eta (5 numbers), got {} fields",
            parts.len()
        ));
    }
    let mut a = [0.0f64; 5];
    for (slot, part) in a.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("not a number: `{part}`"))?;
    }
    HestonParams::from_array(a).map_err(|e| e.to_string())
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let Some((k, v)) = s.split_once('=') else {
        return Err(format!("expected key=value, got `{s}`"));
    };
    let val: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("not a number: `{v}`"))?;
    Ok((k.trim().to_string(), val))
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    eprintln!("run with --help for usage");
    std::process::exit(2);
}

/// Flat record of the resolved inputs behind one output file.
struct RunManifest {
    pairs: Vec<(String, String)>,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        let started = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut m = RunManifest { pairs: Vec::new() };
        m.push("command", command);
        m.push("engine_version", env!("CARGO_PKG_VERSION"));
        m.push("started_unix", started);
        m
    }

    fn push(&mut self, key: &str, value: impl Display) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    fn push_phi(&mut self, key: &str, p: &HestonParams) {
        self.push(
            key,
            format!("{},{},{},{},{}", p.rho, p.kappa, p.v_bar, p.v0, p.eta),
        );
    }

    /// Inline the market config under `config.` keys so the manifest alone
    /// pins the run even when the config file later changes.
    fn push_config(&mut self, mkt: &MarketConfig) {
        for (k, v) in kv::parse(&mkt.to_kv_string()).expect("round-trips") {
            self.pairs.push((format!("config.{k}"), v));
        }
    }

    fn render(&self) -> String {
        kv::render(&self.pairs)
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

/// Write through a temp file and rename, so a failed run leaves nothing
/// behind at the target path.
fn write_atomic(path: &Path, content: &str) -> quanto::Result<()> {
    let tmp = sibling(path, &format!(".tmp{}", std::process::id()));
    let wrap = |e: std::io::Error| std::io::Error::new(e.kind(), format!("{}: {e}", path.display()));
    std::fs::write(&tmp, content).map_err(wrap)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(wrap(e).into());
    }
    Ok(())
}

fn write_outputs(out: &Path, csv: &str, manifest: &RunManifest) -> quanto::Result<()> {
    write_atomic(out, csv)?;
    write_atomic(&sibling(out, ".manifest"), &manifest.render())
}

fn load_market(config: &Option<PathBuf>) -> quanto::Result<MarketConfig> {
    match config {
        Some(path) => MarketConfig::from_kv_file(path),
        None => Ok(default_market()),
    }
}

/// Turn a family name plus loose key=value parameters into a generator,
/// calibrating the Frank parameter when given a correlation target. Returns
/// the resolved Frank parameter when one applies.
fn resolve_family(
    family: Family,
    params: &[(String, f64)],
    seed: u64,
) -> quanto::Result<(CopulaFamily, Option<f64>)> {
    let map: BTreeMap<&str, f64> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let allowed: &[&str] = match family {
        Family::Gaussian => &["rho"],
        Family::T => &["rho", "dof"],
        Family::Frank => &["alpha", "rho"],
    };
    for key in map.keys() {
        if !allowed.contains(key) {
            usage_error(&format!(
                "unknown parameter `{key}` for family {}; allowed: {}",
                family.name(),
                allowed.join(", ")
            ));
        }
    }
    let need = |key: &str| -> f64 {
        map.get(key).copied().unwrap_or_else(|| {
            usage_error(&format!(
                "family {} needs --param {key}=VALUE",
                family.name()
            ))
        })
    };
    match family {
        Family::Gaussian => Ok((CopulaFamily::Gaussian { rho: need("rho") }, None)),
        Family::T => Ok((
            CopulaFamily::StudentT {
                rho: need("rho"),
                dof: need("dof"),
            },
            None,
        )),
        Family::Frank => {
            let alpha = match map.get("alpha") {
                Some(&a) => a,
                None => match map.get("rho") {
                    Some(&rho) => calibrate_frank_alpha(rho, seed ^ 0xCA11_B7A7)?,
                    None => usage_error("family frank needs --param alpha=A or --param rho=R"),
                },
            };
            Ok((CopulaFamily::Frank { alpha }, Some(alpha)))
        }
    }
}

fn require_phis(
    phi_sf: &Option<HestonParams>,
    phi_qinv: &Option<HestonParams>,
    model: &str,
) -> (HestonParams, HestonParams) {
    match (phi_sf, phi_qinv) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => usage_error(&format!("--model {model} requires --phi-sf and --phi-qinv")),
    }
}

fn run_price(a: PriceArgs) -> quanto::Result<()> {
    let mkt = MarketConfig::from_kv_file(&a.config)?;
    let contract = ContractSpec::new(a.strike, a.maturity)?;
    let result: PriceResult = match a.model {
        Model::Practitioner => {
            let (vol_sf, vol_q) = match (a.vol_sf, a.vol_q) {
                (Some(s), Some(q)) => (s, q),
                _ => usage_error("--model practitioner requires --vol-sf and --vol-q"),
            };
            let vol_at_strike = a.vol_sf_strike.unwrap_or(vol_sf);
            price_practitioner(&mkt, &contract, vol_sf, vol_q, vol_at_strike)?
        }
        Model::Dsw => {
            let (phi_sf, phi_qinv) = require_phis(&a.phi_sf, &a.phi_qinv, "dsw");
            let params = DswParams::new(phi_sf, phi_qinv, mkt.rho_sf_qinv, mkt.r, mkt.rf)?;
            let grid = SimGrid::pricing(a.maturity, a.seed).with_paths(a.paths);
            price_dsw(&mkt, &contract, &params, &grid)?
        }
        Model::Copula => {
            let (phi_sf, phi_qinv) = require_phis(&a.phi_sf, &a.phi_qinv, "copula");
            let matrix = match (&a.expert_matrix, a.copula_family) {
                (Some(path), None) => ExpertMatrix::from_csv_file(path)?,
                (None, Some(family)) => {
                    let (generator, _) = resolve_family(family, &a.copula_param, a.seed)?;
                    generate_expert_matrix(&generator, EXPERT_ROWS, a.seed.wrapping_add(40))?
                }
                _ => usage_error(
                    "--model copula requires exactly one of --expert-matrix or --copula-family",
                ),
            };
            let copula = KernelCopula::from_matrix(&matrix)?;
            let grid_sf = SimGrid::pricing(a.maturity, a.seed.wrapping_add(41)).with_paths(a.paths);
            let marginal_sf = EmpiricalMarginal::from_samples(&simulate_heston_terminal(
                mkt.s0, &phi_sf, mkt.rf, a.maturity, &grid_sf,
            )?)?;
            let grid_q = SimGrid::pricing(a.maturity, a.seed.wrapping_add(42)).with_paths(a.paths);
            let marginal_qinv = EmpiricalMarginal::from_samples(&simulate_heston_terminal(
                mkt.qinv0(),
                &phi_qinv,
                mkt.rf - mkt.r,
                a.maturity,
                &grid_q,
            )?)?;
            price_copula(
                &mkt,
                &contract,
                &marginal_sf,
                &marginal_qinv,
                &copula,
                a.paths,
                a.seed.wrapping_add(43),
            )?
        }
    };
    println!("price={} se={}", result.price, result.std_error);
    Ok(())
}

fn run_case_cmd(a: CaseArgs) -> quanto::Result<()> {
    let mkt = load_market(&a.config)?;
    let spec = CaseSpec::builtin(a.id, &mkt, a.seed)?;
    let grid = SimGrid::pricing(spec.maturity, a.seed).with_paths(a.paths);
    let table = run_case(&spec, &mkt, &grid)?;
    let mut manifest = RunManifest::new("case");
    manifest.push("id", a.id);
    manifest.push("seed", a.seed);
    manifest.push("paths", a.paths);
    manifest.push("maturity", spec.maturity);
    if let Some(alpha) = table.calibrated_alpha {
        manifest.push("resolved_alpha", alpha);
    }
    if let Some(rho) = table.calibrated_rho {
        manifest.push("resolved_rho", rho);
    }
    manifest.push_config(&mkt);
    write_outputs(&a.out, &table.to_csv_string(), &manifest)
}

fn run_smile(a: SmileArgs) -> quanto::Result<()> {
    let mkt = load_market(&a.config)?;
    let (leg, spot, drift, disc_rate) = match a.leg {
        Leg::Asset => ("asset", mkt.s0, mkt.rf, mkt.rf),
        Leg::Fx => ("fx", mkt.qinv0(), mkt.rf - mkt.r, mkt.rf),
    };
    let strikes = default_strike_grid(spot);
    let grid = SimGrid::pricing(a.maturity, a.seed).with_paths(a.paths);
    let rows = emit_smile(&a.phi, spot, drift, disc_rate, a.maturity, &strikes, &grid)?;
    let mut manifest = RunManifest::new("smile");
    manifest.push("leg", leg);
    manifest.push_phi("phi", &a.phi);
    manifest.push("maturity", a.maturity);
    manifest.push("paths", a.paths);
    manifest.push("seed", a.seed);
    manifest.push_config(&mkt);
    write_outputs(&a.out, &smile_to_csv_string(&rows), &manifest)
}

fn run_gen_expert(a: GenExpertArgs) -> quanto::Result<()> {
    let (family, resolved_alpha) = resolve_family(a.family, &a.param, a.seed)?;
    let matrix = generate_expert_matrix(&family, a.n, a.seed)?;
    let mut manifest = RunManifest::new("gen-expert");
    manifest.push("family", a.family.name());
    for (k, v) in &a.param {
        manifest.push(&format!("param.{k}"), v);
    }
    if let Some(alpha) = resolved_alpha {
        manifest.push("resolved_alpha", alpha);
    }
    manifest.push("n", a.n);
    manifest.push("seed", a.seed);
    write_outputs(&a.out, &matrix.to_csv_string(), &manifest)
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Price(a) => run_price(a),
        Command::Case(a) => run_case_cmd(a),
        Command::Smile(a) => run_smile(a),
        Command::GenExpert(a) => run_gen_expert(a),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
