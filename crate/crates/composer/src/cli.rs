//! Command-line pipeline: factorize → compile → dial → verify, plus
//! estimate and diagnose.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use composer_core::circuit::{
    compile_skeleton, dial_with, execute_generator, execute_hamiltonian, BlockTag, CircuitSkeleton, Connectivity, Mask,
    SkeletonSpec,
};
use composer_core::diagnostics::{one_shot_mask, wauc};
use composer_core::factorization::{build_hamiltonian_pool, mp2_amplitudes, nested_svd_t2};
use composer_core::integrals::{synth_instance, IntegralSet};
use composer_core::linalg::max_abs;
use composer_core::mask::{similarity_sandwich, ROUNDOFF};
use composer_core::oracle::{generator_block_encoding, hamiltonian_encoding_with};
use composer_core::qsp::{degree_for, tail_bound};
use composer_core::resources::estimate;
use composer_core::Error;

use crate::docs::{
    from_json, overlap_csv, to_json, Check, DialDoc, EstimateDoc, IntsDoc, MaskDoc, PoolDoc, ReportDoc, SkelDoc, T2Doc,
};
use crate::fcidump::{parse_fcidump, write_fcidump};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_TOPOLOGY: i32 = 3;

/// Why a command stopped; each kind owns one exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("topology violation: {0}")]
    Topology(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Verify(_) => EXIT_VERIFY,
            Failure::Input(_) => EXIT_INPUT,
            Failure::Topology(_) => EXIT_TOPOLOGY,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Topology { .. } | Error::Bind { .. } => Failure::Topology(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// `linear:d_g`, `grid:L` or `full`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectivityArg(pub Connectivity);

impl FromStr for ConnectivityArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.parse::<usize>().map_err(|_| format!("bad connectivity parameter {v:?}"));
        match s.split_once(':') {
            None if s == "full" || s == "all-to-all" => Ok(Self(Connectivity::AllToAll)),
            Some(("linear", v)) => Ok(Self(Connectivity::Linear { d_g: num(v)? })),
            Some(("grid", v)) => Ok(Self(Connectivity::Grid { l: num(v)? })),
            _ => Err(format!("expected linear:d_g, grid:L or full, got {s:?}")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "composer", version, about = "Compile-once block encodings for masked effective Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic instance as FCIDUMP.
    Synth(SynthArgs),
    /// Integrals → Hamiltonian and generator pools.
    Factorize(FactorizeArgs),
    /// Pools → circuit skeleton.
    Compile(CompileArgs),
    /// Skeleton + pools + mask → dial sheet.
    Dial(DialArgs),
    /// Skeleton + dial sheet + pools → verification report.
    Verify(VerifyArgs),
    /// Skeleton → depth and ancilla estimate.
    Estimate(EstimateArgs),
    /// One-shot mask and subspace overlap diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub n_spatial: usize,
    #[arg(long, default_value_t = 2)]
    pub n_elec: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Truncation thresholds shared by the factorizing commands.
#[derive(Debug, Clone, Args)]
pub struct Thresholds {
    #[arg(long, default_value_t = 1e-8)]
    pub tau_chol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tau_eig: f64,
    /// Zero keeps every one-body eigenmode.
    #[arg(long, default_value_t = 0.0)]
    pub tau_onebody: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tau_svd: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tau_wedge: f64,
}

impl Thresholds {
    fn validate(&self) -> Outcome<()> {
        for (name, v) in [
            ("tau-chol", self.tau_chol),
            ("tau-eig", self.tau_eig),
            ("tau-svd", self.tau_svd),
            ("tau-wedge", self.tau_wedge),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Input(format!("--{name} must be positive, got {v}")));
            }
        }
        if !(self.tau_onebody >= 0.0 && self.tau_onebody.is_finite()) {
            return Err(Failure::Input(format!("--tau-onebody must be non-negative, got {}", self.tau_onebody)));
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    /// FCIDUMP file, or a composer-ints-v1 JSON document.
    #[arg(long)]
    pub ints: PathBuf,
    #[command(flatten)]
    pub thresholds: Thresholds,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the MP2 doubles as composer-t2-v1.
    #[arg(long)]
    pub t2_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub pool: PathBuf,
    /// Polynomial accuracy used to size the QSP scaffold.
    #[arg(long, default_value_t = 1e-6)]
    pub eps_poly: f64,
    /// Fixed QSP degree, overriding --eps-poly.
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long, default_value = "full")]
    pub connectivity: ConnectivityArg,
    /// Reserve a wider selector than the pools need.
    #[arg(long)]
    pub selector_width: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DialArgs {
    #[arg(long)]
    pub skel: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    /// `all`, `none`, a comma list of addresses, or a composer-mask-v1 file.
    #[arg(long, default_value = "all")]
    pub mask: String,
    /// Common generator normalization for a family of dials.
    #[arg(long)]
    pub alpha_bar: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub skel: PathBuf,
    #[arg(long)]
    pub dial: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_poly: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub skel: PathBuf,
    /// Price actual channel ranks instead of the compiled full rank.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    pub mask: String,
    /// Defaults to the connectivity recorded in the skeleton.
    #[arg(long)]
    pub connectivity: Option<ConnectivityArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub eta: f64,
    /// Mask output (composer-mask-v1).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub t2: Option<PathBuf>,
    #[arg(long)]
    pub t2_ref: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_s: f64,
    /// Overlap curve CSV output.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

fn read(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_ints(path: &Path) -> Outcome<IntegralSet> {
    let text = read(path)?;
    let ints = if text.trim_start().starts_with('{') {
        from_json::<IntsDoc>(&text)?.into_ints()?
    } else {
        parse_fcidump(&text)?
    };
    Ok(ints)
}

fn load_pools(path: &Path) -> Outcome<(composer_core::factorization::HamiltonianPool, composer_core::factorization::GeneratorPool)> {
    Ok(from_json::<PoolDoc>(&read(path)?)?.pools()?)
}

fn load_skel(path: &Path) -> Outcome<CircuitSkeleton> {
    let skel = from_json::<SkelDoc>(&read(path)?)?.into_skeleton()?;
    skel.verify_fingerprint()?;
    Ok(skel)
}

/// Mask from `all`, `none`, `1,2,5` or a mask document path.
pub fn parse_mask(spec: &str, ell_sigma: usize) -> Outcome<Mask> {
    let mask = match spec {
        "all" => Mask::full(ell_sigma),
        "none" => Mask::empty(),
        s if Path::new(s).is_file() => from_json::<MaskDoc>(&read(Path::new(s))?)?.into_mask()?,
        s => {
            let idx = s
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| Failure::Input(format!("bad mask entry {t:?}"))))
                .collect::<Outcome<Vec<_>>>()?;
            Mask::new(format!("m{s}"), idx)
        }
    };
    mask.validate(ell_sigma)?;
    Ok(mask)
}

pub fn cmd_synth(a: &SynthArgs) -> Outcome<()> {
    let ints = synth_instance(a.seed, a.n_spatial, a.n_elec)?;
    write(&a.out, &write_fcidump(&ints))
}

pub fn cmd_factorize(a: &FactorizeArgs) -> Outcome<()> {
    a.thresholds.validate()?;
    let t = &a.thresholds;
    let ints = load_ints(&a.ints)?;
    let ham = build_hamiltonian_pool(&ints, t.tau_chol, t.tau_eig, t.tau_onebody)?;
    let (t2, _) = mp2_amplitudes(&ints)?;
    let gen = nested_svd_t2(&t2, t.tau_svd, t.tau_wedge);
    write(&a.out, &to_json(&PoolDoc::new(&ham, &gen)?))?;
    if let Some(p) = &a.t2_out {
        write(p, &to_json(&T2Doc::new(&t2)))?;
    }
    println!("pool: n={} ell_H={} (R1={}, K={}) ell_sigma={}", ham.n_so, ham.ell_h, ham.r1(), ham.k(), gen.ell_sigma);
    Ok(())
}

pub fn cmd_compile(a: &CompileArgs) -> Outcome<()> {
    let (ham, gen) = load_pools(&a.pool)?;
    let degree = match a.degree {
        Some(d) => d,
        None if a.eps_poly > 0.0 => degree_for(gen.alpha_bar, a.eps_poly),
        None => return Err(Failure::Input(format!("--eps-poly must be positive, got {}", a.eps_poly))),
    };
    let mut spec = SkeletonSpec::from_pools(&ham, &gen, degree, a.connectivity.0);
    spec.selector_width = a.selector_width;
    let skel = compile_skeleton(&spec)?;
    write(&a.out, &to_json(&SkelDoc::new(skel.clone())))?;
    println!("skeleton {} (selector {}, workspace {}, d={})", skel.fingerprint, skel.selector_width, skel.workspace_width, degree);
    Ok(())
}

pub fn cmd_dial(a: &DialArgs) -> Outcome<()> {
    let skel = load_skel(&a.skel)?;
    let (ham, gen) = load_pools(&a.pool)?;
    let mask = parse_mask(&a.mask, skel.ell_sigma)?;
    let sheet = dial_with(&skel, &ham, &gen, &mask, a.alpha_bar)?;
    write(&a.out, &to_json(&DialDoc::new(sheet)))
}

fn check(name: &str, value: f64, bound: f64) -> Check {
    Check { name: name.into(), value, bound, pass: value <= bound }
}

pub fn cmd_verify(a: &VerifyArgs) -> Outcome<()> {
    if a.eps_poly < 0.0 || a.eps_poly.is_nan() {
        return Err(Failure::Input(format!("--eps-poly must be nonnegative, got {}", a.eps_poly)));
    }
    let skel = load_skel(&a.skel)?;
    let sheet = from_json::<DialDoc>(&read(&a.dial)?)?.into_sheet()?;
    sheet.validate_against(&skel)?;
    let (ham, gen) = load_pools(&a.pool)?;
    let mask = Mask::new(sheet.mask_id.clone(), sheet.mask.iter().copied());

    let mut checks = Vec::new();
    let run_h = execute_hamiltonian(&skel, &sheet)?;
    let pivots: Vec<usize> = (0..skel.r1)
        .map(|s| skel.adaptor(BlockTag::Hamiltonian, s).map_or(0, |ad| ad.pivots[0][0]))
        .collect();
    let direct_h = hamiltonian_encoding_with(&ham, skel.selector_width, Some(&pivots[..]))?;
    checks.push(check("hamiltonian_round_trip", max_abs(&(run_h.block() - direct_h.block())), 1e-10));
    if skel.ell_sigma > 0 {
        let run_g = execute_generator(&skel, &sheet)?;
        let (direct_g, _) = generator_block_encoding(&gen, &mask, Some(skel.selector_width))?;
        checks.push(check("generator_round_trip", max_abs(&(run_g.block() - direct_g.block())), 1e-10));
        let bar = sheet.classical_coeffs.alpha_bar;
        checks.push(check("qsp_tail", tail_bound(bar, skel.qsp_degree), a.eps_poly));
    }
    let (rep, _) = similarity_sandwich(&ham, &gen, &mask, None, a.eps_poly.max(f64::MIN_POSITIVE))?;
    checks.push(check("sandwich", rep.measured_error, 1.1 * rep.budget + ROUNDOFF));
    let doc = ReportDoc::new(&skel.fingerprint, skel.workspace_width, &rep, checks);
    write(&a.out, &to_json(&doc))?;
    for c in &doc.checks {
        println!("{:<24} {:>12.3e} <= {:<12.3e} {}", c.name, c.value, c.bound, if c.pass { "ok" } else { "FAIL" });
    }
    if doc.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = doc.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::Verify(format!("bounds not satisfied: {}", failed.join(", "))))
    }
}

pub fn cmd_estimate(a: &EstimateArgs) -> Outcome<()> {
    let skel = load_skel(&a.skel)?;
    let r_mu = match &a.pool {
        Some(p) => load_pools(p)?.0.channels.iter().map(|c| c.rank()).collect(),
        None => vec![skel.n_system; skel.k],
    };
    let mask = parse_mask(&a.mask, skel.ell_sigma)?;
    let conn = a.connectivity.map_or(skel.connectivity, |c| c.0);
    let est = estimate(&skel, &r_mu, &mask, conn)?;
    print!("{}", est.render());
    write(&a.out, &to_json(&EstimateDoc::new(&skel.fingerprint, est)))
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Outcome<()> {
    if let (Some(out), Some(p)) = (&a.out, &a.pool) {
        let (_, gen) = load_pools(p)?;
        let (mask, cov) = one_shot_mask(&gen, a.eta)?;
        println!("mask {} keeps {} of {} ladders, coverage {cov:.6}", mask.label, mask.indices.len(), gen.ell_sigma);
        write(out, &to_json(&MaskDoc::new(mask, Some(cov))))?;
    } else if a.out.is_some() {
        return Err(Failure::Input("--out needs --pool".into()));
    }
    match (&a.t2, &a.t2_ref) {
        (Some(x), Some(y)) => {
            let ta = from_json::<T2Doc>(&read(x)?)?.tensor()?;
            let tb = from_json::<T2Doc>(&read(y)?)?.tensor()?;
            let curve = wauc(&ta, &tb, a.eps_s)?;
            println!("wAUC {:.6} over {} ranks", curve.wauc, curve.r_eps);
            if let Some(c) = &a.curve {
                write(c, &overlap_csv(&curve))?;
            }
        }
        (None, None) => {}
        _ => return Err(Failure::Input("--t2 and --t2-ref go together".into())),
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Factorize(a) => cmd_factorize(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Dial(a) => cmd_dial(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("composer: {f}");
            f.exit_code()
        }
    }
}
