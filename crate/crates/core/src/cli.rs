//! Command-line surface: load/store channels, states and dilations, run
//! certification, synthesis, verification and the worked examples, and
//! emit machine-readable reports.
//!
//! Exit codes mirror certification semantics so shell pipelines can
//! branch on verdicts: 0 success/affirmative, 2 certification-negative,
//! 3 undecided, 64 usage, 65 malformed input file, 70 internal error.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::channel::{counterexample_channel, fd_member_sample, transpose_map, ChannelParams};
use crate::dilation::{
    build_dilation, random_valid_channel, rank_deficient_channel, verify_dilation, DilationSpec,
};
use crate::interferometer::{attenuator, decide, DecisionStatus, SearchOptions};
use crate::io::{ChannelFile, DilationFile, StateFile};
use crate::numerics::ToleranceConfig;
use crate::states::GaussianState;
use crate::symplectic::{random_symplectic, SymplecticForm};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Parser, Debug)]
#[command(
    name = "gchan",
    version,
    about = "Gaussian channel certification and dilation synthesis at the covariance level"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Matrix-residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    /// Relative eigenvalue tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    eig_tol: f64,

    /// Base regularization magnitude for singular-noise dilations.
    #[arg(long, global = true, default_value_t = 1e-10)]
    eps: f64,

    /// Root seed for all randomized procedures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Sample count for Monte-Carlo procedures.
    #[arg(long, global = true, default_value_t = 200)]
    samples: usize,

    /// Restart budget for the interferometer search.
    #[arg(long, global = true, default_value_t = 32)]
    restarts: usize,

    /// Iteration budget per restart for the interferometer search.
    #[arg(long, global = true, default_value_t = 2000)]
    iters: usize,

    /// Write the produced artifact (state, channel or dilation) here
    /// instead of embedding it in the report.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Emit the report as a single JSON line on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a channel file; exit 0 if valid, 2 if not.
    Check { channel: PathBuf },
    /// Apply a channel to a state, producing a state artifact.
    Evolve { channel: PathBuf, state: PathBuf },
    /// Build a symplectic Stinespring dilation of a valid channel.
    Dilate { channel: PathBuf },
    /// Measure the deviation of a dilation from a channel on random
    /// states; exit 0 iff it is within --tol.
    Verify { channel: PathBuf, dilation: PathBuf },
    /// Decide implementability by a multiport interferometer;
    /// exit 0 yes, 2 no, 3 undecided.
    Interferometer { channel: PathBuf },
    /// Compose two channels (first applied first), producing a channel.
    Compose { first: PathBuf, second: PathBuf },
    /// Upper bound on the environment modes needed to dilate a channel.
    Modes { channel: PathBuf },
    /// Emit the swap-noise counterexample fixture and its report.
    Counterexample {
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Emit the covariance-level transpose map and its validity report.
    TransposeMap {
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Run the reduced property suites; exit 0 iff everything passes.
    Selftest,
}

#[derive(Serialize)]
struct Tolerances {
    eig_tol: f64,
    residual_tol: f64,
    reg_eps: f64,
}

/// Machine-readable run report. Every numeric field is reproducible from
/// the inputs and the seed; only `timestamp` varies across runs and it is
/// excluded from the digest.
#[derive(Serialize)]
pub struct Report {
    version: &'static str,
    command: String,
    argv: Vec<String>,
    inputs_digest: String,
    seed: u64,
    tolerances: Tolerances,
    verdicts: Map<String, Value>,
    residuals: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    artifact: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    artifact_path: Option<String>,
    timestamp: u64,
}

impl Report {
    fn new(command: &str, argv: &[String], cfg: &ToleranceConfig, seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            argv: argv.to_vec(),
            inputs_digest: String::new(),
            seed,
            tolerances: Tolerances {
                eig_tol: cfg.eig_tol,
                residual_tol: cfg.residual_tol,
                reg_eps: cfg.reg_eps,
            },
            verdicts: Map::new(),
            residuals: Map::new(),
            artifact: None,
            artifact_path: None,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn verdict(&mut self, key: &str, value: impl Into<Value>) {
        self.verdicts.insert(key.into(), value.into());
    }

    fn residual(&mut self, key: &str, value: f64) {
        let v = if value.is_finite() {
            json!(value)
        } else {
            json!(value.to_string())
        };
        self.residuals.insert(key.into(), v);
    }

    fn render_human(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "command: {} (gchan {})\n",
            self.command, self.version
        ));
        out.push_str(&format!("inputs digest: {}\n", self.inputs_digest));
        out.push_str(&format!("seed: {}\n", self.seed));
        for (k, v) in &self.verdicts {
            out.push_str(&format!("verdict {k}: {v}\n"));
        }
        for (k, v) in &self.residuals {
            out.push_str(&format!("residual {k}: {v}\n"));
        }
        if let Some(path) = &self.artifact_path {
            out.push_str(&format!("artifact written to {path}\n"));
        }
        out
    }
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

fn digest(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
        hasher.update([0u8]);
    }
    let bytes = hasher.finalize();
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn load_channel(bytes: &[u8], cfg: &ToleranceConfig) -> Result<ChannelParams, Failure> {
    let file: ChannelFile =
        serde_json::from_slice(bytes).map_err(|e| Failure::Data(format!("channel file: {e}")))?;
    file.to_params(cfg)
        .map_err(|e| Failure::Data(format!("channel file: {e}")))
}

fn load_state(bytes: &[u8], cfg: &ToleranceConfig) -> Result<GaussianState, Failure> {
    let file: StateFile =
        serde_json::from_slice(bytes).map_err(|e| Failure::Data(format!("state file: {e}")))?;
    file.to_state(cfg)
        .map_err(|e| Failure::Data(format!("state file: {e}")))
}

fn load_dilation(bytes: &[u8]) -> Result<DilationSpec, Failure> {
    let file: DilationFile =
        serde_json::from_slice(bytes).map_err(|e| Failure::Data(format!("dilation file: {e}")))?;
    file.to_spec()
        .map_err(|e| Failure::Data(format!("dilation file: {e}")))
}

fn attach_artifact<T: Serialize>(
    report: &mut Report,
    out: &Option<PathBuf>,
    artifact: &T,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let text = crate::io::to_json_string(artifact)
                .map_err(|e| Failure::Internal(format!("serialize artifact: {e}")))?;
            std::fs::write(path, text)
                .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
            report.artifact_path = Some(path.display().to_string());
        }
        None => {
            report.artifact = Some(
                serde_json::to_value(artifact)
                    .map_err(|e| Failure::Internal(format!("serialize artifact: {e}")))?,
            );
        }
    }
    Ok(())
}

/// Entry point used by the binary and by tests. Returns the process exit
/// code; the report goes to stdout, errors to stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match ToleranceConfig::new(cli.eig_tol, cli.tol, cli.eps) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("gchan: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(&cli, &cfg, &args) {
        Ok((code, report)) => {
            if cli.json {
                match serde_json::to_string(&report) {
                    Ok(line) => println!("{line}"),
                    Err(e) => {
                        eprintln!("gchan: cannot serialize report: {e}");
                        return EXIT_INTERNAL;
                    }
                }
            } else {
                print!("{}", report.render_human());
            }
            code
        }
        Err(failure) => {
            eprintln!("gchan: {}", failure.message());
            failure.exit_code()
        }
    }
}

fn execute(cli: &Cli, cfg: &ToleranceConfig, argv: &[String]) -> Result<(i32, Report), Failure> {
    let opts = SearchOptions {
        restarts: cli.restarts,
        iters: cli.iters,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Check { channel } => {
            let bytes = read_file(channel)?;
            let ch = load_channel(&bytes, cfg)?;
            let mut report = Report::new("check", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"check", &bytes]);
            let rep = ch.validity(cfg);
            report.verdict("valid", rep.valid);
            report.residual("min_eig_minus", rep.min_eig_minus);
            report.residual("min_eig_plus", rep.min_eig_plus);
            report.residual("y_min_eig", rep.y_min_eig);
            report.residual("scale", rep.scale);
            let code = if rep.valid { EXIT_OK } else { EXIT_NEGATIVE };
            Ok((code, report))
        }
        Command::Evolve { channel, state } => {
            let ch_bytes = read_file(channel)?;
            let st_bytes = read_file(state)?;
            let ch = load_channel(&ch_bytes, cfg)?;
            let st = load_state(&st_bytes, cfg)?;
            let mut report = Report::new("evolve", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"evolve", &ch_bytes, &st_bytes]);
            let rep = ch.validity(cfg);
            report.verdict("valid", rep.valid);
            report.residual("min_eig_minus", rep.min_eig_minus);
            if !rep.valid {
                return Ok((EXIT_NEGATIVE, report));
            }
            let out = ch
                .apply(&st, cfg)
                .map_err(|e| Failure::Internal(format!("evolution failed: {e}")))?;
            attach_artifact(&mut report, &cli.out, &StateFile::from_state(&out))?;
            Ok((EXIT_OK, report))
        }
        Command::Dilate { channel } => {
            let bytes = read_file(channel)?;
            let ch = load_channel(&bytes, cfg)?;
            let mut report = Report::new("dilate", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"dilate", &bytes]);
            let rep = ch.validity(cfg);
            report.verdict("valid", rep.valid);
            report.residual("min_eig_minus", rep.min_eig_minus);
            if !rep.valid {
                return Ok((EXIT_NEGATIVE, report));
            }
            let dil = build_dilation(&ch, cfg)
                .map_err(|e| Failure::Internal(format!("dilation synthesis failed: {e}")))?;
            let residual = crate::symplectic::symplectic_residual(dil.g(), &dil.form())
                .map_err(|e| Failure::Internal(e.to_string()))?;
            report.verdict("d_env", dil.d_env() as u64);
            report.residual("symplectic_residual", residual);
            let recon = (dil.coupling().transpose() * dil.coupling() - ch.y()).norm();
            report.residual("noise_reconstruction", recon);
            attach_artifact(&mut report, &cli.out, &DilationFile::from_spec(&dil))?;
            Ok((EXIT_OK, report))
        }
        Command::Verify { channel, dilation } => {
            let ch_bytes = read_file(channel)?;
            let dil_bytes = read_file(dilation)?;
            let ch = load_channel(&ch_bytes, cfg)?;
            let dil = load_dilation(&dil_bytes)?;
            let mut report = Report::new("verify", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"verify", &ch_bytes, &dil_bytes]);
            let n_states = cli.samples.max(1);
            let deviation = verify_dilation(&dil, &ch, n_states, cli.seed, cfg)
                .map_err(|e| Failure::Data(format!("verification failed: {e}")))?;
            report.verdict("states", n_states as u64);
            report.residual("max_deviation", deviation);
            let ok = deviation <= cfg.residual_tol;
            report.verdict("within_tolerance", ok);
            Ok((if ok { EXIT_OK } else { EXIT_NEGATIVE }, report))
        }
        Command::Interferometer { channel } => {
            let bytes = read_file(channel)?;
            let ch = load_channel(&bytes, cfg)?;
            let mut report = Report::new("interferometer", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"interferometer", &bytes]);
            let decision = decide(&ch, &opts, cfg);
            let (code, status) = match decision.status {
                DecisionStatus::Yes => (EXIT_OK, "yes"),
                DecisionStatus::No => (EXIT_NEGATIVE, "no"),
                DecisionStatus::Undecided => (EXIT_UNDECIDED, "undecided"),
            };
            report.verdict("status", status);
            report.verdict("reason", decision.reason.code());
            report.residual("symmetry_residual", decision.symmetry_residual);
            if let Some(dil) = decision.dilation(cfg) {
                attach_artifact(&mut report, &cli.out, &DilationFile::from_spec(&dil))?;
            }
            Ok((code, report))
        }
        Command::Compose { first, second } => {
            let a_bytes = read_file(first)?;
            let b_bytes = read_file(second)?;
            let a = load_channel(&a_bytes, cfg)?;
            let b = load_channel(&b_bytes, cfg)?;
            let mut report = Report::new("compose", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"compose", &a_bytes, &b_bytes]);
            let composed = a
                .compose(&b)
                .map_err(|e| Failure::Data(format!("compose: {e}")))?;
            let rep = composed.validity(cfg);
            report.verdict("valid", rep.valid);
            report.residual("min_eig_minus", rep.min_eig_minus);
            attach_artifact(&mut report, &cli.out, &ChannelFile::from_params(&composed))?;
            Ok((EXIT_OK, report))
        }
        Command::Modes { channel } => {
            let bytes = read_file(channel)?;
            let ch = load_channel(&bytes, cfg)?;
            let mut report = Report::new("modes", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"modes", &bytes]);
            match ch.env_mode_bound(cfg) {
                Ok(bound) => {
                    report.verdict("env_mode_bound", bound as u64);
                    Ok((EXIT_OK, report))
                }
                Err(e) => {
                    report.verdict("valid", false);
                    report.verdict("error", e.to_string());
                    Ok((EXIT_NEGATIVE, report))
                }
            }
        }
        Command::Counterexample { d } => {
            let mut report = Report::new("counterexample", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"counterexample", format!("d={d}").as_bytes()]);
            let (ch, cx) = counterexample_channel(*d, cfg)
                .map_err(|e| Failure::Usage(format!("counterexample: {e}")))?;
            report.verdict("valid", cx.validity.valid);
            report.verdict("fd_sufficient", cx.fd_sufficient);
            report.verdict("fd0_member", cx.fd0_member);
            report.residual("min_eig_minus", cx.validity.min_eig_minus);
            let verdict = fd_member_sample(ch.x(), ch.y(), ch.form(), cli.samples, cli.seed, cfg)
                .map_err(|e| Failure::Internal(e.to_string()))?;
            report.verdict("fd_sample_falsified", verdict.is_falsified());
            attach_artifact(&mut report, &cli.out, &ChannelFile::from_params(&ch))?;
            Ok((EXIT_OK, report))
        }
        Command::TransposeMap { d } => {
            let mut report = Report::new("transpose-map", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"transpose-map", format!("d={d}").as_bytes()]);
            let ch = transpose_map(*d, cfg)
                .map_err(|e| Failure::Usage(format!("transpose-map: {e}")))?;
            let rep = ch.validity(cfg);
            report.verdict("valid", rep.valid);
            report.residual("min_eig_minus", rep.min_eig_minus);
            attach_artifact(&mut report, &cli.out, &ChannelFile::from_params(&ch))?;
            Ok((EXIT_OK, report))
        }
        Command::Selftest => {
            let mut report = Report::new("selftest", argv, cfg, cli.seed);
            report.inputs_digest = digest(&[b"selftest", format!("seed={}", cli.seed).as_bytes()]);
            let all_ok = selftest(&mut report, cfg, cli.seed, &opts);
            report.verdict("all", if all_ok { "pass" } else { "fail" });
            Ok((if all_ok { EXIT_OK } else { EXIT_NEGATIVE }, report))
        }
    }
}

fn record(report: &mut Report, name: &str, ok: bool) -> bool {
    report.verdict(name, if ok { "pass" } else { "fail" });
    ok
}

/// Reduced versions of the acceptance property suites, deterministic for
/// a fixed seed.
fn selftest(report: &mut Report, cfg: &ToleranceConfig, seed: u64, opts: &SearchOptions) -> bool {
    let mut all = true;

    // counterexample fixtures
    let mut ok = true;
    let mut worst = 0.0f64;
    for d in 1..=2 {
        let (ch, cx) = match counterexample_channel(d, cfg) {
            Ok(v) => v,
            Err(_) => {
                ok = false;
                break;
            }
        };
        worst = worst.max((cx.validity.min_eig_minus + 1.0).abs());
        ok &= !cx.validity.valid && cx.fd_sufficient && !cx.fd0_member;
        ok &= (cx.validity.min_eig_minus + 1.0).abs() <= 1e-9;
        ok &= fd_member_sample(ch.x(), ch.y(), ch.form(), 50, seed, cfg)
            .map(|v| !v.is_falsified())
            .unwrap_or(false);
    }
    report.residual("counterexample_min_eig_error", worst);
    all &= record(report, "counterexample", ok);

    // transpose-map rejection
    let ok = (1..=2).all(|d| {
        transpose_map(d, cfg)
            .map(|ch| {
                let rep = ch.validity(cfg);
                !rep.valid && (rep.min_eig_minus + 2.0).abs() <= 1e-9
            })
            .unwrap_or(false)
    });
    all &= record(report, "transpose_map", ok);

    // dilation round trip on oracle channels
    let mut ok = true;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let d = 1 + (i as usize) % 2;
        let trip = random_valid_channel(d, seed ^ (0xd11a + i), cfg).and_then(|ch| {
            let dil = build_dilation(&ch, cfg)?;
            let induced = dil.induced_channel(cfg)?;
            let dev = (induced.x() - ch.x())
                .amax()
                .max((induced.y() - ch.y()).amax())
                .max((induced.w() - ch.w()).amax());
            let state_dev = verify_dilation(&dil, &ch, 5, seed, cfg)?;
            Ok(dev.max(state_dev))
        });
        match trip {
            Ok(dev) => {
                worst = worst.max(dev);
                ok &= dev <= 1e-8;
            }
            Err(_) => ok = false,
        }
    }
    report.residual("dilation_round_trip_dev", worst);
    all &= record(report, "dilation_round_trip", ok);

    // singular-noise round trip
    let mut ok = true;
    let mut worst = 0.0f64;
    for i in 0..3 {
        let form = SymplecticForm::single(2).expect("form");
        let n = form.dim();
        let x = random_symplectic(&form, seed ^ (0x51f + i));
        let built = ChannelParams::new(
            x,
            nalgebra::DMatrix::zeros(n, n),
            nalgebra::DVector::zeros(n),
            form,
            cfg,
        )
        .and_then(|ch| {
            let dil = build_dilation(&ch, cfg)?;
            let induced = dil.induced_channel(cfg)?;
            Ok((induced.x() - ch.x()).amax().max(induced.y().amax()))
        });
        let fixture = rank_deficient_channel(2, seed ^ (0xdef + i), cfg).and_then(|ch| {
            let dil = build_dilation(&ch, cfg)?;
            let induced = dil.induced_channel(cfg)?;
            Ok((induced.x() - ch.x())
                .amax()
                .max((induced.y() - ch.y()).amax()))
        });
        match (built, fixture) {
            (Ok(a), Ok(b)) => {
                worst = worst.max(a).max(b);
                ok &= a <= 1e-6 && b <= 1e-6;
            }
            _ => ok = false,
        }
    }
    report.residual("singular_noise_dev", worst);
    all &= record(report, "singular_noise_round_trip", ok);

    // transpose equivalence of the certificate
    let mut ok = true;
    let mut worst = 0.0f64;
    for i in 0..100 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xe41 ^ ((i as u64) << 1));
        let d = 1 + (i as usize) % 2;
        let n = 2 * d;
        let x = nalgebra::DMatrix::from_fn(n, n, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let m = nalgebra::DMatrix::from_fn(n, n, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let y = (&m + m.transpose()) * 0.5;
        let form = SymplecticForm::single(d).expect("form");
        let Ok(ch) = ChannelParams::new(x, y, nalgebra::DVector::zeros(n), form, cfg) else {
            ok = false;
            continue;
        };
        let rep = ch.validity(cfg);
        let err = (rep.min_eig_minus - rep.min_eig_plus).abs() / (1.0 + ch.y().norm());
        worst = worst.max(err);
        ok &= err <= 1e-9;
    }
    report.residual("transpose_equivalence_err", worst);
    all &= record(report, "transpose_equivalence", ok);

    // interferometer affirmatives
    let mut ok = true;
    let form = SymplecticForm::single(1).expect("form");
    for k in 0..5 {
        let theta = k as f64 * std::f64::consts::PI / 10.0;
        let Ok(ch) = attenuator(&form, theta) else {
            ok = false;
            continue;
        };
        let out = decide(&ch, opts, cfg);
        ok &= out.status == DecisionStatus::Yes;
    }
    all &= record(report, "interferometer_attenuators", ok);

    // composition against sequential application
    let mut ok = true;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let run = random_valid_channel(1, seed ^ (0xc0 + i), cfg).and_then(|a| {
            let b = random_valid_channel(1, seed ^ (0xc1000 + i), cfg)?;
            let composed = a.compose(&b)?;
            let st = GaussianState::random(a.form(), seed ^ (0x57a7e + i), cfg);
            let seq = b.apply(&a.apply(&st, cfg)?, cfg)?;
            let one = composed.apply(&st, cfg)?;
            let scale = 1.0 + seq.cov().norm();
            let dev =
                ((seq.mean() - one.mean()).amax()).max((seq.cov() - one.cov()).amax()) / scale;
            Ok((dev, composed.validity(cfg).valid))
        });
        match run {
            Ok((dev, valid)) => {
                worst = worst.max(dev);
                ok &= dev <= 1e-9 && valid;
            }
            Err(_) => ok = false,
        }
    }
    report.residual("composition_dev", worst);
    all &= record(report, "composition", ok);

    // environment-mode fixtures
    let ok = (|| {
        let form = SymplecticForm::single(1).ok()?;
        let id = ChannelParams::identity(form.clone());
        let l = random_symplectic(&form, seed ^ 0x111);
        let rev = ChannelParams::new(
            l,
            nalgebra::DMatrix::zeros(2, 2),
            nalgebra::DVector::zeros(2),
            form.clone(),
            cfg,
        )
        .ok()?;
        let att = attenuator(&form, 0.6).ok()?;
        Some(
            id.env_mode_bound(cfg).ok()? == 0
                && rev.env_mode_bound(cfg).ok()? == 0
                && att.env_mode_bound(cfg).ok()? == 2,
        )
    })()
    .unwrap_or(false);
    all &= record(report, "env_mode_bound", ok);

    // JSON round trips
    let mut ok = true;
    for i in 0..10 {
        let run = random_valid_channel(1 + (i as usize) % 2, seed ^ (0x10ad + i), cfg)
            .map_err(|_| ())
            .and_then(|ch| {
                let (a, b) = crate::io::json_round_trip_bytes(&ChannelFile::from_params(&ch))
                    .map_err(|_| ())?;
                let st = GaussianState::random(ch.form(), seed ^ (0x57 + i), cfg);
                let (c, d) = crate::io::json_round_trip_bytes(&StateFile::from_state(&st))
                    .map_err(|_| ())?;
                Ok(a == b && c == d)
            });
        ok &= run.unwrap_or(false);
    }
    all &= record(report, "json_round_trip", ok);

    all
}
