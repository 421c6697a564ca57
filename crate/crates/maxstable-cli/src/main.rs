//! Command-line interface: simulation, exponent evaluation, and statistical
//! verification as reproducible, scriptable runs.
//!
//! Every run requires an explicit --seed (no environment fallback) and
//! emits a manifest next to its primary outputs capturing the command, the
//! full configuration snapshot, the seed, and output digests; re-running
//! the same command reproduces the primary outputs byte for byte.
//!
//! Exit codes: 0 success/consistent, 1 usage or configuration error,
//! 2 verification found an inconsistency.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use maxstable::core::{
    parse_locations_csv, parse_thresholds_csv, LocationSet, ModelSpec, ThresholdMatrix,
};
use maxstable::equivalence::{
    augmented_identifiability_test, default_directions, functional_equivalence_test,
    stationarity_test, zonoid_test, DecisionRule, EquivalenceVerdict, FunctionalBattery,
    ZonoidMode,
};
use maxstable::fidi::{fidi, ExponentRequest, Method};
use maxstable::simulate::{
    check_max_stability, simulate_maxstable, write_replicates_binary, write_replicates_csv,
    CascadeConfig,
};
use maxstable::spectral::build_sampler;

#[derive(Parser)]
#[command(
    name = "maxstable",
    version,
    about = "Simulate max-stable processes, evaluate their fidi's, and verify spectral identities"
)]
struct Cli {
    /// Rayon worker threads (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicates of X at a location set via the Poisson cascade.
    Simulate(SimulateArgs),
    /// Evaluate the exponent functional and fidi probability.
    Exponent(ExponentArgs),
    /// Statistical verification checks (exit 2 on inconsistency).
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Locations CSV (header row, one row per point).
    #[arg(long)]
    locs: PathBuf,
    #[arg(long = "n-rep")]
    n_rep: usize,
    #[arg(long)]
    seed: u64,
    /// Output path for the replicate matrix.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long = "max-points", default_value_t = 10_000)]
    max_points: usize,
    #[arg(long = "tail-guard", default_value_t = 5.0)]
    tail_guard: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Binary,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    locs: PathBuf,
    /// Thresholds CSV (one row per component, `inf` allowed).
    #[arg(long)]
    thresholds: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long = "n-rep", default_value_t = 100_000)]
    n_rep: usize,
    #[arg(long = "target-rel-err", default_value_t = 1e-5)]
    target_rel_err: f64,
    #[arg(long)]
    seed: u64,
    /// Optional JSON output path (a manifest is written alongside).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV output path (header + one result row).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mc,
    Tilts,
    Exact,
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Empirical max-stability identity P(X ≤ x)^c = P(X ≤ x/c^{1/α}).
    MaxStability(MaxStabilityArgs),
    /// Stationarity criteria via moment identities and tilted processes.
    Stationarity(StationarityArgs),
    /// Spectral equivalence of two models through a functional battery.
    Equivalence(EquivalenceArgs),
    /// Zonoid / max-zonoid equivalence of two sample sets.
    Zonoid(ZonoidArgs),
}

#[derive(Args)]
struct MaxStabilityArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    locs: PathBuf,
    #[arg(long)]
    thresholds: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long = "n-rep", default_value_t = 100_000)]
    n_rep: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StationarityArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    locs: PathBuf,
    /// Shift vector (comma-separated coordinates); repeatable.
    #[arg(long = "shift", required = true)]
    shifts: Vec<String>,
    #[arg(long = "n-rep", default_value_t = 100_000)]
    n_rep: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EquivalenceArgs {
    #[arg(long = "config-a")]
    config_a: PathBuf,
    #[arg(long = "config-b")]
    config_b: PathBuf,
    #[arg(long)]
    locs: PathBuf,
    #[arg(long = "n-rep", default_value_t = 100_000)]
    n_rep: usize,
    #[arg(long = "z-crit")]
    z_crit: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ZonoidArgs {
    /// Sample CSV (header row, one row per draw) for each side.
    #[arg(long = "samples-a")]
    samples_a: PathBuf,
    #[arg(long = "samples-b")]
    samples_b: PathBuf,
    #[arg(long, value_enum, default_value_t = ZonoidModeArg::Zonoid)]
    mode: ZonoidModeArg,
    /// Prepend a constant-1 coordinate (identifiability mode).
    #[arg(long)]
    augmented: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZonoidModeArg {
    Zonoid,
    #[value(name = "max-zonoid")]
    MaxZonoid,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap would exit 2 on usage errors; the contract reserves 2 for
            // "inconsistent" verdicts
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Exponent(args) => cmd_exponent(args),
        Command::Check(check) => match check {
            CheckCommand::MaxStability(args) => cmd_check_max_stability(args),
            CheckCommand::Stationarity(args) => cmd_check_stationarity(args),
            CheckCommand::Equivalence(args) => cmd_check_equivalence(args),
            CheckCommand::Zonoid(args) => cmd_check_zonoid(args),
        },
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

type CmdResult = Result<ExitCode, String>;

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load_model(path: &Path) -> Result<(ModelSpec, String), String> {
    let text = read(path)?;
    let spec = ModelSpec::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((spec, text))
}

fn load_locs(path: &Path) -> Result<LocationSet, String> {
    parse_locations_csv(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_thresholds(path: &Path) -> Result<ThresholdMatrix, String> {
    parse_thresholds_csv(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

struct ManifestBuilder {
    command: String,
    seed: u64,
    configs: Vec<(String, String)>,
    started: Instant,
    started_unix_ms: u128,
}

impl ManifestBuilder {
    fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            seed,
            configs: Vec::new(),
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }

    fn config(mut self, name: &str, text: &str) -> Self {
        self.configs.push((name.to_string(), text.to_string()));
        self
    }

    /// Writes `<first output>.manifest.json` covering all outputs.
    fn write(self, outputs: &[&Path]) -> Result<(), String> {
        let Some(first) = outputs.first() else {
            return Ok(());
        };
        let digests: Vec<serde_json::Value> = outputs
            .iter()
            .map(|path| {
                let bytes = fs::read(path)
                    .map_err(|e| format!("cannot digest {}: {e}", path.display()))?;
                let mut hasher = Sha256::new();
                hasher.update(&bytes);
                Ok(json!({
                    "path": path.display().to_string(),
                    "bytes": bytes.len(),
                    "sha256": format!("{:x}", hasher.finalize()),
                }))
            })
            .collect::<Result<_, String>>()?;
        let manifest = json!({
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "configs": self.configs.iter().map(|(name, text)| {
                json!({"name": name, "toml": text})
            }).collect::<Vec<_>>(),
            "started_unix_ms": self.started_unix_ms,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
            "outputs": digests,
        });
        let path = manifest_path(first);
        fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        Ok(())
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), String> {
    fs::write(path, serde_json::to_string_pretty(value).unwrap())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let manifest = ManifestBuilder::new("simulate", args.seed);
    let (spec, config_text) = load_model(&args.config)?;
    let locs = load_locs(&args.locs)?;
    let cascade = CascadeConfig {
        max_points: args.max_points,
        tail_guard: args.tail_guard,
        ..CascadeConfig::default()
    };
    let set = simulate_maxstable(&spec, &locs, &cascade, args.n_rep, args.seed)
        .map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    match args.format {
        OutputFormat::Csv => write_replicates_csv(&set, &mut buf),
        OutputFormat::Binary => write_replicates_binary(&set, &mut buf),
    }
    .map_err(|e| e.to_string())?;
    fs::write(&args.out, &buf).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    manifest
        .config("model", &config_text)
        .write(&[&args.out])?;
    println!(
        "wrote {} replicates ({} truncated) to {}",
        set.n_rep(),
        set.truncated.iter().filter(|&&t| t).count(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_exponent(args: ExponentArgs) -> CmdResult {
    let manifest = ManifestBuilder::new("exponent", args.seed);
    let (spec, config_text) = load_model(&args.config)?;
    let locs = load_locs(&args.locs)?;
    let thresholds = load_thresholds(&args.thresholds)?;
    let method = match args.method {
        MethodArg::Mc => Method::Mc { n_rep: args.n_rep },
        MethodArg::Tilts => Method::TiltDecomposition { n_rep: args.n_rep },
        MethodArg::Exact => Method::Exact {
            target_rel_err: args.target_rel_err,
            n_rep: args.n_rep,
        },
    };
    let request = ExponentRequest {
        spec,
        locs,
        thresholds,
        method,
        seed: args.seed,
    };
    let result = fidi(&request).map_err(|e| e.to_string())?;
    println!("method       exponent         stderr           probability");
    println!(
        "{:<12} {:<16} {:<16} {:<16}",
        result.method, result.exponent, result.stderr, result.probability
    );
    let mut value = serde_json::to_value(&result).unwrap();
    value["settings"] = json!({
        "seed": args.seed,
        "n_rep": args.n_rep,
        "target_rel_err": args.target_rel_err,
    });
    if let Some(csv) = &args.csv {
        let row = format!(
            "method,exponent,stderr,probability,probability_stderr,n_replicates\n{},{},{},{},{},{}\n",
            result.method,
            result.exponent,
            result.stderr,
            result.probability,
            result.probability_stderr,
            result.n_replicates
        );
        fs::write(csv, row).map_err(|e| format!("cannot write {}: {e}", csv.display()))?;
    }
    if let Some(out) = &args.out {
        write_json(out, &value)?;
        let mut outputs: Vec<&Path> = vec![out.as_path()];
        if let Some(csv) = &args.csv {
            outputs.push(csv.as_path());
        }
        manifest.config("model", &config_text).write(&outputs)?;
    } else {
        println!("{}", serde_json::to_string(&value).unwrap());
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict_exit(consistent: bool) -> ExitCode {
    if consistent {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn emit_verdict(
    out: Option<&Path>,
    manifest: ManifestBuilder,
    value: &serde_json::Value,
) -> Result<(), String> {
    println!("{}", serde_json::to_string_pretty(value).unwrap());
    if let Some(path) = out {
        write_json(path, value)?;
        manifest.write(&[path])?;
    }
    Ok(())
}

fn cmd_check_max_stability(args: MaxStabilityArgs) -> CmdResult {
    let manifest = ManifestBuilder::new("check max-stability", args.seed);
    let (spec, config_text) = load_model(&args.config)?;
    let locs = load_locs(&args.locs)?;
    let thresholds = load_thresholds(&args.thresholds)?;
    let set = simulate_maxstable(
        &spec,
        &locs,
        &CascadeConfig::default(),
        args.n_rep,
        args.seed,
    )
    .map_err(|e| e.to_string())?;
    let report = check_max_stability(&set, args.c, &thresholds);
    let z_crit = DecisionRule::default().z_crit(1);
    let consistent = report.z.abs() <= z_crit;
    let value = json!({
        "kind": "max-stability",
        "consistent": consistent,
        "z_crit": z_crit,
        "report": serde_json::to_value(&report).unwrap(),
    });
    emit_verdict(
        args.out.as_deref(),
        manifest.config("model", &config_text),
        &value,
    )?;
    Ok(verdict_exit(consistent))
}

fn parse_shift(text: &str, p: usize) -> Result<Vec<f64>, String> {
    let shift: Vec<f64> = text
        .split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("bad shift '{text}'")))
        .collect::<Result<_, _>>()?;
    if shift.len() != p {
        return Err(format!("shift '{text}' has dimension {}, expected {p}", shift.len()));
    }
    Ok(shift)
}

fn cmd_check_stationarity(args: StationarityArgs) -> CmdResult {
    let manifest = ManifestBuilder::new("check stationarity", args.seed);
    let (spec, config_text) = load_model(&args.config)?;
    let locs = load_locs(&args.locs)?;
    let shifts: Vec<Vec<f64>> = args
        .shifts
        .iter()
        .map(|s| parse_shift(s, spec.p))
        .collect::<Result<_, _>>()?;
    let components: Vec<usize> = (0..spec.d).collect();
    let battery = FunctionalBattery::degree_zero(spec.d, locs.n());
    let verdict = stationarity_test(
        &spec,
        &shifts,
        &components,
        &battery,
        &locs,
        args.n_rep,
        args.seed,
        &DecisionRule::default(),
    )
    .map_err(|e| e.to_string())?;
    let consistent = verdict.consistent;
    let value = verdict_json("stationarity", &verdict);
    emit_verdict(
        args.out.as_deref(),
        manifest.config("model", &config_text),
        &value,
    )?;
    Ok(verdict_exit(consistent))
}

fn cmd_check_equivalence(args: EquivalenceArgs) -> CmdResult {
    let manifest = ManifestBuilder::new("check equivalence", args.seed);
    let (spec_a, text_a) = load_model(&args.config_a)?;
    let (spec_b, text_b) = load_model(&args.config_b)?;
    if spec_a.d != spec_b.d || spec_a.alpha != spec_b.alpha {
        return Err("models must share d and alpha for spectral equivalence".into());
    }
    let locs = load_locs(&args.locs)?;
    let sampler_a = build_sampler(&spec_a, &locs).map_err(|e| e.to_string())?;
    let sampler_b = build_sampler(&spec_b, &locs).map_err(|e| e.to_string())?;
    let battery = FunctionalBattery::default_battery(spec_a.d, locs.n(), spec_a.alpha, args.seed);
    let rule = match args.z_crit {
        Some(z) => DecisionRule::with_z_crit(z),
        None => DecisionRule::default(),
    };
    let verdict = functional_equivalence_test(
        sampler_a.as_ref(),
        sampler_b.as_ref(),
        &battery,
        args.n_rep,
        args.seed,
        &rule,
    )
    .map_err(|e| e.to_string())?;
    let consistent = verdict.consistent;
    let value = verdict_json("equivalence", &verdict);
    emit_verdict(
        args.out.as_deref(),
        manifest.config("model-a", &text_a).config("model-b", &text_b),
        &value,
    )?;
    Ok(verdict_exit(consistent))
}

fn cmd_check_zonoid(args: ZonoidArgs) -> CmdResult {
    let manifest = ManifestBuilder::new("check zonoid", args.seed);
    let parse_samples = |path: &Path| -> Result<Vec<Vec<f64>>, String> {
        Ok(parse_locations_csv(&read(path)?)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .points()
            .to_vec())
    };
    let samples_a = parse_samples(&args.samples_a)?;
    let samples_b = parse_samples(&args.samples_b)?;
    let mode = match args.mode {
        ZonoidModeArg::Zonoid => ZonoidMode::Zonoid,
        ZonoidModeArg::MaxZonoid => ZonoidMode::MaxZonoid,
    };
    let m = samples_a.first().map(|r| r.len()).unwrap_or(0) + usize::from(args.augmented);
    let directions = default_directions(m, mode, args.seed);
    let rule = DecisionRule::default();
    let verdict = if args.augmented {
        augmented_identifiability_test(&samples_a, &samples_b, &directions, mode, &rule)
    } else {
        zonoid_test(&samples_a, &samples_b, &directions, mode, &rule)
    }
    .map_err(|e| e.to_string())?;
    let consistent = verdict.consistent;
    let value = verdict_json("zonoid", &verdict);
    emit_verdict(args.out.as_deref(), manifest, &value)?;
    Ok(verdict_exit(consistent))
}

fn verdict_json(kind: &str, verdict: &EquivalenceVerdict) -> serde_json::Value {
    json!({
        "kind": kind,
        "consistent": verdict.consistent,
        "z_crit": verdict.z_crit,
        "familywise_level": verdict.familywise_level,
        "max_abs_z": verdict.max_abs_z(),
        "functionals": serde_json::to_value(&verdict.reports).unwrap(),
    })
}
