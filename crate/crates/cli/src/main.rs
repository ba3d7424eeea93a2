mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use photonic_core::experiments::{
    registry, run, sweep, verify, BellResource, Experiment, RunConfig, RunReport, SweepParam, SweepRow, SweepSpec,
    VerifyOptions, VerifyReport, DEFAULT_ALPHA, DEFAULT_KAPPA_T, DEFAULT_SEED,
};
use photonic_core::gates::EntanglerInput;
use photonic_core::par::Execution;
use photonic_core::qnd::ErrorModel;
use photonic_core::{PhotonicError, QubitAmplitudes};

use config::{
    checked_qubit, parse_amplitudes, parse_bool, parse_complex, parse_from_str, parse_input_pair, parse_range, pick, pick_parsed,
    ConfigError, FileConfig,
};

const SEED_ENV: &str = "PHOTONIC_SEED";

#[derive(Parser, Debug)]
#[command(name = "photonic", version, about = "Exact simulation of linear-optical CNOT gates and QND heralding")]
struct Cli {
    /// Flat key = value file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the available experiments.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Simulate one experiment and print its report.
    Run(RunArgs),
    /// Check an experiment (or all) against its expected results.
    Verify(VerifyArgs),
    /// Sweep a QND probe parameter and tabulate herald error and fidelity.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct RunArgs {
    experiment: String,
    /// Control qubit: H, V, +, -, or h,v amplitudes (complex as re+imj).
    #[arg(long, allow_hyphen_values = true)]
    control: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Both gate inputs as two labels, control first (e.g. HV).
    #[arg(long, allow_hyphen_values = true)]
    input: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Half-wave plate on entangler output 3.
    #[arg(long)]
    hwp: bool,
    /// Bell-CNOT resource: phi-plus, psi-plus or product.
    #[arg(long)]
    resource: Option<String>,
    #[command(flatten)]
    probe: ProbeArgs,
    #[arg(long)]
    error_model: Option<String>,
    /// Also sample this many records from the exact distribution.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Include intermediate trace points.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Probe amplitude |alpha|.
    #[arg(long)]
    alpha: Option<f64>,
    /// Probe mean photon number, an alternative to --alpha.
    #[arg(long, conflicts_with = "alpha")]
    mean_n: Option<f64>,
    #[arg(long)]
    kappa_t: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Experiment name or `all`.
    experiment: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Random inputs per statistical claim.
    #[arg(long)]
    trials: Option<usize>,
    /// Shots for the sampling check.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    json: bool,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// alpha or kappa_t
    param: String,
    /// start:end:points
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    experiment: Option<String>,
    #[command(flatten)]
    probe: ProbeArgs,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Verification,
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<PhotonicError> for Failure {
    fn from(e: PhotonicError) -> Self {
        match e {
            PhotonicError::InvalidInput(_) | PhotonicError::InvalidProbe(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn field<T>(key: &str) -> impl Fn(T) -> Failure
where
    T: std::fmt::Display,
{
    let key = key.to_string();
    move |e| Failure::Usage(format!("{key}: {e}"))
}

fn seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, Failure> {
    if let Some(s) = pick(flag, file, "seed", parse_from_str)? {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => parse_from_str(&v).map_err(field(SEED_ENV)),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn experiment(name: &str) -> Result<Experiment, Failure> {
    name.parse().map_err(|_| {
        let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        Failure::Usage(format!("experiment: unknown {name:?} (expected one of {})", known.join(", ")))
    })
}

fn probe_params(p: &ProbeArgs, file: &FileConfig) -> Result<(f64, f64), Failure> {
    let alpha = match pick(p.alpha, file, "alpha", parse_from_str)? {
        Some(a) => a,
        None => match pick(p.mean_n, file, "mean-n", parse_from_str::<f64>)? {
            Some(n) if n >= 0.0 => n.sqrt(),
            Some(n) => return Err(Failure::Usage(format!("mean-n: must be non-negative, got {n}"))),
            None => DEFAULT_ALPHA,
        },
    };
    let kappa_t = pick(p.kappa_t, file, "kappa-t", parse_from_str)?.unwrap_or(DEFAULT_KAPPA_T);
    Ok((alpha, kappa_t))
}

fn qubit_pair(
    first: (&str, &Option<String>),
    second: (&str, &Option<String>),
    file: &FileConfig,
    default: QubitAmplitudes,
) -> Result<QubitAmplitudes, Failure> {
    let h = pick(first.1.clone(), file, first.0, |s| Ok(s.to_string()))?;
    let v = pick(second.1.clone(), file, second.0, |s| Ok(s.to_string()))?;
    match (h, v) {
        (None, None) => Ok(default),
        (Some(h), Some(v)) => {
            let h = parse_complex(&h).map_err(field(first.0))?;
            let v = parse_complex(&v).map_err(field(second.0))?;
            checked_qubit(h, v).map_err(field(&format!("{}/{}", first.0, second.0)))
        }
        _ => Err(Failure::Usage(format!("{}/{}: give both amplitudes or neither", first.0, second.0))),
    }
}

fn run_config(args: &RunArgs, file: &FileConfig) -> Result<(RunConfig, Format), Failure> {
    let mut cfg = RunConfig::new(experiment(&args.experiment)?);
    if let Some((c, t)) = pick_parsed(args.input.as_deref(), file, "input", parse_input_pair)? {
        cfg.control = c;
        cfg.target = t;
    }
    if let Some(c) = pick_parsed(args.control.as_deref(), file, "control", parse_amplitudes)? {
        cfg.control = c;
    }
    if let Some(t) = pick_parsed(args.target.as_deref(), file, "target", parse_amplitudes)? {
        cfg.target = t;
    }
    let plus = QubitAmplitudes::plus();
    cfg.entangler = EntanglerInput {
        qubit_i: qubit_pair(("a", &args.a), ("b", &args.b), file, plus)?,
        qubit_ii: qubit_pair(("c", &args.c), ("d", &args.d), file, plus)?,
        qubit_iii: qubit_pair(("sigma", &args.sigma), ("beta", &args.beta), file, plus)?,
        qubit_iv: qubit_pair(("gamma", &args.gamma), ("delta", &args.delta), file, plus)?,
    };
    cfg.hwp = args.hwp || pick(None, file, "hwp", parse_bool)?.unwrap_or(false);
    cfg.trace = args.trace || pick(None, file, "trace", parse_bool)?.unwrap_or(false);
    if let Some(r) = pick_parsed(args.resource.as_deref(), file, "resource", |s| s.parse::<BellResource>().map_err(|e| e.to_string()))? {
        cfg.resource = r;
    }
    (cfg.alpha, cfg.kappa_t) = probe_params(&args.probe, file)?;
    if let Some(m) = pick_parsed(args.error_model.as_deref(), file, "error-model", |s| s.parse::<ErrorModel>().map_err(|e| e.to_string()))? {
        cfg.error_model = m;
    }
    cfg.shots = pick(args.shots, file, "shots", parse_from_str)?;
    cfg.seed = seed(args.seed, file)?;
    let format = pick(args.format, file, "format", |s| Format::from_str(s, true))?.unwrap_or(Format::Json);
    cfg.validate().map_err(|e| match e {
        PhotonicError::InvalidProbe(m) => Failure::Usage(format!("probe: {m}")),
        other => Failure::from(other),
    })?;
    Ok((cfg, format))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_text(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Failure::Runtime(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Runtime(e.to_string()))
}

fn branch_csv(report: &RunReport) -> Result<String, Failure> {
    csv_text(|w| {
        w.write_record(["record", "probability", "ket", "re", "im"])?;
        for b in report.final_branches() {
            for a in &b.state {
                w.write_record([b.record.clone(), b.probability.to_string(), a.ket.clone(), a.re.to_string(), a.im.to_string()])?;
            }
        }
        Ok(())
    })
}

fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> Result<String, Failure> {
    csv_text(|w| {
        w.write_record([param.to_string().as_str(), "herald_error", "fidelity", "detectable"])?;
        for r in rows {
            w.write_record([r.value.to_string(), r.herald_error.to_string(), r.fidelity.to_string(), r.detectable.to_string()])?;
        }
        Ok(())
    })
}

fn cmd_list(json: bool) -> Result<(), Failure> {
    let entries = registry();
    if json {
        return emit(&None, &to_json(&entries)?);
    }
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{:<14} {:<5} {}\n", e.name, e.success_rate, e.description));
    }
    emit(&None, &out)
}

fn cmd_run(args: &RunArgs, file: &FileConfig) -> Result<(), Failure> {
    let (cfg, format) = run_config(args, file)?;
    let report = run(&cfg)?;
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Csv => branch_csv(&report)?,
    };
    emit(&args.output, &text)
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e6) {
        format!("{v:.6e}")
    } else {
        format!("{v:.12}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn summary(reports: &[VerifyReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!("{} {}\n", if r.passed { "PASS" } else { "FAIL" }, r.experiment));
        for c in &r.claims {
            let rel = match c.comparison {
                photonic_core::experiments::Comparison::Eq => "=",
                photonic_core::experiments::Comparison::Ge => ">=",
                photonic_core::experiments::Comparison::Lt => "<",
            };
            out.push_str(&format!(
                "  {} {}: expected {rel} {}, computed {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.claim,
                fmt_value(c.expected),
                fmt_value(c.computed)
            ));
            if let Some(n) = &c.note {
                out.push_str(&format!(" ({n})"));
            }
            out.push('\n');
        }
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    out.push_str(&format!("{passed}/{} experiments passed\n", reports.len()));
    out
}

fn cmd_verify(args: &VerifyArgs, file: &FileConfig) -> Result<(), Failure> {
    let targets: Vec<Experiment> = if args.experiment == "all" {
        Experiment::ALL.to_vec()
    } else {
        vec![experiment(&args.experiment)?]
    };
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        seed: seed(args.seed, file)?,
        random_trials: pick(args.trials, file, "trials", parse_from_str)?.unwrap_or(defaults.random_trials),
        shots: pick(args.shots, file, "shots", parse_from_str)?.unwrap_or(defaults.shots),
        exec: if args.sequential { Execution::Sequential } else { Execution::default() },
    };
    if opts.random_trials == 0 || opts.shots == 0 {
        return Err(Failure::Usage("trials and shots must be positive".into()));
    }
    let reports = targets.iter().map(|e| verify(*e, &opts)).collect::<Result<Vec<_>, _>>()?;
    let text = if args.json { to_json(&reports)? } else { summary(&reports) };
    emit(&None, &text)?;
    if reports.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_sweep(args: &SweepArgs, file: &FileConfig) -> Result<(), Failure> {
    let param: SweepParam = args.param.parse().map_err(|_| Failure::Usage(format!("param: expected alpha or kappa_t, got {:?}", args.param)))?;
    let (start, end, points) = match pick_parsed(args.range.as_deref(), file, "range", parse_range)? {
        Some(r) => r,
        None => {
            let from = pick(args.from, file, "from", parse_from_str)?;
            let to = pick(args.to, file, "to", parse_from_str)?;
            let points = pick(args.points, file, "points", parse_from_str)?.unwrap_or(11);
            match (from, to) {
                (Some(f), Some(t)) => (f, t, points),
                _ => return Err(Failure::Usage("range: give --range start:end:points or --from and --to".into())),
            }
        }
    };
    let experiment = match pick(args.experiment.clone(), file, "experiment", |s| Ok(s.to_string()))? {
        Some(name) => experiment(&name)?,
        None => Experiment::CnotQnd,
    };
    let (alpha, kappa_t) = probe_params(&args.probe, file)?;
    let spec = SweepSpec { experiment, param, start, end, points, alpha, kappa_t };
    spec.validate().map_err(|e| Failure::Usage(format!("range: {e}")))?;
    let rows = sweep(&spec, Execution::default())?;
    let format = pick(args.format, file, "format", |s| Format::from_str(s, true))?.unwrap_or(Format::Csv);
    let text = match format {
        Format::Csv => sweep_csv(param, &rows)?,
        Format::Json => to_json(&rows)?,
    };
    emit(&args.output, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let file = match &cli.config {
        Some(p) => match FileConfig::load(p) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => FileConfig::default(),
    };
    let outcome = match &cli.command {
        Command::List { json } => cmd_list(*json),
        Command::Run(args) => cmd_run(args, &file),
        Command::Verify(args) => cmd_verify(args, &file),
        Command::Sweep(args) => cmd_sweep(args, &file),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
