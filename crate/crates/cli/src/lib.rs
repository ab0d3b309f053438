//! Command-line front end over `debye_core`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context};
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use debye_core::grid::snapshot::{read_snapshot, write_snapshot};
use debye_core::grid::{ScalarField, SpaceTimeField};
use debye_core::heat::smoothing_probe;
use debye_core::io::{parse_config, RunSpec};
use debye_core::lp::DyadicFilterBank;
use debye_core::mild::{estimate_constants, MildProblem};
use debye_core::sim::{diagnostics_to_csv, run, DIAGNOSTICS_HEADER};
use debye_core::wave::strichartz_energy_probe;
use debye_core::{Error, NormSpec, TimeExponent};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "DEBYE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "debye", version, about = "Drift-diffusion with a wave-propagated potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the time stepper and write its outputs with a manifest.
    Run(RunArgs),
    /// Empirical constants and probe ratios for a configuration.
    Probe(ProbeArgs),
    /// Littlewood-Paley profile of a snapshot.
    Norms(NormsArgs),
    /// Two-column plot data from a snapshot or a diagnostics file.
    Convert(ConvertArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Configuration files; each one is run in isolation.
    #[arg(long, required = true, num_args = 1..)]
    config: Vec<PathBuf>,
    /// Output directory (default: $DEBYE_OUT_DIR, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of configurations run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("kind").required(true).args(["constants", "smoothing", "strichartz"])))]
struct ProbeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Contraction report of the mild formulation.
    #[arg(long)]
    constants: bool,
    /// Heat smoothing ratio for the first species' initial datum.
    #[arg(long)]
    smoothing: bool,
    /// Wave energy-estimate ratio along the simulated charge density.
    #[arg(long)]
    strichartz: bool,
    #[arg(long, default_value_t = 16)]
    trials: usize,
    /// Probe seed (default: the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Regularity index for --smoothing and --strichartz.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s: f64,
    /// Time exponent for --smoothing: 1, 2 or inf.
    #[arg(long, default_value = "1")]
    q: String,
    /// Report file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NormsArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["snapshot", "diagnostics"])))]
struct ConvertArgs {
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// `value` for snapshots, a header name for diagnostics.
    #[arg(long, default_value = "value")]
    column: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Record written next to the outputs of every run.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Aborted(anyhow::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Aborted(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Invalid(e) | Failure::Aborted(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::NonFinite { .. } => Failure::Aborted(e.into()),
        e => Failure::Invalid(e.into()),
    }
}

/// Parses `argv` (program name first) and executes it. Returns 0 on
/// success, 1 on invalid input and 2 when a computation aborts on a
/// non-finite value.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Norms(a) => cmd_norms(a),
        Command::Convert(a) => cmd_convert(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            f.code()
        }
    }
}

fn load(path: &Path) -> Result<RunSpec, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).map_err(|e| Failure::Invalid(anyhow!("{}: {e}", path.display())))
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let root = args
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if args.config.len() == 1 {
        return run_one(&args.config[0], &root);
    }
    let dirs: Vec<PathBuf> = args
        .config
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let stem = c.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            root.join(format!("{:02}-{stem}", i + 1))
        })
        .collect();
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.clamp(1, args.config.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= args.config.len() {
                    break;
                }
                if let Err(f) = run_one(&args.config[i], &dirs[i]) {
                    failures.lock().unwrap().push((i, f));
                }
            });
        }
    });
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by_key(|(i, _)| *i);
    for (i, f) in &failures {
        eprintln!("error: {}: {:#}", args.config[*i].display(), f.error());
    }
    match failures.iter().map(|(_, f)| f.code()).max() {
        None => Ok(()),
        Some(2) => Err(Failure::Aborted(anyhow!("{} of {} runs failed", failures.len(), args.config.len()))),
        Some(_) => Err(Failure::Invalid(anyhow!("{} of {} runs failed", failures.len(), args.config.len()))),
    }
}

fn run_one(config_path: &Path, out: &Path) -> Result<(), Failure> {
    let started = Utc::now();
    let spec = load(config_path)?;
    let config = spec.solver_config::<f64>().map_err(classify)?;
    let (u0, v0, v1) = spec
        .initial_data(config.grid(), &base_dir(config_path))
        .map_err(classify)?;
    let result = run(&u0, &v0, &v1, &config).map_err(classify)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = Vec::new();
    let mut write = |name: String, bytes: Vec<u8>| -> anyhow::Result<()> {
        let path = out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path);
        Ok(())
    };
    for (i, diag) in result.diagnostics.iter().enumerate() {
        let name = if i == 0 {
            "diagnostics.csv".to_string()
        } else {
            format!("diagnostics.species-{}.csv", i + 1)
        };
        write(name, diagnostics_to_csv(diag).into_bytes())?;
        if let Some(row) = diag.iter().find(|r| r.wrapped) {
            eprintln!("warning: waves wrap around the periodic box from t = {}", row.t);
        }
    }
    let stride = spec.output.snapshot_stride.max(1);
    let last = config.steps();
    for k in (0..=last).filter(|k| k % stride == 0 || *k == last) {
        for (i, u) in result.u.iter().enumerate() {
            write(format!("u{}_{k:06}.dbw1", i + 1), snapshot_bytes(u.frame(k))?)?;
        }
        write(format!("V_{k:06}.dbw1"), snapshot_bytes(result.v.frame(k))?)?;
    }

    let manifest = RunManifest {
        config_hash: spec.config_hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started: started.to_rfc3339(),
        finished: Utc::now().to_rfc3339(),
        seed: spec.output.seed,
        outputs: outputs.clone(),
    };
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(anyhow::Error::from)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn snapshot_bytes(f: &ScalarField<f64>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_snapshot(f, &mut buf)?;
    Ok(buf)
}

fn cmd_probe(args: ProbeArgs) -> Result<(), Failure> {
    let spec = load(&args.config)?;
    let config = spec.solver_config::<f64>().map_err(classify)?;
    let (u0, v0, v1) = spec
        .initial_data(config.grid(), &base_dir(&args.config))
        .map_err(classify)?;
    let report = if args.constants {
        let seed = args.seed.unwrap_or(spec.output.seed);
        let problem = MildProblem::new(config.clone(), u0[0].clone(), v0, v1).map_err(classify)?;
        let spec_norm = NormSpec::default_for(spec.dim);
        estimate_constants(&problem, spec_norm, args.trials, seed)
            .map_err(classify)?
            .to_string()
    } else if args.smoothing {
        let q = match args.q.as_str() {
            "1" => TimeExponent::One,
            "2" => TimeExponent::Two,
            "inf" => TimeExponent::Infinity,
            other => return Err(Failure::Invalid(anyhow!("--q must be 1, 2 or inf, got `{other}`"))),
        };
        let bank = DyadicFilterBank::new(config.grid()).map_err(classify)?;
        let r = smoothing_probe(&u0[0], args.s, config.t_final(), q, &bank).map_err(classify)?;
        format!("probe=smoothing\nsigma={:?}\nq={}\nT={:?}\nratio={r:.16e}\n", args.s, args.q, config.t_final())
    } else {
        let out = run(&u0, &v0, &v1, &config).map_err(classify)?;
        let charge = charge_density(&out.u, &config);
        let bank = DyadicFilterBank::new(config.grid()).map_err(classify)?;
        let r = strichartz_energy_probe(&charge, &v0, &v1, args.s, &bank).map_err(classify)?;
        format!("probe=strichartz\ns={:?}\nT={:?}\nratio={r:.16e}\n", args.s, config.t_final())
    };
    emit(args.out.as_deref(), &report)?;
    Ok(())
}

/// `sum_k alpha_k u_k` on the time levels of the run.
fn charge_density(u: &[SpaceTimeField<f64>], config: &debye_core::SolverConfig64) -> SpaceTimeField<f64> {
    let mut acc = SpaceTimeField::zeros(config.grid(), &config.times());
    for (field, sp) in u.iter().zip(config.species()) {
        acc = acc.add(&field.scaled(sp.alpha)).expect("same time grid");
    }
    acc
}

fn read_field(path: &Path) -> Result<ScalarField<f64>, Failure> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_snapshot(std::io::BufReader::new(file)).map_err(|e| Failure::Invalid(anyhow!("{}: {e}", path.display())))
}

fn cmd_norms(args: NormsArgs) -> Result<(), Failure> {
    let f = read_field(&args.snapshot)?;
    let bank = DyadicFilterBank::new(f.grid()).map_err(classify)?;
    let profile = bank.profile(&f, args.s).map_err(classify)?;
    emit(args.out.as_deref(), &profile.to_csv())?;
    Ok(())
}

fn cmd_convert(args: ConvertArgs) -> Result<(), Failure> {
    let text = if let Some(path) = &args.snapshot {
        if args.column != "value" {
            return Err(Failure::Invalid(anyhow!("snapshots have a single column `value`")));
        }
        snapshot_table(&read_field(path)?)
    } else {
        let path = args.diagnostics.as_ref().expect("clap enforces one input");
        let csv = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        diagnostics_column(&csv, &args.column).map_err(Failure::Invalid)?
    };
    emit(args.out.as_deref(), &text)?;
    Ok(())
}

/// `x,value` in 1D; `x,y,value` in 2D.
fn snapshot_table(f: &ScalarField<f64>) -> String {
    let g = f.grid();
    let mut out = String::from(if g.dim() == 1 { "x,value\n" } else { "x,y,value\n" });
    for (i, v) in f.samples().iter().enumerate() {
        let c = g.coords(i);
        if g.dim() == 1 {
            out.push_str(&format!("{:.17e},{v:.17e}\n", c[0]));
        } else {
            out.push_str(&format!("{:.17e},{:.17e},{v:.17e}\n", c[0], c[1]));
        }
    }
    out
}

fn diagnostics_column(csv: &str, column: &str) -> anyhow::Result<String> {
    debye_core::sim::diagnostics_from_csv::<f64>(csv)?;
    let names: Vec<&str> = DIAGNOSTICS_HEADER.split(',').collect();
    let idx = names
        .iter()
        .position(|&n| n == column)
        .ok_or_else(|| anyhow!("unknown column `{column}`; expected one of {}", names.join(", ")))?;
    if idx == 0 {
        bail!("`t` is the abscissa, pick another column");
    }
    let mut out = format!("t,{column}\n");
    for line in csv.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        out.push_str(&format!("{},{}\n", cells[0], cells[idx]));
    }
    Ok(out)
}
