//! `qcr`: run, interrupt, resume and verify checkpointed quantum workloads.
//!
//! Reports go to stdout, diagnostics to stderr, artifacts to the checkpoint
//! directory. Exit codes are listed on [`Exit`].

mod verify;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcr_core::checkpoint_store::{Store, StoreError};
use qcr_core::circuit_ir::{region_boundaries, validate, Severity};
use qcr_core::restoration::RestoreError;
use qcr_core::runtime::{
    resume_workflow, run_workflow, FailureSpec, FalqonConfig, Policy, RunConfig, RunReport, RunStatus, RuntimeError,
    VqeConfig, Workload,
};

/// Program text of the last run started in a checkpoint directory.
const WORKLOAD_FILE: &str = "workload.qdc";
/// Policy of the last run started in a checkpoint directory.
const RUN_FILE: &str = "run.json";

#[derive(Parser)]
#[command(
    name = "qcr",
    version,
    about = "Checkpoint/restart runtime for dynamic quantum circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program file for a number of shots.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        shots: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Continue from the latest checkpoint, or from --checkpoint.
    Resume {
        #[arg(long, env = "QCR_CKPT_DIR")]
        ckpt_dir: PathBuf,
        /// Defaults to the program saved by the run that created the store.
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<String>,
        /// Defaults to the policy of the run that created the store.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        fail_at: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-check every record's digest and replay the latest lineage.
    Verify {
        #[arg(long, env = "QCR_CKPT_DIR")]
        ckpt_dir: PathBuf,
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Describe a program and/or the contents of a checkpoint directory.
    Info {
        #[arg(long, env = "QCR_CKPT_DIR")]
        ckpt_dir: Option<PathBuf>,
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<String>,
    },
    /// Variational eigensolver over a Pauli-sum Hamiltonian.
    Vqe {
        #[arg(long, default_value = "1*ZZ")]
        hamiltonian: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 0.2)]
        lr: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Feedback-based optimization layer by layer.
    Falqon {
        #[arg(long, default_value = "1*ZZ")]
        hp: String,
        #[arg(long, default_value = "1*XI,1*IX")]
        hd: String,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 50)]
        layers: u64,
        #[command(flatten)]
        common: Common,
    },
    /// GHZ preparation by ancilla measurement and feed-forward correction.
    Ghz {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        shots: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Mid-circuit measure-and-reset qubit reuse.
    Reuse {
        #[arg(long, default_value_t = 2)]
        qubits: usize,
        #[arg(long, default_value_t = 100)]
        shots: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Three-qubit bit-flip repetition code with Pauli-frame decoding.
    Repcode {
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        /// Inject one X as ROUND:QUBIT.
        #[arg(long)]
        error: Option<String>,
        #[arg(long, default_value_t = 1)]
        shots: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "QCR_CKPT_DIR")]
    ckpt_dir: PathBuf,
    /// Comma-joined triggers, e.g. `region,event` or `iter,conv:1e-4`.
    #[arg(long)]
    policy: Option<String>,
    /// `op:R:I[:S]`, `shot:K`, `iter:I` or `down:A-B`.
    #[arg(long)]
    fail_at: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A non-zero exit with its diagnostic.
///
/// | code | meaning |
/// | --- | --- |
/// | 1 | usage, parse or validation error |
/// | 2 | storage or restore error |
/// | 3 | run stopped by an injected failure |
/// | 4 | checkpoint belongs to another program |
/// | 5 | checkpoint not found or store empty |
/// | 6 | verification failed |
#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl Exit {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Exit {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl fmt::Display) -> Self {
        Exit::new(1, message.to_string())
    }

    fn io(what: &str, path: &Path, e: std::io::Error) -> Self {
        Exit::new(2, format!("{what} {}: {e}", path.display()))
    }
}

impl From<StoreError> for Exit {
    fn from(e: StoreError) -> Self {
        let code = if matches!(e, StoreError::NotFound(_)) { 5 } else { 2 };
        Exit::new(code, e.to_string())
    }
}

impl From<RuntimeError> for Exit {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::Config(_) | RuntimeError::SpecOutOfRange(_) | RuntimeError::Parse(_) => Exit::usage(e),
            RuntimeError::Store(e) => e.into(),
            RuntimeError::Restore(RestoreError::ProgramMismatch { .. }) => Exit::new(4, e.to_string()),
            RuntimeError::Restore(_) | RuntimeError::Sim(_) => Exit::new(2, e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qcr: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Exit> {
    match command {
        Command::Run { program, shots, common } => {
            let text = read_program(&program)?;
            let workload = load_workload(&text, &program)?;
            start(&workload, &text, shots, common)
        }
        Command::Resume {
            ckpt_dir,
            program,
            checkpoint,
            policy,
            fail_at,
            output,
        } => {
            let program = program_or_saved(program, &ckpt_dir)?;
            let text = read_program(&program)?;
            let workload = load_workload(&text, &program)?;
            let policy = match policy {
                Some(p) => p,
                None => saved_policy(&ckpt_dir)?.unwrap_or_else(|| default_policy(&workload).to_string()),
            };
            let policy: Policy = policy.parse()?;
            let failure = parse_failure(fail_at.as_deref())?;
            let store = Store::open_existing(&ckpt_dir);
            let id = match checkpoint {
                Some(id) => id,
                None => latest(&store)?,
            };
            let report = resume_workflow(&workload, &policy, failure, &store, Some(&id))?;
            emit(&report, output.as_deref())
        }
        Command::Verify { ckpt_dir, program } => {
            let program = program_or_saved(program, &ckpt_dir)?;
            let text = read_program(&program)?;
            let workload = load_workload(&text, &program)?;
            let summary = verify::verify(&Store::open_existing(&ckpt_dir), workload.program())?;
            print_out(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
            Ok(0)
        }
        Command::Info {
            ckpt_dir,
            program,
            checkpoint,
        } => info(ckpt_dir.as_deref(), program.as_deref(), checkpoint.as_deref()),
        Command::Vqe {
            hamiltonian,
            depth,
            lr,
            tol,
            max_iter,
            common,
        } => {
            let mut config = VqeConfig::new(hamiltonian.parse().map_err(Exit::usage)?);
            config.depth = depth;
            config.learning_rate = lr;
            config.tolerance = tol;
            config.max_iterations = max_iter;
            let workload = Workload::vqe(config)?;
            start(&workload, &workload.to_text(), 0, common)
        }
        Command::Falqon {
            hp,
            hd,
            dt,
            layers,
            common,
        } => {
            let config = FalqonConfig {
                hp: hp.parse().map_err(Exit::usage)?,
                hd: hd.parse().map_err(Exit::usage)?,
                dt,
                layers,
            };
            let workload = Workload::falqon(config)?;
            start(&workload, &workload.to_text(), 0, common)
        }
        Command::Ghz { n, shots, common } => {
            let workload = Workload::ghz(n)?;
            start(&workload, &workload.to_text(), shots, common)
        }
        Command::Reuse { qubits, shots, common } => {
            let workload = Workload::reuse(qubits)?;
            start(&workload, &workload.to_text(), shots, common)
        }
        Command::Repcode {
            rounds,
            error,
            shots,
            common,
        } => {
            let injected = error.as_deref().map(parse_injection).transpose()?;
            let workload = Workload::repetition_code(rounds, injected)?;
            start(&workload, &workload.to_text(), shots, common)
        }
    }
}

fn parse_injection(s: &str) -> Result<(usize, usize), Exit> {
    let bad = || Exit::usage(format!("bad --error `{s}`, expected ROUND:QUBIT"));
    let (r, q) = s.split_once(':').ok_or_else(bad)?;
    Ok((r.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?))
}

/// Print a line to stdout. A closed pipe (`qcr ... | head`) is not an error.
fn print_out(text: &str) {
    let mut out = io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("qcr: writing report: {e}");
        }
    }
}

/// `--program`, or the program saved by the run that created `dir`.
fn program_or_saved(program: Option<PathBuf>, dir: &Path) -> Result<PathBuf, Exit> {
    if let Some(p) = program {
        return Ok(p);
    }
    let saved = dir.join(WORKLOAD_FILE);
    if !saved.exists() {
        return Err(Exit::new(
            5,
            format!("no run found in {}; pass --program", dir.display()),
        ));
    }
    Ok(saved)
}

/// Id of the newest record; an empty store exits with 5.
pub(crate) fn latest(store: &Store) -> Result<String, Exit> {
    store
        .latest()?
        .ok_or_else(|| Exit::new(5, format!("no checkpoint in {}", store.root().display())))
}

fn read_program(path: &Path) -> Result<String, Exit> {
    let bytes = fs::read(path).map_err(|e| Exit::usage(format!("reading {}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|e| Exit::usage(format!("{}: not UTF-8: {e}", path.display())))
}

/// Parse and validate, printing warnings to stderr.
fn load_workload(text: &str, path: &Path) -> Result<Workload, Exit> {
    let workload = Workload::from_text(text).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    for d in validate(workload.program()) {
        if d.severity == Severity::Warning {
            eprintln!("{}: {d}", path.display());
        }
    }
    Ok(workload)
}

fn default_policy(workload: &Workload) -> &'static str {
    if workload.is_iterative() {
        "iter"
    } else {
        "region"
    }
}

fn parse_failure(spec: Option<&str>) -> Result<Option<FailureSpec>, Exit> {
    spec.map(|s| s.parse::<FailureSpec>().map_err(Exit::usage)).transpose()
}

fn saved_policy(dir: &Path) -> Result<Option<String>, Exit> {
    let path = dir.join(RUN_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Exit::io("reading", &path, e)),
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Exit::new(2, format!("{}: {e}", path.display())))?;
    Ok(value["policy"].as_str().map(str::to_string))
}

/// Fresh run: save the program and policy next to the checkpoints so a
/// later `resume` needs only the directory.
fn start(workload: &Workload, text: &str, shots: u64, common: Common) -> Result<u8, Exit> {
    let policy = common.policy.as_deref().unwrap_or(default_policy(workload));
    let policy: Policy = policy.parse()?;
    let config = RunConfig {
        shots,
        master_seed: common.seed,
        policy: policy.clone(),
        failure: parse_failure(common.fail_at.as_deref())?,
    };
    let store = Store::open(&common.ckpt_dir)?;
    let saved = common.ckpt_dir.join(WORKLOAD_FILE);
    fs::write(&saved, text).map_err(|e| Exit::io("writing", &saved, e))?;
    let run_file = common.ckpt_dir.join(RUN_FILE);
    let run_json = serde_json::json!({ "policy": policy.to_string(), "workload": workload.name() });
    fs::write(&run_file, format!("{run_json}\n")).map_err(|e| Exit::io("writing", &run_file, e))?;
    let report = run_workflow(workload, &config, &store)?;
    emit(&report, common.output.as_deref())
}

fn emit(report: &RunReport, output: Option<&Path>) -> Result<u8, Exit> {
    let json = report.to_json();
    match output {
        Some(path) => fs::write(path, format!("{json}\n")).map_err(|e| Exit::io("writing", path, e))?,
        None => print_out(&json),
    }
    match report.status {
        RunStatus::Completed => Ok(0),
        RunStatus::Killed => {
            let at = report.failures.last().map_or("", |f| f.at.as_str());
            eprintln!("qcr: run stopped by injected failure at {at}; resume with `qcr resume`");
            Ok(3)
        }
    }
}

fn info(dir: Option<&Path>, program: Option<&Path>, checkpoint: Option<&str>) -> Result<u8, Exit> {
    if dir.is_none() && program.is_none() {
        return Err(Exit::usage("info needs --program or --ckpt-dir"));
    }
    let mut out = serde_json::Map::new();
    if let Some(path) = program {
        let workload = load_workload(&read_program(path)?, path)?;
        let p = workload.program();
        let boundaries: Vec<_> = region_boundaries(p).into_iter().filter(|b| b.checkpointable).collect();
        out.insert(
            "program".into(),
            serde_json::json!({
                "workload": workload.name(),
                "digest": p.source_digest,
                "qubits": p.num_qubits,
                "cregs": p.cregs,
                "regions": p.regions,
                "boundaries": boundaries,
            }),
        );
    }
    if let Some(dir) = dir {
        let store = Store::open_existing(dir);
        let id = match checkpoint {
            Some(id) => id.to_string(),
            None => latest(&store)?,
        };
        let record = store.get(&id)?;
        out.insert("lineage".into(), serde_json::json!(store.lineage(&id)?));
        out.insert(
            "checkpoint".into(),
            serde_json::to_value(&record).expect("record serializes"),
        );
    }
    print_out(&serde_json::to_string_pretty(&out).expect("info serializes"));
    Ok(0)
}
