//! Batch command-line driver.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{load_config, validate, ConfigError, Mode, SimulationConfig};
use crate::dse::{explore, DseError, SearchSpace};
use crate::hwperf::{build_chip, estimate, HardwareReport, HwError};
use crate::netgraph::{
    fidelity, quantize_weight, run_cim, run_reference, run_software, LayerStats, NetError,
};
use crate::tensorio::{synth_model, write_int_tensor, write_tensor, IntTensor, ModelBundle, NetworkDesc, TensorError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<HwError> for CliError {
    fn from(e: HwError) -> Self {
        match e {
            HwError::Schema(_) | HwError::Parse(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DseError> for CliError {
    fn from(e: DseError) -> Self {
        match e {
            DseError::Space(_) | DseError::Config(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cimsim", version, about = "Compute-in-memory accelerator simulator")]
pub struct Cli {
    /// Simulation config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    TinyCnn,
    TinyAttention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferMode {
    Software,
    Cim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateMode {
    Trace,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a teacher model bundle.
    Synth {
        /// Network description; overrides --preset.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tiny-cnn")]
        preset: Preset,
        /// Attention heads for the tiny-attention preset.
        #[arg(long, default_value_t = 1)]
        heads: usize,
        #[arg(long)]
        num_inputs: Option<usize>,
        /// Defaults to the config seed, or 0 without a config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantize every static weight to NPY integers plus JSON parameters.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run inference and report teacher fidelity.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "cim")]
        mode: InferMode,
        #[arg(long)]
        out: PathBuf,
        /// Also write the output logits as NPY.
        #[arg(long)]
        logits: Option<PathBuf>,
    },
    /// Run CIM inference and estimate area, latency and energy.
    Estimate {
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the config's mode.
        #[arg(long, value_enum)]
        mode: Option<EstimateMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy design-space exploration.
    Dse {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a hardware report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Quantize { .. } => "quantize",
            Command::Infer { .. } => "infer",
            Command::Estimate { .. } => "estimate",
            Command::Dse { .. } => "dse",
            Command::Report { .. } => "report",
        }
    }
}

/// Provenance of one invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// SHA-256 of the config file bytes, or of the resolved default config.
    pub config_digest: String,
    pub seed: u64,
    pub artifact_version: String,
    pub outputs: Vec<PathBuf>,
    /// Monotonic wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub jobs: usize,
}

/// Where the manifest of `out` goes: `r.json` → `r.manifest.json`,
/// `dir` → `dir.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = match (out.extension(), out.file_stem()) {
        (Some(_), Some(stem)) => stem.to_os_string(),
        _ => out.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| OsString::from("run")),
    };
    let mut name = stem;
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Session {
    cfg: SimulationConfig,
    config_digest: String,
    timings: BTreeMap<String, f64>,
    outputs: Vec<PathBuf>,
}

impl Session {
    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }
}

fn load_session(path: Option<&Path>) -> Result<Session, CliError> {
    let (cfg, bytes) = match path {
        Some(p) => {
            let bytes = std::fs::read(p)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
            (load_config(p)?, bytes)
        }
        None => {
            let cfg = SimulationConfig::example();
            let bytes = cfg.to_json().into_bytes();
            (cfg, bytes)
        }
    };
    let report = validate(&cfg);
    if let Some(i) = report.errors.first() {
        return Err(CliError::Validation(format!("config `{}`: {}", i.path, i.message)));
    }
    for w in &report.warnings {
        eprintln!("warning: config `{}`: {}", w.path, w.message);
    }
    Ok(Session {
        cfg,
        config_digest: digest(&bytes),
        timings: BTreeMap::new(),
        outputs: Vec::new(),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("in-memory values serialize") + "\n"
}

/// Result of `infer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferReport {
    pub schema_version: u32,
    pub mode: String,
    pub network: String,
    pub samples: usize,
    /// Top-1 agreement with the bundle labels.
    pub fidelity: f64,
    /// Same metric for the float reference model.
    pub reference_fidelity: f64,
    /// Present for CIM runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<LayerStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct QuantizedWeightFile {
    unit: String,
    shape: Vec<usize>,
    params: crate::quant::QuantParams,
    values: String,
}

fn execute(cli: &Cli, s: &mut Session) -> Result<(), CliError> {
    let cfg = s.cfg.clone();
    match &cli.command {
        Command::Synth {
            network,
            preset,
            heads,
            num_inputs,
            seed,
            out,
        } => {
            let mut desc = match network {
                Some(p) => NetworkDesc::load(p)?,
                None => match preset {
                    Preset::TinyCnn => NetworkDesc::tiny_cnn(),
                    Preset::TinyAttention => NetworkDesc::tiny_attention(*heads),
                },
            };
            if let Some(n) = num_inputs {
                desc.num_inputs = *n;
            }
            let seed = seed.unwrap_or(if cli.config.is_some() { cfg.seed } else { 0 });
            s.cfg.seed = seed;
            let bundle = s.timed("synth", || synth_model(seed, &desc))?;
            bundle.save(out).map_err(|e| CliError::Runtime(e.to_string()))?;
            s.outputs.push(out.clone());
        }
        Command::Quantize { model, out } => {
            let bundle = ModelBundle::load(model)?;
            let net = bundle.network()?;
            std::fs::create_dir_all(out)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
            s.timed("quantize", || -> Result<(), CliError> {
                for (unit, w) in net.static_weights() {
                    let q = quantize_weight(w, &cfg.quant)?;
                    let file = format!("{unit}.npy");
                    let ints = IntTensor::new(q.shape().to_vec(), q.values().to_vec())?;
                    write_int_tensor(out.join(&file), &ints).map_err(|e| CliError::Runtime(e.to_string()))?;
                    let meta = QuantizedWeightFile {
                        unit: unit.clone(),
                        shape: q.shape().to_vec(),
                        params: *q.params(),
                        values: file,
                    };
                    write_file(&out.join(format!("{unit}.json")), &json(&meta))?;
                }
                Ok(())
            })?;
            s.outputs.push(out.clone());
        }
        Command::Infer {
            model,
            mode,
            out,
            logits,
        } => {
            let bundle = ModelBundle::load(model)?;
            let net = bundle.network()?;
            let reference = s.timed("reference", || run_reference(&net, &bundle.inputs))?;
            let (outputs, stats) = match mode {
                InferMode::Software => (s.timed("inference", || run_software(&net, &bundle.inputs, &cfg.quant))?, None),
                InferMode::Cim => {
                    let run = s.timed("inference", || run_cim(&net, &bundle.inputs, &cfg))?;
                    (run.outputs, Some(run.stats))
                }
            };
            let report = InferReport {
                schema_version: 1,
                mode: match mode {
                    InferMode::Software => "software".into(),
                    InferMode::Cim => "cim".into(),
                },
                network: net.name.clone(),
                samples: bundle.num_inputs(),
                fidelity: fidelity(&outputs, &bundle.labels)?,
                reference_fidelity: fidelity(&reference, &bundle.labels)?,
                stats,
            };
            write_file(out, &json(&report))?;
            s.outputs.push(out.clone());
            if let Some(p) = logits {
                write_tensor(p, &outputs).map_err(|e| CliError::Runtime(e.to_string()))?;
                s.outputs.push(p.clone());
            }
        }
        Command::Estimate { model, mode, out } => {
            let bundle = ModelBundle::load(model)?;
            let net = bundle.network()?;
            let mode = match mode {
                Some(EstimateMode::Trace) => Mode::Trace,
                Some(EstimateMode::Average) => Mode::Average,
                None => cfg.mode,
            };
            let run = s.timed("inference", || run_cim(&net, &bundle.inputs, &cfg))?;
            let plan = s.timed("mapping", || build_chip(&net, &cfg))?;
            let report = s.timed("estimate", || estimate(&plan, mode, &run.stats, &run.traces))?;
            write_file(out, &report.to_json())?;
            s.outputs.push(out.clone());
        }
        Command::Dse { space, model, out } => {
            let space = SearchSpace::from_json(&read_text(space)?)?;
            let bundle = ModelBundle::load(model)?;
            let result = s.timed("explore", || explore(&space, &bundle, &cfg))?;
            write_file(&out.join("dse_result.json"), &result.to_json())?;
            write_file(&out.join("dse_tables.txt"), &result.render_tables())?;
            write_file(&out.join("report.json"), &result.selection.report.to_json())?;
            s.outputs.push(out.clone());
        }
        Command::Report { input, format, out } => {
            let report = HardwareReport::from_json(&read_text(input)?)?;
            let text = match format {
                Format::Text => report.render_text(),
                Format::Json => report.to_json(),
            };
            match out {
                Some(p) => {
                    write_file(p, &text)?;
                    s.outputs.push(p.clone());
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn primary_output(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Synth { out, .. }
        | Command::Quantize { out, .. }
        | Command::Infer { out, .. }
        | Command::Estimate { out, .. }
        | Command::Dse { out, .. } => Some(out),
        Command::Report { out, .. } => out.as_deref(),
    }
}

/// Parses `argv` (program name first) and runs it; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run_cli(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli) -> Result<(), CliError> {
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let mut session = load_session(cli.config.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| execute(cli, &mut session))?;
    if let Some(out) = primary_output(&cli.command) {
        let manifest = RunManifest {
            subcommand: cli.command.name().to_string(),
            config_digest: session.config_digest.clone(),
            seed: session.cfg.seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: session.outputs.clone(),
            timings: session.timings.clone(),
            jobs,
        };
        write_file(&manifest_path(out), &json(&manifest))?;
    }
    Ok(())
}

/// Entry point of the `cimsim` binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(manifest_path(Path::new("a/r.json")), Path::new("a/r.manifest.json"));
        assert_eq!(manifest_path(Path::new("a/bundle")), Path::new("a/bundle.manifest.json"));
    }

    #[test]
    fn digest_is_content_hash() {
        assert_eq!(
            digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["cimsim", "infer", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["cimsim"]), EXIT_USAGE);
        assert_eq!(run(["cimsim", "--help"]), EXIT_OK);
    }

    #[test]
    fn malformed_report_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        std::fs::write(&p, "{ not json").unwrap();
        assert_eq!(run(["cimsim", "report", "--in", p.to_str().unwrap()]), EXIT_VALIDATION);
    }

    #[test]
    fn invalid_config_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.json");
        let mut cfg = SimulationConfig::example();
        cfg.mapping.cell_bits = 0;
        std::fs::write(&c, cfg.to_json()).unwrap();
        let out = dir.path().join("m");
        let code = run(["cimsim", "synth", "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_VALIDATION);
    }
}
