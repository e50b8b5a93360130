//! Command-line front end: plan search, simulated cluster runs, oracle
//! amplitudes and quantization sweeps. Every command writes JSON.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible plan or
//! execution, 3 verification below the fidelity threshold.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex32;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::circuit::{circuit_to_network, parse_bitstring, statevector_oracle, Circuit, CircuitError};
use crate::cluster::{hybrid_execute, recompute_execute, ClusterError, ClusterSpec, RecomputeConfig};
use crate::planner::{contract_tree, plan_network, CostModel, Plan, PlannerError, SearchConfig};
use crate::quantizer::{compression_rate, quantize, roundtrip_fidelity, QuantScheme};
use crate::tensors::{fidelity, DenseTensor, Mode, Precision};

#[derive(Debug, Parser)]
#[command(name = "rqcsim", version, about = "Sliced tensor-network simulation of random quantum circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search a contraction plan for a circuit's final-state network.
    Plan(PlanArgs),
    /// Execute a plan on the simulated cluster and write a run report.
    Run(RunArgs),
    /// State-vector amplitudes for reference.
    Oracle(OracleArgs),
    /// Compression rate and round-trip fidelity per quantization scheme.
    QuantSweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Largest tensor allowed in one subtask, in bytes.
    #[arg(long)]
    pub mem_limit: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Annealing iterations.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    /// Close the output legs on this bitstring and contract a single amplitude.
    #[arg(long)]
    pub bitstring: Option<String>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub cluster: Option<PathBuf>,
    /// Close the output legs on this bitstring and contract a single amplitude.
    #[arg(long)]
    pub bitstring: Option<String>,
    /// Plan file from `rqcsim plan`; searched afresh when absent.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Inter-node quantization: none, half, int8 or int4:<group>.
    #[arg(long, default_value = "none")]
    pub quant: String,
    #[arg(long)]
    pub recompute: bool,
    /// Compare with an unquantized single-device run.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 0.95)]
    pub min_fidelity: f64,
    /// Comma-separated bitstrings whose amplitudes go into the report.
    #[arg(long, value_delimiter = ',')]
    pub bitstrings: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    /// Comma-separated bitstrings; every basis state when absent.
    #[arg(long, value_delimiter = ',')]
    pub bitstrings: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Use the circuit's final state instead of a synthetic tensor.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Synthetic tensor: Gaussian entries, or every entry equal to 1 + 1i.
    #[arg(long, value_enum, default_value_t = Source::Gaussian)]
    pub source: Source,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Elements of the Gaussian tensor, as a power of two.
    #[arg(long, default_value_t = 16)]
    pub log_elements: u32,
    #[arg(long, value_delimiter = ',', default_value = "half,int8,int4:128")]
    pub quant: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Gaussian,
    Constant,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("verification failed: fidelity {fidelity} below {threshold}")]
    VerifyFailed { fidelity: f64, threshold: f64 },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } | CliError::Failed(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::VerifyFailed { .. } => 3,
        }
    }
}

impl From<PlannerError> for CliError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::MemoryTooSmall { .. } | PlannerError::Infeasible(_) | PlannerError::ParallelInfeasible(_) => {
                CliError::Infeasible(e.to_string())
            }
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::ShardOverflow { .. } | ClusterError::PartitionExhausted(..) | ClusterError::BufferOverflow { .. } => {
                CliError::Infeasible(e.to_string())
            }
            ClusterError::Planner(p) => p.into(),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::InvalidBitstring(_) | CircuitError::TooLarge { .. } => CliError::Usage(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input { path: path.to_owned(), message: e.to_string() })
}

fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    Circuit::from_json(&read(path)?).map_err(|e| CliError::Input { path: path.to_owned(), message: e.to_string() })
}

fn load_cluster(path: Option<&Path>) -> Result<ClusterSpec, CliError> {
    match path {
        None => Ok(ClusterSpec::single_device()),
        Some(p) => ClusterSpec::from_json(&read(p)?).map_err(|e| CliError::Input { path: p.to_owned(), message: e.to_string() }),
    }
}

fn parse_scheme(text: &str) -> Result<Option<QuantScheme>, CliError> {
    if text == "none" {
        return Ok(None);
    }
    text.parse::<QuantScheme>().map(Some).map_err(|e| CliError::Usage(format!("--quant {text}: {e}")))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| CliError::Input { path: p.to_owned(), message: e.to_string() }),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Failed(e.to_string())),
            _ => Ok(()),
        },
    }
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports always serialize")
}

/// Without `--mem-limit`, a subtask may fill the aggregate memory of the cluster.
fn search_config(args: &SearchArgs, cluster: &ClusterSpec) -> SearchConfig {
    let limit = args.mem_limit.unwrap_or_else(|| cluster.device_mem.saturating_mul(cluster.devices() as u64));
    SearchConfig::new(limit, args.seed, args.iters)
}

#[derive(Serialize)]
struct CostSummary {
    flops: f64,
    max_elements: u64,
    max_bytes: u64,
    sliced_edges: usize,
    subtasks: u64,
    /// `s * 2^M`: subtasks times the largest tensor.
    sliced_size: f64,
}

impl CostSummary {
    fn new(plan: &Plan) -> Self {
        let c: &CostModel = &plan.cost;
        CostSummary {
            flops: c.flops,
            max_elements: c.max_elements,
            max_bytes: c.max_bytes(),
            sliced_edges: plan.slices.sliced_edges.len(),
            subtasks: c.subtasks,
            sliced_size: c.subtasks as f64 * c.max_elements as f64,
        }
    }
}

pub fn cmd_plan(args: &PlanArgs) -> Result<Plan, CliError> {
    let circuit = load_circuit(&args.circuit)?;
    let cluster = load_cluster(args.cluster.as_deref())?;
    let net = circuit_to_network(&circuit, args.bitstring.as_deref())?;
    let cfg = search_config(&args.search, &cluster);
    let plan = plan_network(&net, &cfg, args.cluster.as_ref().map(|_| &cluster))?;
    let summary = to_json(&json!({ "config": { "circuit": args.circuit, "bitstring": args.bitstring, "cluster": cluster, "search": cfg }, "cost": CostSummary::new(&plan) }));
    match &args.out {
        Some(p) => {
            emit(Some(p), &plan.to_json())?;
            emit(None, &summary)?;
        }
        None => {
            eprintln!("{summary}");
            emit(None, &plan.to_json())?;
        }
    }
    Ok(plan)
}

#[derive(Serialize)]
struct RunConfig {
    circuit: PathBuf,
    bitstring: Option<String>,
    cluster: ClusterSpec,
    plan: Option<PathBuf>,
    search: Option<SearchConfig>,
    quant: String,
    recompute: bool,
    verify: bool,
    min_fidelity: f64,
    bitstrings: Vec<String>,
}

#[derive(Serialize)]
struct Amplitude {
    bitstring: String,
    re: f64,
    im: f64,
}

/// Writes the report, then fails with code 3 when verification falls short.
pub fn cmd_run(args: &RunArgs) -> Result<serde_json::Value, CliError> {
    let circuit = load_circuit(&args.circuit)?;
    let cluster = load_cluster(args.cluster.as_deref())?;
    let scheme = parse_scheme(&args.quant)?;
    for b in &args.bitstrings {
        parse_bitstring(b, circuit.n_qubits)?;
    }
    if args.bitstring.is_some() && !args.bitstrings.is_empty() {
        return Err(CliError::Usage("--bitstring closes the network; --bitstrings needs the open one".into()));
    }
    let net = circuit_to_network(&circuit, args.bitstring.as_deref())?;
    let (plan, search) = match &args.plan {
        Some(p) => (Plan::from_json(&read(p)?).map_err(|e| CliError::Input { path: p.clone(), message: e.to_string() })?, None),
        None => {
            let cfg = search_config(&args.search, &cluster);
            (plan_network(&net, &cfg, Some(&cluster))?, Some(cfg))
        }
    };
    let (result, mut report) = if args.recompute {
        recompute_execute(&plan, &net, &cluster, scheme.as_ref(), &RecomputeConfig::default())?
    } else {
        hybrid_execute(&plan, &net, &cluster, scheme.as_ref())?
    };
    if args.verify {
        let benchmark = contract_tree(&net, &plan.tree, &plan.slices)?;
        report.fidelity = Some(fidelity(&benchmark, &result).map_err(fail)?);
    }
    let mut amplitudes: Vec<Amplitude> = args
        .bitstrings
        .iter()
        .map(|b| {
            let z = result.data()[usize::from_str_radix(b, 2).expect("validated bitstring")];
            Amplitude { bitstring: b.clone(), re: z.re as f64, im: z.im as f64 }
        })
        .collect();
    if let Some(b) = &args.bitstring {
        let z = result.data()[0];
        amplitudes.push(Amplitude { bitstring: b.clone(), re: z.re as f64, im: z.im as f64 });
    }
    let config = RunConfig {
        circuit: args.circuit.clone(),
        bitstring: args.bitstring.clone(),
        cluster,
        plan: args.plan.clone(),
        search,
        quant: args.quant.clone(),
        recompute: args.recompute,
        verify: args.verify,
        min_fidelity: args.min_fidelity,
        bitstrings: args.bitstrings.clone(),
    };
    let doc = json!({
        "config": config,
        "cost": CostSummary::new(&plan),
        "result_hash": result.content_hash(),
        "amplitudes": amplitudes,
        "report": report,
    });
    emit(args.out.as_deref(), &to_json(&doc))?;
    if let Some(f) = report.fidelity {
        if f < args.min_fidelity {
            return Err(CliError::VerifyFailed { fidelity: f, threshold: args.min_fidelity });
        }
    }
    Ok(doc)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<serde_json::Value, CliError> {
    let circuit = load_circuit(&args.circuit)?;
    let n = circuit.n_qubits;
    let state = statevector_oracle(&circuit)?;
    let bitstrings: Vec<String> = if args.bitstrings.is_empty() {
        (0..state.len()).map(|x| format!("{x:0n$b}")).collect()
    } else {
        for b in &args.bitstrings {
            parse_bitstring(b, n)?;
        }
        args.bitstrings.clone()
    };
    let amplitudes: Vec<Amplitude> = bitstrings
        .iter()
        .map(|b| {
            let z = state[if n == 0 { 0 } else { usize::from_str_radix(b, 2).expect("validated bitstring") }];
            Amplitude { bitstring: b.clone(), re: z.re, im: z.im }
        })
        .collect();
    let doc = json!({
        "config": { "circuit": args.circuit, "bitstrings": args.bitstrings },
        "n_qubits": n,
        "amplitudes": amplitudes,
    });
    emit(args.out.as_deref(), &to_json(&doc))?;
    Ok(doc)
}

#[derive(Serialize)]
struct SweepRow {
    scheme: String,
    cr: f64,
    fidelity: f64,
}

fn sweep_source(args: &SweepArgs) -> Result<DenseTensor, CliError> {
    match &args.circuit {
        Some(path) => {
            let circuit = load_circuit(path)?;
            let state = statevector_oracle(&circuit)?;
            let modes = (0..circuit.n_qubits).map(|q| Mode::new(format!("q{q}"), 2)).collect();
            DenseTensor::new(modes, state.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect(), Precision::C64)
                .map_err(fail)
        }
        None => {
            if args.log_elements > 26 {
                return Err(CliError::Usage(format!("--log-elements {} is above 26", args.log_elements)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let len = 1usize << args.log_elements;
            let data = match args.source {
                Source::Gaussian => (0..len)
                    .map(|_| Complex32::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                    .collect(),
                Source::Constant => vec![Complex32::new(1.0, 1.0); len],
            };
            DenseTensor::new(vec![Mode::new("x", len)], data, Precision::C64).map_err(fail)
        }
    }
}

pub fn cmd_quant_sweep(args: &SweepArgs) -> Result<serde_json::Value, CliError> {
    let schemes = args
        .quant
        .iter()
        .map(|s| parse_scheme(s)?.ok_or_else(|| CliError::Usage("`none` is not a sweep scheme".into())))
        .collect::<Result<Vec<_>, _>>()?;
    let t = sweep_source(args)?;
    let mut rows = Vec::new();
    for s in &schemes {
        let q = quantize(&t, s).map_err(fail)?;
        rows.push(SweepRow { scheme: s.to_string(), cr: compression_rate(&q), fidelity: roundtrip_fidelity(&t, s).map_err(fail)? });
    }
    let doc = json!({
        "config": { "circuit": args.circuit, "source": args.source, "seed": args.seed, "log_elements": args.log_elements, "quant": args.quant },
        "elements": t.len(),
        "rows": rows,
    });
    emit(args.out.as_deref(), &to_json(&doc))?;
    Ok(doc)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan(a) => cmd_plan(a).map(|_| ()),
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Oracle(a) => cmd_oracle(a).map(|_| ()),
        Command::QuantSweep(a) => cmd_quant_sweep(a).map(|_| ()),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
