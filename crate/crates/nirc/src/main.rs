//! `nirc`: validate, run, lower, check, quantize, decompose, recompose, and
//! compare graphs from the command line.
//!
//! Exit codes: 0 success, 1 domain error (validation failure,
//! incompatibility, bad graph), 2 usage error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nir::analysis::{compare_dialects, emit_report};
use nir::core::graph::NodeId;
use nir::core::{deserialize, infer_shapes, serialize, Graph};
use nir::dialects::{named_config, DialectConfig, NamedDialect, Reset};
use nir::engine::{read_input_csv, run, trace_to_csv, trace_to_value, Record};
use nir::passes::{
    annotate_recurrent_blocks, builtin_profile, check_constraints, decompose, quantize, recompose,
    translate_for_profile, PlatformProfile, BUILTIN_PROFILES,
};
use nir::primitives::Kind;

#[derive(Parser)]
#[command(name = "nirc", version, about = "Toolchain driver for .nir.json graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphArg {
    /// Path to the graph (.nir.json).
    graph: PathBuf,
    /// Emit machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResetArg {
    Hard,
    Subtractive,
}

#[derive(Subcommand)]
enum Command {
    /// Structural validation; silent and exit 0 when the graph is valid.
    Validate(GraphArg),
    /// Execute a graph under a named dialect.
    Run {
        #[command(flatten)]
        common: GraphArg,
        /// Named dialect, e.g. norse, snntorch, lava_dl, rockpool_sinabs.
        #[arg(long)]
        dialect: String,
        /// Input stream CSV (columns `node.output[i]`).
        #[arg(long)]
        input: PathBuf,
        /// Trace output path; `.csv` or `.json` by extension.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated node ids to record, or `all`.
        #[arg(long)]
        record: Option<String>,
        /// Timestep in seconds.
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
        /// Override the dialect's reset discretization.
        #[arg(long, value_enum)]
        reset: Option<ResetArg>,
    },
    /// Lower a graph for a platform profile and print the dialect config.
    Lower {
        #[command(flatten)]
        common: GraphArg,
        /// Builtin profile name or a path to a profile JSON.
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
        /// Lowered graph output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a graph against a platform profile.
    Check {
        #[command(flatten)]
        common: GraphArg,
        #[arg(long)]
        profile: String,
        /// Apply documented rewrites before re-checking.
        #[arg(long)]
        try_rewrites: bool,
    },
    /// Post-training weight quantization.
    Quantize {
        #[command(flatten)]
        common: GraphArg,
        #[arg(long, default_value_t = 8)]
        bits: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand higher-order nodes into their compositions.
    Decompose {
        #[command(flatten)]
        common: GraphArg,
        /// Comma-separated kinds (default: if,lif,cuba_lif).
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collapse compositions back into higher-order nodes.
    Recompose {
        #[command(flatten)]
        common: GraphArg,
        #[arg(long)]
        kinds: Option<String>,
        /// Tag directly recurrent populations in graph metadata.
        #[arg(long)]
        annotate_recurrent: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one graph under several dialects and report divergence.
    Compare {
        #[command(flatten)]
        common: GraphArg,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated named dialects.
        #[arg(long)]
        dialects: String,
        /// Node whose events are compared.
        #[arg(long)]
        node: String,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
        /// Steps excluded from rate averaging.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        /// Alignment search window in steps.
        #[arg(long, default_value_t = 5)]
        shift_window: usize,
        #[arg(long, value_enum)]
        reset: Option<ResetArg>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_graph(path: &Path) -> nir::Result<Graph> {
    let bytes = std::fs::read(path)
        .map_err(|e| nir::Error::Io(format!("{}: {e}", path.display())))?;
    deserialize(&bytes)
}

fn save_graph(graph: &Graph, path: &Path) -> nir::Result<()> {
    let bytes = serialize(graph)?;
    std::fs::write(path, bytes).map_err(|e| nir::Error::Io(format!("{}: {e}", path.display())))
}

fn load_profile(name: &str) -> nir::Result<PlatformProfile> {
    if let Some(p) = builtin_profile(name) {
        return Ok(p);
    }
    let path = Path::new(name);
    if path.exists() {
        let bytes = std::fs::read(path)
            .map_err(|e| nir::Error::Io(format!("{}: {e}", path.display())))?;
        return PlatformProfile::from_json(&bytes);
    }
    Err(nir::Error::InvalidParameter(format!(
        "unknown profile `{name}`; builtins: {}",
        BUILTIN_PROFILES.join(", ")
    )))
}

fn parse_kinds(arg: &Option<String>) -> nir::Result<BTreeSet<Kind>> {
    let default = [Kind::If, Kind::Lif, Kind::CubaLif];
    match arg {
        None => Ok(default.into_iter().collect()),
        Some(s) => s
            .split(',')
            .map(|k| {
                Kind::from_str(k.trim())
                    .ok_or_else(|| nir::Error::InvalidParameter(format!("unknown kind `{k}`")))
            })
            .collect(),
    }
}

fn dialect_config(name: &str, dt: f64, reset: Option<ResetArg>) -> nir::Result<DialectConfig> {
    let named = NamedDialect::from_str(name).ok_or_else(|| {
        let all: Vec<&str> = NamedDialect::ALL.iter().map(|d| d.as_str()).collect();
        nir::Error::InvalidParameter(format!(
            "unknown dialect `{name}`; expected one of {}",
            all.join(", ")
        ))
    })?;
    let mut cfg = named_config(named, dt);
    if let Some(r) = reset {
        cfg.reset = match r {
            ResetArg::Hard => Reset::Hard,
            ResetArg::Subtractive => Reset::Subtractive { theta_reset: None },
        };
    }
    Ok(cfg)
}

fn parse_record(arg: &Option<String>) -> nir::Result<Record> {
    match arg.as_deref() {
        None => Ok(Record::OutputsOnly),
        Some("all") => Ok(Record::All),
        Some(list) => {
            let ids: Vec<&str> = list.split(',').map(str::trim).collect();
            Record::nodes(&ids)
        }
    }
}

fn dispatch(cli: Cli) -> nir::Result<ExitCode> {
    match cli.command {
        Command::Validate(args) => {
            let graph = load_graph(&args.graph)?;
            // resolve conv port shapes first so partially specified but
            // inferable graphs validate cleanly
            let graph = infer_shapes(&graph).unwrap_or(graph);
            let diags = graph.validate();
            if args.json {
                let list: Vec<Value> = diags.iter().map(|d| json!(d.to_string())).collect();
                println!("{}", json!({ "diagnostics": list }));
            } else {
                for d in &diags {
                    eprintln!("{d}");
                }
            }
            Ok(if diags.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Run { common, dialect, input, out, record, dt, reset } => {
            let graph = infer_shapes(&load_graph(&common.graph)?)?;
            let cfg = dialect_config(&dialect, dt, reset)?;
            let text = std::fs::read_to_string(&input)
                .map_err(|e| nir::Error::Io(format!("{}: {e}", input.display())))?;
            let stream = read_input_csv(&graph, &text)?;
            let trace = run(&graph, &cfg, &stream, &parse_record(&record)?)?;
            let payload = if out.extension().is_some_and(|e| e == "json") {
                serde_json::to_string(&trace_to_value(&trace)).unwrap()
            } else {
                trace_to_csv(&trace)
            };
            std::fs::write(&out, payload)
                .map_err(|e| nir::Error::Io(format!("{}: {e}", out.display())))?;
            if common.json {
                println!(
                    "{}",
                    json!({
                        "dialect": trace.dialect,
                        "steps": trace.steps,
                        "recorded": trace.nodes.keys().map(|k| k.to_string()).collect::<Vec<_>>(),
                        "out": out.display().to_string(),
                    })
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lower { common, profile, dt, out } => {
            let graph = infer_shapes(&load_graph(&common.graph)?)?;
            let profile = load_profile(&profile)?;
            let (lowered, cfg, applied) = translate_for_profile(&graph, &profile, dt)?;
            save_graph(&lowered, &out)?;
            if common.json {
                println!(
                    "{}",
                    json!({
                        "profile": profile.name,
                        "dialect": cfg.describe(),
                        "applied": applied,
                        "out": out.display().to_string(),
                    })
                );
            } else {
                println!("lowered for `{}`: {}", profile.name, cfg.describe());
                for a in &applied {
                    println!("  applied {a}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { common, profile, try_rewrites } => {
            let graph = infer_shapes(&load_graph(&common.graph)?)?;
            let profile = load_profile(&profile)?;
            let report = check_constraints(&graph, &profile, None, try_rewrites)?;
            if common.json {
                let violations: Vec<Value> = report
                    .violations
                    .iter()
                    .map(|v| {
                        json!({
                            "constraint": v.constraint,
                            "nodes": v.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                println!(
                    "{}",
                    json!({
                        "compatible": report.compatible,
                        "violations": violations,
                        "applied_rewrites": report.applied_rewrites,
                    })
                );
            } else if !report.compatible {
                for v in &report.violations {
                    eprintln!("violation: {}", v.constraint);
                }
            } else if !report.applied_rewrites.is_empty() {
                println!("compatible after: {}", report.applied_rewrites.join(", "));
            }
            Ok(if report.compatible { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Quantize { common, bits, out } => {
            let graph = load_graph(&common.graph)?;
            let (quantized, tensors) = quantize(&graph, bits)?;
            save_graph(&quantized, &out)?;
            if common.json {
                let list: Vec<Value> = tensors
                    .iter()
                    .map(|q| {
                        json!({
                            "node": q.node.to_string(),
                            "tensor": q.tensor,
                            "scale": q.scale,
                        })
                    })
                    .collect();
                println!("{}", json!({ "bits": bits, "tensors": list }));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Decompose { common, kinds, out } => {
            let graph = load_graph(&common.graph)?;
            let result = decompose(&graph, &parse_kinds(&kinds)?)?;
            save_graph(&result, &out)?;
            if common.json {
                println!("{}", json!({ "nodes": result.len() }));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Recompose { common, kinds, annotate_recurrent, out } => {
            let graph = load_graph(&common.graph)?;
            let mut result = recompose(&graph, &parse_kinds(&kinds)?)?;
            if annotate_recurrent {
                result = annotate_recurrent_blocks(&result);
            }
            save_graph(&result, &out)?;
            if common.json {
                println!("{}", json!({ "nodes": result.len() }));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            common,
            input,
            dialects,
            node,
            out,
            dt,
            burn_in,
            shift_window,
            reset,
        } => {
            let graph = infer_shapes(&load_graph(&common.graph)?)?;
            let text = std::fs::read_to_string(&input)
                .map_err(|e| nir::Error::Io(format!("{}: {e}", input.display())))?;
            let stream = read_input_csv(&graph, &text)?;
            let configs: Vec<(String, DialectConfig)> = dialects
                .split(',')
                .map(|name| {
                    let name = name.trim();
                    dialect_config(name, dt, reset).map(|cfg| (name.to_string(), cfg))
                })
                .collect::<nir::Result<_>>()?;
            let node = NodeId::new(node)?;
            let cmp = compare_dialects(&graph, &stream, &configs, &node, burn_in, shift_window)?;
            let files = emit_report(&cmp, &out)?;
            if common.json {
                println!(
                    "{}",
                    json!({
                        "labels": cmp.matrix.labels,
                        "matrix": cmp.matrix.values,
                        "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
                    })
                );
            } else {
                for f in &files {
                    println!("wrote {}", f.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
