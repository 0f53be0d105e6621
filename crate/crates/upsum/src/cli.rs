//! The `upsum` command line: enumerate / sigma / event / circuit /
//! xlate-check / run, with deterministic structured output.
//!
//! Structured output is JSON with sorted keys and a version field; identical
//! invocations produce byte-identical bytes, and parsing then re-serializing
//! an output is the identity. Exit codes: 0 success, 1 verdict failure
//! (failed sub-integral check, or inconsistent histories under `--strict`),
//! 2 usage or operational error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bitcore::{BitString, DyadicRational};
use crate::circuits::{self, Circuit};
use crate::enumerator::{self, ExploreBudget, ExplorationReport};
use crate::events::{self, CoarseGrain, PathEnsemble};
use crate::machine::{self, Dialect};
use crate::pathsum::{self, ExactAmplitude};
use crate::translate;

pub const OUTPUT_VERSION: &str = "upsum/1";

#[derive(Parser)]
#[command(name = "upsum", version, about = "Exact universal path sums over a prefix-free machine")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format: structured JSON (default) or human-readable text.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct BudgetArgs {
    /// Maximum program length in bits.
    #[arg(long)]
    max_len: usize,
    /// Step budget applied uniformly to every prefix.
    #[arg(long)]
    max_steps: u64,
}

impl BudgetArgs {
    fn to_budget(&self) -> Result<ExploreBudget, String> {
        if self.max_len < 1 || self.max_steps < 1 {
            return Err("budgets must be at least 1".to_owned());
        }
        Ok(ExploreBudget::new(self.max_len, self.max_steps))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Explore the program tree and report the budgeted halting set.
    Enumerate {
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value = "A")]
        dialect: Dialect,
        /// Checkpoint file: loaded and resumed when present, written back
        /// after exploration.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Evaluate the truncated universal path sum.
    Sigma {
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value = "A")]
        dialect: Dialect,
        /// paper: unresolved inputs contribute phase 0; enclosure: halted-only
        /// center with the unresolved mass as disk radius.
        #[arg(long, value_enum, default_value_t = SigmaMode::Paper)]
        mode: SigmaMode,
    },
    /// Coarse-grained event amplitudes, decoherence verdicts, probabilities.
    Event {
        /// Ensemble header bits (the part the machine reads first).
        #[arg(long)]
        header: String,
        /// Number of path bits.
        #[arg(long)]
        k: usize,
        /// Grain spec: fixed-bit mask like 0**1 or a comma list of paths.
        /// Repeatable.
        #[arg(long = "grain", required = true)]
        grains: Vec<String>,
        /// Sum-rule accuracy threshold, in (0, 1].
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        max_steps: u64,
        #[arg(long, default_value = "A")]
        dialect: Dialect,
        /// Exit 1 when any pairwise verdict is inconsistent.
        #[arg(long)]
        strict: bool,
    },
    /// Circuit path-sum operations.
    Circuit {
        #[command(subcommand)]
        command: CircuitCommand,
    },
    /// Verify the 1110-restricted sub-integral identity against dialect B.
    XlateCheck {
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Run the machine on explicit bits, optionally with a step trace.
    Run {
        /// Input bits, consumed on demand.
        #[arg(long)]
        bits: String,
        #[arg(long)]
        max_steps: u64,
        #[arg(long, default_value = "A")]
        dialect: Dialect,
        /// Include one line per executed step: "step ip opcode r0 r1 out".
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SigmaMode {
    Paper,
    Enclosure,
}

#[derive(Subcommand)]
enum CircuitCommand {
    /// Exact transition amplitude between basis states.
    Amp {
        /// Circuit file: one gate per line, `H q`, `T q`, `CNOT c t`.
        #[arg(long)]
        file: PathBuf,
        /// Input basis state; its length fixes the qubit count.
        #[arg(long = "in")]
        input: String,
        /// Output basis state.
        #[arg(long = "out")]
        output: String,
        /// Also evaluate the dense state-vector oracle and report the
        /// distance.
        #[arg(long)]
        check_oracle: bool,
    },
}

struct Outcome {
    body: Value,
    /// Verdict carried by the run; false turns into exit code 1.
    verdict_ok: bool,
}

fn dyadic_json(d: &DyadicRational) -> Value {
    json!({ "exact": d.to_string(), "float": d.to_f64() })
}

fn amplitude_json(a: &ExactAmplitude) -> Value {
    let coeffs: Vec<Value> =
        a.coeffs().map(|(q, c)| json!([q.to_string(), c.to_string()])).collect();
    let v = a.to_complex();
    json!({
        "coeffs": coeffs,
        "scale_half_exponent": a.scale_half_exponent(),
        "float": { "im": v.im, "re": v.re },
    })
}

fn report_json(report: &ExplorationReport, include_records: bool) -> Value {
    let mut body = json!({
        "budget": { "max_len": report.budget.max_len, "max_steps": report.budget.max_steps },
        "dialect": report.dialect.to_string(),
        "halted_count": report.halted.len(),
        "halted_mass": dyadic_json(&report.halted_mass),
        "kraft": enumerator::kraft_check(report),
        "root": report.root.to_string(),
        "unresolved_count": report.unresolved.len(),
        "unresolved_mass": dyadic_json(&report.unresolved_mass),
    });
    if include_records {
        let records: Vec<Value> = report
            .halted
            .iter()
            .map(|r| {
                json!({
                    "measure": r.measure.to_string(),
                    "output": r.output.to_string(),
                    "phase": r.phase.to_string(),
                    "program": r.program.to_string(),
                    "steps": r.steps,
                })
            })
            .collect();
        body["halted"] = Value::Array(records);
    }
    body
}

fn parse_bits(what: &str, s: &str) -> Result<BitString, String> {
    s.parse().map_err(|e| format!("{what}: {e}"))
}

fn run_enumerate(
    budget: BudgetArgs,
    dialect: Dialect,
    cache: Option<PathBuf>,
) -> Result<Outcome, String> {
    let budget = budget.to_budget()?;
    let report = match &cache {
        Some(path) if path.exists() => {
            let cached = enumerator::load_cache(path).map_err(|e| e.to_string())?;
            if cached.dialect != dialect {
                return Err(format!(
                    "cache {} was written for dialect {}, requested {}",
                    path.display(),
                    cached.dialect,
                    dialect
                ));
            }
            if cached.budget == budget {
                cached
            } else {
                enumerator::resume(&cached, budget).map_err(|e| e.to_string())?
            }
        }
        _ => enumerator::explore(budget, dialect),
    };
    if let Some(path) = &cache {
        enumerator::save_cache(&report, path).map_err(|e| e.to_string())?;
    }
    Ok(Outcome { body: report_json(&report, true), verdict_ok: true })
}

fn run_sigma(budget: BudgetArgs, dialect: Dialect, mode: SigmaMode) -> Result<Outcome, String> {
    let budget = budget.to_budget()?;
    let report = enumerator::explore(budget, dialect);
    let body = match mode {
        SigmaMode::Paper => json!({
            "mode": "paper",
            "report": report_json(&report, false),
            "sigma": amplitude_json(&pathsum::sigma_paper(&report)),
        }),
        SigmaMode::Enclosure => {
            let disk = pathsum::sigma_enclosure(&report);
            json!({
                "center": amplitude_json(&disk.center),
                "mode": "enclosure",
                "radius": dyadic_json(&disk.radius),
                "report": report_json(&report, false),
            })
        }
    };
    Ok(Outcome { body, verdict_ok: true })
}

fn run_event(
    header: String,
    k: usize,
    grain_specs: Vec<String>,
    epsilon: f64,
    max_steps: u64,
    dialect: Dialect,
    strict: bool,
) -> Result<Outcome, String> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    if max_steps < 1 {
        return Err("max_steps must be at least 1".to_owned());
    }
    let header = parse_bits("header", &header)?;
    let ensemble =
        PathEnsemble::new(header, k, max_steps, dialect).map_err(|e| e.to_string())?;
    let grains: Vec<CoarseGrain> = grain_specs
        .iter()
        .map(|s| CoarseGrain::parse(k, s).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let amps: Vec<ExactAmplitude> = grains
        .iter()
        .map(|g| events::grain_amplitude(&ensemble, g).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;

    let grain_bodies: Vec<Value> = grains
        .iter()
        .zip(&amps)
        .zip(&grain_specs)
        .map(|((g, a), spec)| {
            json!({
                "amplitude": amplitude_json(a),
                "paths": g.paths().map(|w| w.to_string()).collect::<Vec<_>>(),
                "spec": spec,
                "squared_modulus": a.to_complex().norm_sqr(),
            })
        })
        .collect();

    let mut all_consistent = true;
    let mut pairwise = Vec::new();
    for i in 0..amps.len() {
        for j in i + 1..amps.len() {
            let entry = match events::consistency(&amps[i], &amps[j], epsilon) {
                Ok(v) => {
                    all_consistent &= v.consistent;
                    json!({
                        "consistent": v.consistent,
                        "decoherence": v.d,
                        "grains": [i, j],
                        "ratio": v.ratio,
                        "symbolic_zero": v.symbolic_zero,
                    })
                }
                Err(events::EventsError::ZeroAmplitude) => {
                    json!({ "grains": [i, j], "undefined": "zero amplitude" })
                }
                Err(other) => return Err(other.to_string()),
            };
            pairwise.push(entry);
        }
    }

    let partition = match events::probabilities(&ensemble, &grains, epsilon) {
        Ok(report) => {
            all_consistent &= report.all_consistent;
            json!({
                "all_consistent": report.all_consistent,
                "normalized": report.normalized,
                "sum_rule_residual": report.sum_rule_residual,
                "unnormalized": report.unnormalized,
            })
        }
        Err(events::EventsError::NonExhaustivePartition(_))
        | Err(events::EventsError::OverlappingGrains(_)) => Value::Null,
        Err(other) => return Err(other.to_string()),
    };

    let body = json!({
        "dialect": dialect.to_string(),
        "epsilon": epsilon,
        "grains": grain_bodies,
        "header": ensemble.header().to_string(),
        "k": k,
        "pairwise": pairwise,
        "partition": partition,
        "path_measure": dyadic_json(&ensemble.path_measure()),
    });
    Ok(Outcome { body, verdict_ok: !strict || all_consistent })
}

fn run_circuit_amp(
    file: PathBuf,
    input: String,
    output: String,
    check_oracle: bool,
) -> Result<Outcome, String> {
    let input = parse_bits("in state", &input)?;
    let output = parse_bits("out state", &output)?;
    let text = std::fs::read_to_string(&file)
        .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    let circuit = Circuit::parse(input.len(), &text).map_err(|e| e.to_string())?;
    let result =
        circuits::pathsum_amplitude(&circuit, &input, &output).map_err(|e| e.to_string())?;
    let mut body = json!({
        "amplitude": amplitude_json(&result.amplitude),
        "hadamard_count": result.hadamard_count,
        "in": input.to_string(),
        "out": output.to_string(),
        "path_count": result.path_count.to_string(),
        "qubits": circuit.qubits(),
    });
    if check_oracle {
        let state = circuits::statevector_oracle(&circuit, &input).map_err(|e| e.to_string())?;
        let mut idx = 0usize;
        for (i, b) in output.iter().enumerate() {
            idx |= (b as usize) << i;
        }
        let oracle = state[idx];
        let distance = (result.amplitude.to_complex() - oracle).norm();
        body["oracle"] = json!({ "distance": distance, "im": oracle.im, "re": oracle.re });
    }
    Ok(Outcome { body, verdict_ok: true })
}

fn run_xlate_check(budget: BudgetArgs) -> Result<Outcome, String> {
    let verdict = translate::subintegral_check(budget.to_budget()?);
    let body = json!({
        "first_mismatch": verdict.first_mismatch,
        "matched_records": verdict.matched_records,
        "pass": verdict.pass,
        "restricted_sum": amplitude_json(&verdict.restricted_sum),
        "scaled_inner_sum": amplitude_json(&verdict.scaled_inner_sum),
    });
    Ok(Outcome { body, verdict_ok: verdict.pass })
}

fn run_machine(bits: String, max_steps: u64, dialect: Dialect, trace: bool) -> Result<Outcome, String> {
    if max_steps < 1 {
        return Err("max_steps must be at least 1".to_owned());
    }
    let bits = parse_bits("bits", &bits)?;
    let (result, lines) = machine::run_traced(&bits, max_steps, dialect);
    let mut body = match result {
        machine::ExecResult::Halted { program, output, phase, steps_used } => json!({
            "outcome": "halted",
            "output": output.to_string(),
            "phase": phase.to_string(),
            "program": program.to_string(),
            "steps_used": steps_used,
        }),
        machine::ExecResult::OutOfGas { steps_used } => json!({
            "outcome": "out_of_gas",
            "steps_used": steps_used,
        }),
    };
    if trace {
        body["trace"] = Value::Array(lines.iter().map(|l| Value::String(l.to_string())).collect());
    }
    Ok(Outcome { body, verdict_ok: true })
}

fn render_text(value: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match value {
        Value::Object(map) => {
            for (key, val) in map {
                match val {
                    Value::Object(_) | Value::Array(_) => {
                        out.push_str(&format!("{pad}{key}:\n"));
                        render_text(val, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{key}: {val}\n")),
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::Object(_) | Value::Array(_) => {
                        out.push_str(&format!("{pad}-\n"));
                        render_text(item, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}- {item}\n")),
                }
            }
        }
        leaf => out.push_str(&format!("{pad}{leaf}\n")),
    }
}

fn dispatch(command: Command) -> Result<(Outcome, &'static str), String> {
    match command {
        Command::Enumerate { budget, dialect, cache } => {
            Ok((run_enumerate(budget, dialect, cache)?, "enumerate"))
        }
        Command::Sigma { budget, dialect, mode } => Ok((run_sigma(budget, dialect, mode)?, "sigma")),
        Command::Event { header, k, grains, epsilon, max_steps, dialect, strict } => Ok((
            run_event(header, k, grains, epsilon, max_steps, dialect, strict)?,
            "event",
        )),
        Command::Circuit { command } => match command {
            CircuitCommand::Amp { file, input, output, check_oracle } => {
                Ok((run_circuit_amp(file, input, output, check_oracle)?, "circuit amp"))
            }
        },
        Command::XlateCheck { budget } => Ok((run_xlate_check(budget)?, "xlate-check")),
        Command::Run { bits, max_steps, dialect, trace } => {
            Ok((run_machine(bits, max_steps, dialect, trace)?, "run"))
        }
    }
}

/// Parse arguments, run inside the configured worker pool, and print the
/// deterministic report.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = match std::env::var("UPSUM_WORKERS") {
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                eprintln!("upsum: UPSUM_WORKERS must be a positive integer, got {raw:?}");
                return ExitCode::from(2);
            }
        },
        Err(_) => None,
    };
    let format = cli.format;
    let run = || dispatch(cli.command);
    let outcome = match workers {
        Some(n) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool,
                Err(e) => {
                    eprintln!("upsum: cannot build worker pool: {e}");
                    return ExitCode::from(2);
                }
            };
            pool.install(run)
        }
        None => run(),
    };
    match outcome {
        Ok((outcome, command)) => {
            let document = json!({
                "command": command,
                "result": outcome.body,
                "version": OUTPUT_VERSION,
            });
            match format {
                Format::Json => {
                    let mut text = serde_json::to_string_pretty(&document)
                        .expect("json serialization cannot fail");
                    text.push('\n');
                    print!("{text}");
                }
                Format::Text => {
                    let mut text = String::new();
                    render_text(&document, 0, &mut text);
                    print!("{text}");
                }
            }
            if outcome.verdict_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(message) => {
            eprintln!("upsum: {message}");
            ExitCode::from(2)
        }
    }
}
