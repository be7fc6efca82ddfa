use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use halo_sim::bus::Trace;
use halo_sim::harness::{fmeca_table, run_scenario, RunOutput, Scenario};

mod plot;

#[derive(Parser)]
#[command(name = "halo-sim", version, about = "Run and check safety-layer scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the trace as JSON lines.
    #[arg(long, value_name = "OUT")]
    trace: Option<PathBuf>,
    /// Write the metrics report as JSON.
    #[arg(long, value_name = "OUT")]
    metrics: Option<PathBuf>,
    /// Run without a safety node: behavioral, graceful_stop,
    /// node_health_monitor or topic_multiplexer. Repeatable.
    #[arg(long = "disable-halo-node", value_name = "NAME")]
    disable: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and print its summary.
    Run(RunArgs),
    /// Run a scenario and exit non-zero if any assertion fails.
    Verify(RunArgs),
    /// Print the criticality assessment of each fault class.
    Fmeca,
    /// Render rate, separation and covariance plots from a trace.
    Plot {
        trace: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn execute(args: &RunArgs) -> Result<RunOutput, String> {
    let mut sc = Scenario::load(&args.scenario).map_err(|e| e.to_string())?;
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    for n in &args.disable {
        sc.disable(n).map_err(|e| e.to_string())?;
    }
    let out = run_scenario(&sc).map_err(|e| e.to_string())?;
    if let Some(p) = &args.trace {
        let f = File::create(p).map_err(|e| format!("{}: {e}", p.display()))?;
        let mut w = BufWriter::new(f);
        out.trace.write_jsonl(&mut w).map_err(|e| e.to_string())?;
        w.flush().map_err(|e| e.to_string())?;
    }
    if let Some(p) = &args.metrics {
        let json = serde_json::to_string_pretty(&out.metrics).map_err(|e| e.to_string())?;
        std::fs::write(p, json + "\n").map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(out)
}

fn print_summary(out: &RunOutput) {
    let m = &out.metrics;
    println!("scenario {} seed {} ({:.1} s)", m.scenario, m.seed, m.duration_s);
    for s in &m.mux_timeline {
        println!("  {:>8.3}s  mux {} -> {} ({})", s.t_s, s.from, s.to, s.node);
    }
    for s in &m.stop_events {
        println!("  {:>8.3}s  graceful stop: {} (recoverable={})", s.t_s, s.reason, s.recoverable);
    }
    for r in &m.merges {
        let sep = r.true_sep.map_or("?".to_string(), |s| format!("{s:.2}"));
        println!("  {:>8.3}s  merge, true separation {sep} m, {}/{} hits", r.t_s, r.hits, r.k);
    }
    for x in &m.mitigations {
        match (&x.action, x.latency_s) {
            (Some(a), Some(l)) => println!(
                "  {:>8.3}s  {} on {} mitigated by {a} after {l:.3}s",
                x.at_s, x.fault, x.target
            ),
            _ => println!("  {:>8.3}s  {} on {} not mitigated", x.at_s, x.fault, x.target),
        }
    }
    println!("  max lateral error {:.3} m, final speed {:.2} m/s", m.max_lateral_error, m.final_speed);
}

fn print_asserts(out: &RunOutput) {
    for o in &out.report.outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {} ({})", o.name, o.check, o.detail);
    }
}

fn read_trace(path: &Path) -> Result<Trace, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Trace::read_jsonl(BufReader::new(f)).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => execute(&args).map(|out| {
            print_summary(&out);
            print_asserts(&out);
            ExitCode::SUCCESS
        }),
        Cmd::Verify(args) => execute(&args).map(|out| {
            print_asserts(&out);
            if out.report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }),
        Cmd::Fmeca => {
            println!("{:<20} {:<10} {:<10} {:<13}", "fault type", "probability", "severity", "criticality");
            for e in fmeca_table() {
                println!(
                    "{:<20} {:<10} {:<10} {:<13}",
                    e.fault.as_str(),
                    e.probability,
                    e.severity,
                    e.criticality
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Plot { trace, out } => read_trace(&trace)
            .and_then(|t| plot::render_all(&t, &out))
            .map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
