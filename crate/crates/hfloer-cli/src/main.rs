//! Command line front end.
//!
//!   hfloer run --config tangle.cfg [--out DIR] [--wide-scan] [--dump-curves]
//!   hfloer validate --config tangle.cfg
//!   hfloer snf matrix.json
//!
//! Exit codes: 0 success, 2 configuration or input trouble, 3 the traced
//! window cannot certify the answer (deepen the trace), 4 an internal
//! cross-check caught a contradiction (a bug, not a user error).

use clap::{Args, Parser, Subcommand};
use hfloer::artifacts;
use hfloer::config::parse_config;
use hfloer::homology::{smith_normal_form, verify_snf};
use hfloer::pipeline::{emit_artifacts, run_pipeline, validate_pipeline};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hfloer", version, about = "Homoclinic tangles and their bigon homology")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write artifacts
    Run(RunArgs),
    /// Trace and classify only; print a readiness report, write nothing
    Validate(ValidateArgs),
    /// Smith normal form of an integer matrix, as JSON on stdout
    Snf(SnfArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a key = value config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probe offsets 2..=n_scan beyond every counted bigon
    #[arg(long)]
    wide_scan: bool,
    /// Also write the traced manifold polylines as curves.csv
    #[arg(long)]
    dump_curves: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SnfArgs {
    /// JSON file: either [[...]] or {"matrix": [[...]]}
    matrix: PathBuf,
}

fn load_config(path: &PathBuf) -> hfloer::Result<hfloer::config::RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        hfloer::Error::Config(format!("cannot read {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

fn cmd_run(args: &RunArgs) -> hfloer::Result<()> {
    let mut cfg = load_config(&args.config)?;
    cfg.wide_scan |= args.wide_scan;
    cfg.dump_curves |= args.dump_curves;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));

    let outcome = run_pipeline(&cfg)?;
    let written = emit_artifacts(&outcome, &cfg, &out_dir)?;

    let r = &outcome.report;
    println!("model {} with multiplier {:.6}", r.model, r.lambda);
    println!(
        "fixed point ({:.6}, {:.6}); {} homoclinic points in {} orbits",
        r.fixed_point[0], r.fixed_point[1], r.total_points, r.total_orbits
    );
    for (label, n) in r.pair_labels.iter().zip(r.points_per_pair) {
        println!("  pair {label}: {n} points");
    }
    println!(
        "{} orbit classes in the fundamental windows, {} primary",
        r.classes_in_window, r.primary_classes
    );
    let counts: Vec<String> =
        r.generator_counts.iter().map(|(k, c)| format!("C_{k} = Z^{c}")).collect();
    println!("chain groups: {}", if counts.is_empty() { "all zero".into() } else { counts.join(", ") });
    let ranks: Vec<String> = r
        .homology_ranks
        .iter()
        .filter(|(_, &rk)| rk > 0)
        .map(|(k, rk)| format!("H_{k} = Z^{rk}"))
        .collect();
    println!(
        "homology: {} ({} boundary hits, torsion-free)",
        if ranks.is_empty() { "zero".into() } else { ranks.join(", ") },
        r.boundary_nonzero
    );
    if let Some(w) = &r.wide_scan {
        println!(
            "wide scan to offset {}: {} probes, {} bigons",
            w.reach, w.probes, w.bigons_found
        );
    }
    print_warnings(&r.warnings);
    println!("artifacts in {}:", out_dir.display());
    for p in written {
        println!("  {}", p.file_name().unwrap().to_string_lossy());
    }
    println!("done in {} ms", r.timing_ms.total_ms);
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> hfloer::Result<()> {
    let cfg = load_config(&args.config)?;
    let report = validate_pipeline(&cfg)?;
    println!("model {} with multiplier {:.6}", report.model, report.lambda);
    println!("fixed point ({:.6}, {:.6})", report.fixed_point[0], report.fixed_point[1]);
    for (i, label) in report.pair_labels.iter().enumerate() {
        println!(
            "  pair {label}: {} points, first intersection {}",
            report.points_per_pair[i],
            if report.first_intersection_found[i] { "found" } else { "missing" }
        );
    }
    println!(
        "{} points in {} orbits; {} classes in the fundamental windows ({} primary)",
        report.total_points, report.total_orbits, report.classes_in_window, report.primary_in_window
    );
    print_warnings(&report.warnings);
    println!("ok");
    Ok(())
}

/// Warnings go to stderr, truncated; report.json keeps the full list.
fn print_warnings(warnings: &[String]) {
    const SHOWN: usize = 10;
    for w in warnings.iter().take(SHOWN) {
        eprintln!("warning: {w}");
    }
    if warnings.len() > SHOWN {
        eprintln!("warning: ... and {} more (see report.json)", warnings.len() - SHOWN);
    }
}

fn cmd_snf(args: &SnfArgs) -> hfloer::Result<()> {
    let text = std::fs::read_to_string(&args.matrix).map_err(|e| {
        hfloer::Error::Config(format!("cannot read {}: {e}", args.matrix.display()))
    })?;
    let a = artifacts::parse_matrix_json(&text)?;
    let s = smith_normal_form(&a);
    verify_snf(&a, &s)?;
    print!("{}", artifacts::snf_json(&a, &s)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Snf(args) => cmd_snf(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
