use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phs::config::{parse_config_with_overrides, Overrides};
use phs::engine::{run_experiment, EngineError, ExperimentConfig, WorkerPool};
use phs::report;
use phs::space::ParameterKind;
use phs::store::{best_trial, LoadedStore, TrialStore};
use phs::targets::build_target;

#[derive(Parser)]
#[command(
    name = "phs",
    version,
    about = "Parallel hyperparameter search over black-box targets"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run an experiment described by a TOML config file
    Run {
        /// Path to the experiment config
        #[arg(short = 'c', long)]
        config: PathBuf,
        /// Override the worker count
        #[arg(long)]
        workers: Option<usize>,
        /// Override the experiment seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the per-trial repetition count
        #[arg(long)]
        repetitions: Option<u32>,
        /// Override the output directory
        #[arg(short = 'o', long)]
        output_dir: Option<PathBuf>,
    },
    /// Regenerate figures and a summary from a finished experiment directory
    Report {
        /// Experiment directory (holds trials.csv and experiment.json)
        dir: PathBuf,
        /// Figure kinds to emit; defaults to every applicable kind
        #[arg(long = "fig", value_enum)]
        figures: Vec<FigKind>,
        /// Parameter on the x axis of scatter/contour figures
        #[arg(long)]
        x: Option<String>,
        /// Parameter on the y axis of scatter/contour figures
        #[arg(long)]
        y: Option<String>,
        /// Contour grid resolution per side
        #[arg(long, default_value_t = 40)]
        grid: usize,
    },
    /// List built-in targets and the subprocess protocol
    ListTargets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FigKind {
    ResultOverIndex,
    Scatter,
    ParallelCoords,
    WorkerTimeline,
    Contour,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Commands::Run {
            config,
            workers,
            seed,
            repetitions,
            output_dir,
        } => cmd_run(&config, workers, seed, repetitions, output_dir),
        Commands::Report {
            dir,
            figures,
            x,
            y,
            grid,
        } => cmd_report(&dir, &figures, x.as_deref(), y.as_deref(), grid),
        Commands::ListTargets => {
            print_targets();
            ExitCode::SUCCESS
        }
    }
}

fn cmd_run(
    config_path: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
    repetitions: Option<u32>,
    output_dir: Option<PathBuf>,
) -> ExitCode {
    let overrides = Overrides {
        workers,
        seed,
        repetitions,
        output_dir,
    };
    // Full validation happens before anything touches the filesystem, so a
    // bad config never leaves an output directory behind.
    let config = match parse_config_with_overrides(config_path, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let target = match build_target(&config.target, &config.space) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let pool = if config.workers == 1 {
        WorkerPool::serial()
    } else {
        WorkerPool::in_process(config.workers)
    };

    match run_experiment(&config, target.as_ref(), &pool) {
        Ok(summary) => {
            let best = summary.best.as_ref().expect("summary has a best trial");
            println!("{}", best_line(&config, best));
            println!(
                "{} trials ({} failed) in {:.2}s -> {}",
                summary.total,
                summary.failed,
                summary.duration.as_secs_f64(),
                config.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(EngineError::AllTrialsFailed(total)) => {
            eprintln!("error: all {total} trials failed; see {}/trials.csv", config.output_dir.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn best_line(config: &ExperimentConfig, best: &phs::store::TrialRecord) -> String {
    let mut line = format!(
        "best: set_index={} result={}",
        best.set_index,
        best.result.expect("best trial has a result")
    );
    for (spec, value) in config.space.specs().iter().zip(&best.values) {
        if let Some(value) = value {
            line.push_str(&format!(" {}={}", spec.name, value.to_wire()));
        }
    }
    line
}

fn cmd_report(
    dir: &Path,
    figures: &[FigKind],
    x: Option<&str>,
    y: Option<&str>,
    grid: usize,
) -> ExitCode {
    let loaded = match TrialStore::load(dir) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if !loaded.completed {
        eprintln!(
            "warning: experiment is incomplete (no completeness marker); reporting available rows"
        );
    }

    let continuous: Vec<String> = loaded
        .meta
        .space
        .specs()
        .iter()
        .filter(|s| matches!(s.kind, ParameterKind::Continuous { .. }))
        .map(|s| s.name.clone())
        .collect();
    let pair: Option<(String, String)> = match (x, y) {
        (Some(a), Some(b)) => Some((a.to_string(), b.to_string())),
        (None, None) if continuous.len() >= 2 => {
            Some((continuous[0].clone(), continuous[1].clone()))
        }
        (None, None) => None,
        _ => {
            eprintln!("error: --x and --y must be given together");
            return ExitCode::from(1);
        }
    };

    let explicit_selection = !figures.is_empty();
    let selected: Vec<FigKind> = if explicit_selection {
        figures.to_vec()
    } else {
        vec![
            FigKind::ResultOverIndex,
            FigKind::Scatter,
            FigKind::ParallelCoords,
            FigKind::WorkerTimeline,
            FigKind::Contour,
        ]
    };

    let figures_dir = dir.join("figures");
    if let Err(e) = std::fs::create_dir_all(&figures_dir) {
        eprintln!("error: cannot create {}: {e}", figures_dir.display());
        return ExitCode::from(1);
    }

    for kind in selected {
        if let Err(code) =
            emit_figure(&figures_dir, &loaded, kind, &pair, grid, explicit_selection)
        {
            return code;
        }
    }

    print_summary(&loaded);
    ExitCode::SUCCESS
}

/// Render one figure kind; inapplicable kinds are skipped silently under the
/// default selection but fail loudly when requested by name.
fn emit_figure(
    figures_dir: &Path,
    loaded: &LoadedStore,
    kind: FigKind,
    pair: &Option<(String, String)>,
    grid: usize,
    explicit: bool,
) -> Result<(), ExitCode> {
    let records = &loaded.records;
    let space = &loaded.meta.space;
    let outcome: Result<(String, report::Figure), report::ReportError> = match kind {
        FigKind::ResultOverIndex => report::result_over_index(records)
            .map(|f| ("fig_result_over_index".to_string(), f)),
        FigKind::Scatter => match pair {
            Some((px, py)) => report::scatter_2d(space, records, px, py)
                .map(|f| (format!("fig_scatter_{px}_{py}"), f)),
            None => {
                if explicit {
                    eprintln!("error: scatter needs two continuous parameters (--x/--y)");
                    return Err(ExitCode::from(1));
                }
                return Ok(());
            }
        },
        FigKind::ParallelCoords => {
            if space.len() < 2 && !explicit {
                return Ok(());
            }
            report::parallel_coords(space, records)
                .map(|f| ("fig_parallel_coords".to_string(), f))
        }
        FigKind::WorkerTimeline => report::worker_timeline(records, loaded.meta.workers)
            .map(|f| ("fig_worker_timeline".to_string(), f)),
        FigKind::Contour => match pair {
            Some((px, py)) => report::contour(space, records, px, py, grid)
                .map(|f| (format!("fig_contour_{px}_{py}"), f)),
            None => {
                if explicit {
                    eprintln!("error: contour needs two continuous parameters (--x/--y)");
                    return Err(ExitCode::from(1));
                }
                return Ok(());
            }
        },
    };

    match outcome {
        Ok((stem, figure)) => {
            let svg_path = figures_dir.join(format!("{stem}.svg"));
            if let Err(e) = std::fs::write(&svg_path, &figure.svg) {
                eprintln!("error: cannot write {}: {e}", svg_path.display());
                return Err(ExitCode::from(1));
            }
            if let Some(csv) = &figure.csv {
                let csv_path = figures_dir.join(format!("{stem}.csv"));
                if let Err(e) = std::fs::write(&csv_path, csv) {
                    eprintln!("error: cannot write {}: {e}", csv_path.display());
                    return Err(ExitCode::from(1));
                }
            }
            println!("wrote {}", svg_path.display());
            Ok(())
        }
        Err(e) if explicit => {
            eprintln!("error: {e}");
            Err(ExitCode::from(1))
        }
        Err(_) => Ok(()), // default selection: skip inapplicable figures
    }
}

fn print_summary(loaded: &LoadedStore) {
    let ok = loaded.records.iter().filter(|r| r.is_ok()).count();
    let failed = loaded.records.len() - ok;
    println!(
        "{} trials, {} ok, {} failed",
        loaded.records.len(),
        ok,
        failed
    );
    match best_trial(&loaded.records) {
        Some(best) => {
            println!("best trial: set_index={}", best.set_index);
            println!("  {:<24} {}", "result", best.result.unwrap());
            for (spec, value) in loaded.meta.space.specs().iter().zip(&best.values) {
                if let Some(value) = value {
                    println!("  {:<24} {}", spec.name, value.to_wire());
                }
            }
        }
        None => println!("no successful trials"),
    }
}

fn print_targets() {
    println!("builtin targets:");
    println!("  griewank              multimodal test function, minimum 0 at the origin");
    println!("  sphere                sum of squares, minimum 0 at the origin");
    println!("  rosenbrock            curved valley, minimum 0 at (1, ..., 1); needs >= 2 continuous parameters");
    println!("  sleep_then_quadratic  sleeps `sleep_ms` then returns sum (x_i - 0.3)^2; for scheduling tests");
    println!();
    println!("subprocess targets:");
    println!("  any executable; parameters arrive as `--param name=value` argument pairs");
    println!("  and as PHS_PARAM_<NAME> environment variables, the repetition index as");
    println!("  PHS_REP; the last non-blank stdout line must be the result");
}
