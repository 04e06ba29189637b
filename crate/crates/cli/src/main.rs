use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{error::ErrorKind, Parser, Subcommand};

use gldt::io::{
    detections_from_records, detections_to_records, read_mot, trajectories_from_records,
    trajectories_to_records, write_mot, write_text, RunConfig,
};
use gldt::metrics::{evaluate, MetricsReport};
use gldt::pipeline::TrackerOptions;
use gldt::runner::{ablation_variants, run_suite, run_system, suite_configs, Suite, SystemOptions};
use gldt::sim::{gen_scenario, render_detections};
use gldt::stff::run_checks;
use gldt::{Error, TrajectorySet};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

const GT_FILE: &str = "gt.txt";
const DET_FILE: &str = "det_global.txt";
const MANIFEST_FILE: &str = "scenario.cfg";

/// Small aerial target tracking: simulate, track, evaluate.
#[derive(Debug, Parser)]
#[command(name = "gldt", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a scenario; writes gt.txt, det_global.txt and scenario.cfg.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track the detections in DIR and write MOT results.
    ///
    /// Window (local) detection replays DIR/gt.txt through the detector
    /// oracle, so it needs the ground truth the scenario was made from.
    Track {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// IoU-only association, no recovery, global detection only.
        #[arg(long, conflicts_with_all = ["no_pmr", "no_ld"])]
        baseline: bool,
        #[arg(long)]
        no_pmr: bool,
        #[arg(long)]
        no_ld: bool,
    },
    /// Score a result file against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        res: PathBuf,
    },
    /// Run the seeded scenario suite under every ablation variant.
    Ablate {
        #[arg(long, default_value = "occlusion")]
        suite: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the fusion-block invariant checks.
    StffCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            // Parse errors inside a config file are configuration errors.
            Error::Parse { line, msg } => Error::Config(format!("line {line}: {msg}")),
            other => other,
        }),
        None => Ok(RunConfig::default()),
    }
}

fn simulate(config: Option<&Path>, out: &Path) -> Result<(), Error> {
    let cfg = load_config(config)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        context: out.display().to_string(),
        msg: e.to_string(),
    })?;
    let gt = gen_scenario(&cfg.scenario)?;
    let dets = render_detections(&gt, &cfg.noise, cfg.scenario.frame_dims, cfg.scenario.seed)?;
    write_mot(
        &out.join(GT_FILE),
        &trajectories_to_records(&gt, |_, _| 1.0),
    )?;
    write_mot(&out.join(DET_FILE), &detections_to_records(&dets))?;
    write_text(&out.join(MANIFEST_FILE), &cfg.to_text())?;
    println!(
        "wrote {} frames, {} targets, {} detections to {}",
        cfg.scenario.frames,
        cfg.scenario.n_targets,
        dets.values().map(Vec::len).sum::<usize>(),
        out.display()
    );
    Ok(())
}

fn track(config: Option<&Path>, det: &Path, out: &Path, opts: SystemOptions) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let dets = detections_from_records(&read_mot(&det.join(DET_FILE))?)?;
    let gt_path = det.join(GT_FILE);
    let gt = if opts.local_detection || gt_path.exists() {
        trajectories_from_records(&read_mot(&gt_path)?)?
    } else {
        // Without ground truth the frame range comes from the detections alone.
        TrajectorySet::new()
    };
    let start = Instant::now();
    let run = run_system(&gt, &dets, &cfg, opts)?;
    let secs = start.elapsed().as_secs_f64();
    let steps = run.modes.len();
    let records = trajectories_to_records(&run.tracks, |f, id| {
        run.confidences.get(&(f, id)).copied().unwrap_or(1.0)
    });
    write_mot(out, &records)?;
    let local = run
        .modes
        .iter()
        .filter(|(_, m)| *m == gldt::glsched::Mode::Local)
        .count();
    println!(
        "frames={steps} local_frames={local} boxes={}",
        records.len()
    );
    println!("steps_per_sec={:.1}", steps as f64 / secs.max(1e-9));
    Ok(())
}

fn print_report(r: &MetricsReport) {
    let rows = [
        ("IDSW", r.idsw as f64, false),
        ("IDF1", r.idf1, true),
        ("MOTA", r.mota, true),
        ("MOTP", r.motp, true),
        ("HOTA", r.hota, true),
        ("DetA", r.deta, true),
        ("AssA", r.assa, true),
    ];
    for (name, v, pct) in rows {
        if pct {
            println!("{name:<6}{:>10.2}", v * 100.0);
        } else {
            println!("{name:<6}{v:>10}");
        }
    }
    for (name, v, pct) in rows {
        let key = name.to_lowercase();
        if pct {
            println!("{key}={:.4}", v * 100.0);
        } else {
            println!("{key}={v}");
        }
    }
}

fn eval(gt: &Path, res: &Path) -> Result<(), Error> {
    let gt = trajectories_from_records(&read_mot(gt)?)?;
    let pred = trajectories_from_records(&read_mot(res)?)?;
    print_report(&evaluate(&gt, &pred)?);
    Ok(())
}

fn ablate(suite: &str, seeds: u64, config: Option<&Path>) -> Result<(), Error> {
    let suite: Suite = suite.parse()?;
    if seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    let base = load_config(config)?;
    let configs = suite_configs(suite, seeds, &base);
    println!(
        "{:<16}{:>8}{:>9}{:>9}{:>9}{:>9}",
        "variant", "IDSW", "IDF1", "MOTA", "MOTP", "HOTA"
    );
    for (label, opts) in ablation_variants() {
        let s = run_suite(&configs, label, opts)?;
        println!(
            "{:<16}{:>8}{:>9.2}{:>9.2}{:>9.2}{:>9.2}",
            s.label,
            s.idsw,
            s.idf1 * 100.0,
            s.mota * 100.0,
            s.motp * 100.0,
            s.hota * 100.0
        );
    }
    Ok(())
}

fn stff_check(seed: u64) -> Result<bool, Error> {
    let checks = run_checks(seed)?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        let tag = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{tag} {}", c.name);
        } else {
            println!("{tag} {} ({})", c.name, c.detail);
        }
    }
    println!(
        "{}/{} checks passed",
        checks.iter().filter(|c| c.passed).count(),
        checks.len()
    );
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.cmd {
        Cmd::Simulate { config, out } => simulate(config.as_deref(), &out).map(|_| true),
        Cmd::Track {
            config,
            det,
            out,
            baseline,
            no_pmr,
            no_ld,
        } => {
            let opts = if baseline {
                SystemOptions::BASELINE
            } else {
                SystemOptions {
                    tracker: TrackerOptions {
                        recovery: !no_pmr,
                        ..TrackerOptions::FULL
                    },
                    local_detection: !no_ld,
                }
            };
            track(config.as_deref(), &det, &out, opts).map(|_| true)
        }
        Cmd::Eval { gt, res } => eval(&gt, &res).map(|_| true),
        Cmd::Ablate {
            suite,
            seeds,
            config,
        } => ablate(&suite, seeds, config.as_deref()).map(|_| true),
        Cmd::StffCheck { seed } => stff_check(seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
