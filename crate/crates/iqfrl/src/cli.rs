//! Command-line entry points: dataset generation, training, rule selection,
//! closed-loop evaluation, tracking runs, and report aggregation.
//!
//! Every command is deterministic under a fixed `--seed` and writes a JSON
//! run manifest beside its outputs. Exit codes: 0 success, 1 usage error,
//! 2 data error (unreadable or malformed inputs), 3 run failure (incomplete
//! lap, unreachable target, unavailable situation).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::ClassificationTask;
use crate::dataset::{ClassDataset, Dataset};
use crate::fusion::{run_tracking, FusionConfig, Scenario};
use crate::kb_io::{parse_kb, serialize_kb, LineTokens, ParseError};
use crate::learn::{engine, LearnerConfig, RegressionTask};
use crate::model::KnowledgeBase;
use crate::select::ils_select;
use crate::sim::benchmark::{
    quality, run_wall_following, summarize, LapMetrics, SimConfig, SituationKbs,
};
use crate::sim::env::Environment;
use crate::sim::raycast::LaserConfig;
use crate::sim::supervisor::{supervisor_dataset, SituationCounts, SupervisorConfig};

pub const METRICS_MAGIC: &str = "iqfrl-metrics";
pub const METRICS_VERSION: &str = "v1";

#[derive(Parser)]
#[command(name = "iqfrl", version, about = "Quantified fuzzy rule learning for robot controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate supervisor training datasets from an environment.
    GenData {
        #[arg(long)]
        env: PathBuf,
        /// Examples per situation: straight,convex,concave.
        #[arg(long, default_value = "572,540,594")]
        counts: String,
        #[arg(long, default_value_t = 722)]
        beams: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a control knowledge base from a regression dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output `.qfr` file; a per-epoch log goes to `<out>.log`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a situation classifier from a classification dataset.
    TrainClassifier {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        default_class: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a rule subset that keeps the dataset error low.
    SelectRules {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the situation-gated wall-following benchmark.
    #[command(alias = "evaluate")]
    Simulate {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        kb_sw: PathBuf,
        #[arg(long)]
        kb_cx: PathBuf,
        #[arg(long)]
        kb_cc: PathBuf,
        #[arg(long)]
        kb_class: PathBuf,
        #[arg(long, default_value_t = 5)]
        laps: usize,
        /// Output directory for trace, metrics, and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate metrics files into one mean/stddev table.
    QualityReport {
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run target tracking with wall-following avoidance.
    Track {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        kb_sw: PathBuf,
        #[arg(long)]
        kb_cx: PathBuf,
        #[arg(long)]
        kb_cc: PathBuf,
        #[arg(long)]
        kb_class: PathBuf,
        #[arg(long, default_value_t = 300.0)]
        max_time: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Run(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Run(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Option<String>,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    timestamp_unix: u64,
}

fn write_manifest(dir_or_file: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = if dir_or_file.is_dir() {
        dir_or_file.join("manifest.json")
    } else {
        dir_or_file.with_extension("manifest.json")
    };
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn manifest(
    command: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[&Path],
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config: config.map(|p| p.display().to_string()),
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

fn load_env(path: &Path) -> Result<Environment, CliError> {
    Environment::load(path).map_err(data_err)
}

fn load_kb(path: &Path) -> Result<KnowledgeBase, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let kb = parse_kb(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    kb.validate().map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    Ok(kb)
}

fn load_config(path: Option<&Path>) -> Result<LearnerConfig, CliError> {
    match path {
        Some(p) => LearnerConfig::load(p).map_err(data_err),
        None => Ok(LearnerConfig::default()),
    }
}

fn parse_counts(s: &str) -> Result<SituationCounts, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--counts expects three comma-separated integers, found {s:?}"
        )));
    }
    let mut vals = [0usize; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid count {p:?} in --counts")))?;
    }
    Ok(SituationCounts { straight: vals[0], convex: vals[1], concave: vals[2] })
}

/// Serializes per-lap metrics plus their aggregate as a line-oriented file.
pub fn serialize_metrics(laps: &[LapMetrics]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{METRICS_MAGIC} {METRICS_VERSION}");
    for (i, m) in laps.iter().enumerate() {
        let _ = writeln!(
            out,
            "lap {} dist {} vel {} velch {} time {} blockades {} quality {}",
            i + 1,
            m.mean_right_dist_cm,
            m.mean_vel_cms,
            m.mean_vel_change_cms,
            m.time_s,
            m.blockades,
            quality(m)
        );
    }
    if let Some(s) = summarize(laps) {
        let _ = writeln!(
            out,
            "aggregate dist {} {} vel {} {} velch {} {} time {} {} blockades {} {} quality {} {}",
            s.dist_cm.0,
            s.dist_cm.1,
            s.vel_cms.0,
            s.vel_cms.1,
            s.vel_change_cms.0,
            s.vel_change_cms.1,
            s.time_s.0,
            s.time_s.1,
            s.blockades.0,
            s.blockades.1,
            s.quality.0,
            s.quality.1
        );
    }
    out
}

/// Parses a metrics file back into its per-lap records.
pub fn parse_metrics(text: &str) -> Result<Vec<LapMetrics>, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line_no, first) = lines.next().ok_or_else(|| ParseError {
        line: 1,
        col: 1,
        token: "<empty>".to_string(),
        message: "empty document".to_string(),
    })?;
    let mut toks = LineTokens::new(line_no, first);
    toks.expect_keyword(METRICS_MAGIC)?;
    toks.expect_keyword(METRICS_VERSION)?;
    toks.expect_end()?;

    let mut laps = Vec::new();
    for (line_no, raw) in lines {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut toks = LineTokens::new(line_no, line);
        let (col, word) = toks.expect("a directive")?;
        match word {
            "lap" => {
                let _index = toks.expect_usize("lap index")?;
                toks.expect_keyword("dist")?;
                let dist = toks.expect_f64("mean right distance")?;
                toks.expect_keyword("vel")?;
                let vel = toks.expect_f64("mean velocity")?;
                toks.expect_keyword("velch")?;
                let velch = toks.expect_f64("mean velocity change")?;
                toks.expect_keyword("time")?;
                let time = toks.expect_f64("lap time")?;
                toks.expect_keyword("blockades")?;
                let blockades = toks.expect_usize("blockade count")?;
                toks.expect_keyword("quality")?;
                let _quality = toks.expect_f64("quality")?;
                toks.expect_end()?;
                laps.push(LapMetrics {
                    mean_right_dist_cm: dist,
                    mean_vel_cms: vel,
                    mean_vel_change_cms: velch,
                    time_s: time,
                    blockades,
                });
            }
            "aggregate" => {} // recomputed from the lap records
            other => return Err(toks.error(col, other, "unknown directive")),
        }
    }
    Ok(laps)
}

fn fmt_pm((mean, std): (f64, f64)) -> String {
    format!("{mean:.2} \u{b1} {std:.2}")
}

/// Renders one summary row of the aggregate table.
fn summary_row(label: &str, laps: &[LapMetrics]) -> String {
    match summarize(laps) {
        Some(s) => format!(
            "{label}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_pm(s.dist_cm),
            fmt_pm(s.vel_cms),
            fmt_pm(s.vel_change_cms),
            fmt_pm(s.time_s),
            fmt_pm(s.blockades),
            fmt_pm(s.quality),
        ),
        None => format!("{label}\t(no laps)"),
    }
}

fn training_log_line(l: &engine::EpochLog) -> String {
    format!(
        "epoch {} iterations {} best_fitness {} rules {} uncovered {}",
        l.epoch, l.iterations, l.best_fitness, l.rules_total, l.uncovered_remaining
    )
}

fn cmd_gen_data(
    env_path: &Path,
    counts: &str,
    beams: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let env = load_env(env_path)?;
    let counts = parse_counts(counts)?;
    let laser = LaserConfig { n_beams: beams, ..LaserConfig::default() };
    let universes = crate::model::Universes::with_beams(beams);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = supervisor_dataset(
        &env,
        &counts,
        &laser,
        &universes,
        &SupervisorConfig::default(),
        &mut rng,
    )
    .map_err(run_err)?;
    std::fs::create_dir_all(out).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let files = [
        (out.join("sw.data"), data.straight.serialize()),
        (out.join("cx.data"), data.convex.serialize()),
        (out.join("cc.data"), data.concave.serialize()),
        (out.join("class.data"), data.classes.serialize()),
    ];
    for (path, text) in &files {
        std::fs::write(path, text).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    }
    let outputs: Vec<&Path> = files.iter().map(|(p, _)| p.as_path()).collect();
    write_manifest(out, &manifest("gen-data", None, Some(seed), &[env_path], &outputs))?;
    println!(
        "wrote {} straight, {} convex, {} concave examples to {}",
        counts.straight,
        counts.convex,
        counts.concave,
        out.display()
    );
    Ok(())
}

fn write_kb_and_log(
    kb: &KnowledgeBase,
    log: &[String],
    out: &Path,
) -> Result<(), CliError> {
    std::fs::write(out, serialize_kb(kb))
        .map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let log_path = out.with_extension("log");
    std::fs::write(&log_path, log.join("\n") + "\n")
        .map_err(|e| data_err(format!("{}: {e}", log_path.display())))?;
    Ok(())
}

fn cmd_train(
    data: &Path,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let dataset = Dataset::load(data).map_err(data_err)?;
    let cfg = load_config(config)?;
    let task = RegressionTask::new(dataset.universes, &dataset.examples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let kb = engine::train(&task, &cfg, &mut rng, |l| {
        let line = training_log_line(l);
        println!("{line}");
        log.push(line);
    });
    write_kb_and_log(&kb, &log, out)?;
    write_manifest(out, &manifest("train", config, Some(seed), &[data], &[out]))?;
    println!("learned {} rules -> {}", kb.rules.len(), out.display());
    Ok(())
}

fn cmd_train_classifier(
    data: &Path,
    config: Option<&Path>,
    default_class: u32,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let dataset = ClassDataset::load(data).map_err(data_err)?;
    if default_class == 0 || default_class > dataset.n_classes {
        return Err(CliError::Usage(format!(
            "--default-class must be in 1..={}",
            dataset.n_classes
        )));
    }
    let cfg = load_config(config)?;
    let task = ClassificationTask::new(dataset.universes, &dataset, default_class);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let kb = engine::train(&task, &cfg, &mut rng, |l| {
        let line = training_log_line(l);
        println!("{line}");
        log.push(line);
    });
    write_kb_and_log(&kb, &log, out)?;
    write_manifest(out, &manifest("train-classifier", config, Some(seed), &[data], &[out]))?;
    let (_, accuracy, kappa) = crate::classify::confusion_and_kappa(&kb, &dataset);
    println!(
        "learned {} rules, training accuracy {accuracy:.4}, kappa {} -> {}",
        kb.rules.len(),
        kappa.map_or("n/a".to_string(), |k| format!("{k:.4}")),
        out.display()
    );
    Ok(())
}

fn cmd_select_rules(
    kb_path: &Path,
    data: &Path,
    seed: u64,
    restarts: usize,
    out: &Path,
) -> Result<(), CliError> {
    let kb = load_kb(kb_path)?;
    let dataset = Dataset::load(data).map_err(data_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected = ils_select(&kb, &dataset, 1, restarts, &mut rng);
    std::fs::write(out, serialize_kb(&selected))
        .map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    write_manifest(out, &manifest("select-rules", None, Some(seed), &[kb_path, data], &[out]))?;
    println!("kept {} of {} rules -> {}", selected.rules.len(), kb.rules.len(), out.display());
    Ok(())
}

fn load_controller(
    kb_sw: &Path,
    kb_cx: &Path,
    kb_cc: &Path,
    kb_class: &Path,
) -> Result<(SituationKbs, KnowledgeBase), CliError> {
    let kbs = SituationKbs {
        straight: load_kb(kb_sw)?,
        convex: load_kb(kb_cx)?,
        concave: load_kb(kb_cc)?,
    };
    let classifier = load_kb(kb_class)?;
    for kb in [&kbs.straight, &kbs.convex, &kbs.concave] {
        if kb.universes.n_beams != classifier.universes.n_beams {
            return Err(CliError::Data(
                "knowledge bases disagree on the beam count".to_string(),
            ));
        }
    }
    Ok((kbs, classifier))
}

fn serialize_sim_trace(trace: &[crate::sim::benchmark::TraceRecord]) -> String {
    let mut out = String::from("t x y theta v w situation vlin_cmd vang_cmd\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            r.t, r.x, r.y, r.theta, r.v, r.w, r.situation, r.vlin_cmd, r.vang_cmd
        );
    }
    out
}

fn cmd_simulate(
    env_path: &Path,
    kb_sw: &Path,
    kb_cx: &Path,
    kb_cc: &Path,
    kb_class: &Path,
    laps: usize,
    out: &Path,
) -> Result<(), CliError> {
    let env = load_env(env_path)?;
    let (kbs, classifier) = load_controller(kb_sw, kb_cx, kb_cc, kb_class)?;
    let cfg = SimConfig {
        laser: LaserConfig { n_beams: classifier.universes.n_beams, ..LaserConfig::default() },
        ..SimConfig::default()
    };
    let report = run_wall_following(&env, &kbs, &classifier, laps, &cfg).map_err(data_err)?;
    std::fs::create_dir_all(out).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let trace_path = out.join("trace.txt");
    let metrics_path = out.join("metrics.txt");
    std::fs::write(&trace_path, serialize_sim_trace(&report.trace))
        .map_err(|e| data_err(format!("{}: {e}", trace_path.display())))?;
    std::fs::write(&metrics_path, serialize_metrics(&report.laps))
        .map_err(|e| data_err(format!("{}: {e}", metrics_path.display())))?;
    write_manifest(
        out,
        &manifest(
            "simulate",
            None,
            None,
            &[env_path, kb_sw, kb_cx, kb_cc, kb_class],
            &[&trace_path, &metrics_path],
        ),
    )?;
    println!("env\tDist.(cm)\tVel.(cm/s)\tVel.ch.(cm/s)\tTime(s)\tBlockades\tquality");
    println!("{}", summary_row(&env_path.display().to_string(), &report.laps));
    if report.uncovered_cycles > 0 {
        println!("({} cycles held the previous command: no rule fired)", report.uncovered_cycles);
    }
    if let Some(lap) = report.incomplete_lap {
        return Err(CliError::Run(format!(
            "lap {lap} not completed within {} s (trace in {})",
            cfg.max_lap_time,
            trace_path.display()
        )));
    }
    Ok(())
}

fn cmd_quality_report(files: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Usage("quality-report needs at least one metrics file".to_string()));
    }
    let mut table =
        String::from("env\tDist.(cm)\tVel.(cm/s)\tVel.ch.(cm/s)\tTime(s)\tBlockades\tquality\n");
    let mut all_laps = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(path)
            .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let laps =
            parse_metrics(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let _ = writeln!(table, "{}", summary_row(&path.display().to_string(), &laps));
        all_laps.extend(laps);
    }
    if files.len() > 1 {
        let _ = writeln!(table, "{}", summary_row("all", &all_laps));
    }
    match out {
        Some(path) => std::fs::write(path, &table)
            .map_err(|e| data_err(format!("{}: {e}", path.display())))?,
        None => print!("{table}"),
    }
    Ok(())
}

fn serialize_track_trace(trace: &[crate::fusion::TrackRecord]) -> String {
    let mut out = String::from("t x y theta behavior vlin_cmd vang_cmd target_x target_y\n");
    for r in trace {
        let b = match r.behavior {
            crate::fusion::ActiveBehavior::Tracking => "tracking",
            crate::fusion::ActiveBehavior::Avoidance => "avoidance",
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {b} {} {} {} {}",
            r.t, r.x, r.y, r.theta, r.vlin_cmd, r.vang_cmd, r.target_x, r.target_y
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_track(
    env_path: &Path,
    scenario_path: &Path,
    kb_sw: &Path,
    kb_cx: &Path,
    kb_cc: &Path,
    kb_class: &Path,
    max_time: f64,
    out: &Path,
) -> Result<(), CliError> {
    let env = load_env(env_path)?;
    let scenario = Scenario::load(scenario_path).map_err(data_err)?;
    let (kbs, classifier) = load_controller(kb_sw, kb_cx, kb_cc, kb_class)?;
    let laser = LaserConfig { n_beams: classifier.universes.n_beams, ..LaserConfig::default() };
    let report = run_tracking(
        &env,
        &scenario,
        &kbs,
        &classifier,
        &FusionConfig::default(),
        &laser,
        crate::sim::kinematics::CONTROL_PERIOD,
        max_time,
    )
    .map_err(run_err)?;
    std::fs::create_dir_all(out).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let trace_path = out.join("track.txt");
    std::fs::write(&trace_path, serialize_track_trace(&report.trace))
        .map_err(|e| data_err(format!("{}: {e}", trace_path.display())))?;
    write_manifest(
        out,
        &manifest(
            "track",
            None,
            None,
            &[env_path, scenario_path, kb_sw, kb_cx, kb_cc, kb_class],
            &[&trace_path],
        ),
    )?;
    if !report.reached {
        return Err(CliError::Run(format!(
            "target not reached within {max_time} s (trace in {})",
            trace_path.display()
        )));
    }
    println!("target reached in {:.1} s -> {}", report.time_s, trace_path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { env, counts, beams, seed, out } => {
            cmd_gen_data(&env, &counts, beams, seed, &out)
        }
        Command::Train { data, config, seed, out } => {
            cmd_train(&data, config.as_deref(), seed, &out)
        }
        Command::TrainClassifier { data, config, default_class, seed, out } => {
            cmd_train_classifier(&data, config.as_deref(), default_class, seed, &out)
        }
        Command::SelectRules { kb, data, seed, restarts, out } => {
            cmd_select_rules(&kb, &data, seed, restarts, &out)
        }
        Command::Simulate { env, kb_sw, kb_cx, kb_cc, kb_class, laps, out } => {
            cmd_simulate(&env, &kb_sw, &kb_cx, &kb_cc, &kb_class, laps, &out)
        }
        Command::QualityReport { files, out } => cmd_quality_report(&files, out.as_deref()),
        Command::Track { env, scenario, kb_sw, kb_cx, kb_cc, kb_class, max_time, out } => {
            cmd_track(&env, &scenario, &kb_sw, &kb_cx, &kb_cc, &kb_class, max_time, &out)
        }
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
