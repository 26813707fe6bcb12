//! Batch subcommands: scenario, replay and analyze.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::Context;
use uvms_core::analysis::{analyze, time_series, ErrorReport};
use uvms_core::session::{replay, InputLog, RunResult, Session, SessionConfig};
use uvms_core::sim::telemetry::{read_telemetry, TelemetryWriter};

use crate::Failure;

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SessionConfig, Failure> {
    let mut cfg = match path {
        Some(p) => SessionConfig::load(p).map_err(Failure::bad_input)?,
        None => SessionConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

pub fn load_log(path: &Path) -> Result<InputLog, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::BadInput)?;
    InputLog::parse(&text)
        .with_context(|| path.display().to_string())
        .map_err(Failure::BadInput)
}

/// Telemetry destination: explicit path, else `<out_dir>/telemetry.csv`,
/// else the config's path, else `telemetry.csv`.
pub fn telemetry_path(explicit: Option<&Path>, out_dir: Option<&Path>, cfg: &SessionConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| out_dir.map(|d| d.join("telemetry.csv")))
        .or_else(|| cfg.telemetry.clone())
        .unwrap_or_else(|| PathBuf::from("telemetry.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::Internal)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::Internal)
}

pub fn write_telemetry(path: &Path, run: &RunResult) -> Result<(), Failure> {
    let mut w = TelemetryWriter::new(create(path)?).map_err(Failure::internal)?;
    for r in &run.records {
        w.write(r).map_err(Failure::internal)?;
    }
    w.flush().map_err(Failure::internal)
}

pub fn run_log(cfg: SessionConfig, log: &InputLog) -> Result<RunResult, Failure> {
    let mut session = Session::new(cfg).map_err(Failure::bad_input)?;
    Ok(replay(&mut session, log))
}

pub struct RunSummary {
    pub telemetry: PathBuf,
    pub run: RunResult,
}

/// Headless scenario run. Returns `Failure::Flagged` (after writing the
/// telemetry) when any step raised a flag.
pub fn scenario(
    config: Option<&Path>,
    scenario: Option<&Path>,
    telemetry: Option<&Path>,
    out_dir: Option<&Path>,
    seed: Option<u64>,
) -> Result<RunSummary, Failure> {
    let cfg = load_config(config, seed)?;
    let log_path = scenario
        .map(Path::to_path_buf)
        .or_else(|| cfg.scenario.clone())
        .ok_or_else(|| Failure::BadInput(anyhow::anyhow!("no scenario file given (--scenario or `scenario` in the config)")))?;
    let log = load_log(&log_path)?;
    let out = telemetry_path(telemetry, out_dir, &cfg);
    let run = run_log(cfg, &log)?;
    write_telemetry(&out, &run)?;
    if run.flags.any() {
        return Err(Failure::Flagged(format!(
            "scenario raised flags {:?}; telemetry written to {}",
            run.flags,
            out.display()
        )));
    }
    Ok(RunSummary { telemetry: out, run })
}

pub fn replay_log(
    config: Option<&Path>,
    log: &Path,
    telemetry: Option<&Path>,
    out_dir: Option<&Path>,
    seed: Option<u64>,
) -> Result<RunSummary, Failure> {
    let cfg = load_config(config, seed)?;
    let log = load_log(log)?;
    let out = telemetry_path(telemetry, out_dir, &cfg);
    let run = run_log(cfg, &log)?;
    write_telemetry(&out, &run)?;
    Ok(RunSummary { telemetry: out, run })
}

/// Writes `report.txt`, `report.json` and per-arm time series into
/// `out_dir` and returns the report.
pub fn analyze_file(telemetry: &Path, out_dir: Option<&Path>) -> Result<ErrorReport, Failure> {
    let file = File::open(telemetry)
        .with_context(|| format!("cannot open {}", telemetry.display()))
        .map_err(Failure::BadInput)?;
    let records = read_telemetry(BufReader::new(file))
        .with_context(|| telemetry.display().to_string())
        .map_err(Failure::BadInput)?;
    let report = analyze(&records)
        .with_context(|| telemetry.display().to_string())
        .map_err(Failure::BadInput)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(Failure::Internal)?;
        let mut files = vec![
            ("report.txt".to_string(), report.to_text()),
            ("report.json".to_string(), report.to_json()),
        ];
        files.extend(time_series(&records));
        for (name, text) in files {
            let path = dir.join(&name);
            fs::write(&path, text)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::Internal)?;
        }
    }
    Ok(report)
}
