use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimation::{fit_fringe, FringeFit, ScanPoint};
use crate::events::{write_tally_csv, Tally};
use crate::model::{coincidence_probs, twofold_fisher, CoincidenceOutcome, EfficiencyBudget, PhaseSetting};
use crate::randomphase::{run_random_phase_experiment, write_table_csv, RandomPhaseSetup, RandomPhaseTrialSet};
use crate::resources::{db_below_snl, precision_report, snl, PrecisionReport, ResourceAudit};
use crate::simulator::{
    blocks_from_log, read_event_log, run_experiment, simulate_blocks, simulate_setting,
    tallies_from_log, CsvEventLog, EventSink, ExperimentConfig, PulseSampler, RoutingMode,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeRun {
    pub scan: Vec<ScanPoint>,
    /// Simulated tallies per setpoint; empty in analytic mode.
    pub tallies: Vec<Tally>,
    pub truth_pairs: Vec<u64>,
    pub fit: FringeFit,
}

/// Calibration scan and joint fringe fit, without writing anything.
pub fn calibrate(cfg: &RunConfig, sink: Option<&mut dyn EventSink>) -> Result<FringeRun> {
    let setpoints = cfg.scan.setpoints();
    if cfg.scan.analytic {
        let scan = setpoints
            .iter()
            .map(|&t| {
                Ok(ScanPoint {
                    theta_hat: t,
                    fractions: coincidence_probs(3.0 * t, cfg.source.visibility())?,
                    c_sum: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_fringe(&scan)?;
        return Ok(FringeRun {
            scan,
            tallies: Vec::new(),
            truth_pairs: Vec::new(),
            fit,
        });
    }
    let exp = ExperimentConfig {
        source: cfg.source.clone(),
        eff: cfg.efficiency.clone(),
        settings: setpoints.iter().map(|&t| PhaseSetting::from_global(t)).collect(),
        pulses_per_setting: cfg.scan.pulses_per_point,
        seed: cfg.seed,
        chunk_size: cfg.scan.chunk_size,
        routing: RoutingMode::Phase,
    };
    let out = run_experiment(&exp, sink)?;
    let scan = setpoints
        .iter()
        .zip(&out.tallies)
        .map(|(&t, tally)| ScanPoint::from_tally(t, tally))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_fringe(&scan)?;
    Ok(FringeRun {
        scan,
        tallies: out.tallies,
        truth_pairs: out.truth_pairs,
        fit,
    })
}

fn write_fringe_outputs(out: &Path, run: &FringeRun) -> Result<Vec<String>> {
    let mut header = vec!["setting_index", "theta_hat", "c_sum"];
    header.extend(CoincidenceOutcome::ALL.map(|o| o.name()));
    let fit_cols: Vec<String> = CoincidenceOutcome::ALL
        .iter()
        .map(|o| format!("fit_{}", o.name()))
        .collect();
    header.extend(fit_cols.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = run
        .scan
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![
                i.to_string(),
                p.theta_hat.to_string(),
                p.c_sum.map(|c| c.to_string()).unwrap_or_default(),
            ];
            r.extend(p.fractions.iter().map(f64::to_string));
            r.extend(run.fit.fractions(p.theta_hat).iter().map(f64::to_string));
            r
        })
        .collect();
    write_csv(&out.join("fringe_scan.csv"), &header, &rows)?;
    write_json(&out.join("fringe_fit.json"), &run.fit)?;
    let mut files = vec!["fringe_scan.csv".to_string(), "fringe_fit.json".to_string()];
    if !run.tallies.is_empty() {
        write_tally_csv(create(&out.join("tally.csv"))?, &run.tallies)?;
        files.push("tally.csv".into());
    }
    Ok(files)
}

/// Fringe scan: `fringe_scan.csv`, `fringe_fit.json`, `tally.csv`, and
/// `events.csv` when `log_events` is set.
pub fn cmd_fringe(cfg: &RunConfig, out: &Path, log_events: bool) -> Result<(FringeRun, Vec<String>)> {
    let mut files = Vec::new();
    let run = if log_events && !cfg.scan.analytic {
        let path = out.join("events.csv");
        let mut log = CsvEventLog::new(create(&path)?);
        let run = calibrate(cfg, Some(&mut log))?;
        log.finish()?.flush().map_err(|e| Error::io(&path, e))?;
        files.push("events.csv".to_string());
        run
    } else {
        calibrate(cfg, None)?
    };
    files.extend(write_fringe_outputs(out, &run)?);
    Ok((run, files))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRun {
    pub calibration: FringeFit,
    pub reports: Vec<PrecisionReport>,
    /// Largest block-route dB below the SNL over the setpoints.
    pub peak_db_below_snl: f64,
}

/// Calibrate, then simulate `s` blocks of `k_bar` events at every block setpoint.
pub fn run_precision(cfg: &RunConfig) -> Result<PrecisionRun> {
    let cal = calibrate(cfg, None)?;
    let mut reports = Vec::new();
    for (j, &t) in cfg.blocks.setpoints().iter().enumerate() {
        let sampler = PulseSampler::phase(&cfg.source, &cfg.efficiency, 3.0 * t)?;
        let blocks = simulate_blocks(&sampler, cfg.blocks.k_bar, cfg.blocks.s, cfg.seed, j)?;
        let (report, _) = precision_report(
            &blocks,
            &cal.fit,
            cfg.mle,
            &cfg.source,
            &cfg.efficiency,
            t,
            cfg.blocks.k_bar,
        )?;
        reports.push(report);
    }
    let peak = reports
        .iter()
        .map(|r| r.db_below_snl)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PrecisionRun {
        calibration: cal.fit,
        reports,
        peak_db_below_snl: peak,
    })
}

const PRECISION_HEADER: [&str; 12] = [
    "setting_index",
    "theta_truth",
    "theta_hat",
    "delta_hat",
    "delta_err",
    "n",
    "snl",
    "hl",
    "db_below_snl",
    "delta_fisher",
    "db_below_snl_fisher",
    "boundary_blocks",
];

fn precision_rows(reports: &[PrecisionReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.setting_index.to_string(),
                r.theta_truth.to_string(),
                r.theta_hat.to_string(),
                r.delta_hat.to_string(),
                r.delta_err.to_string(),
                r.n.to_string(),
                r.snl.to_string(),
                r.hl.to_string(),
                r.db_below_snl.to_string(),
                opt(r.delta_fisher),
                opt(r.db_below_snl_fisher),
                r.boundary_blocks.to_string(),
            ]
        })
        .collect()
}

/// Precision scan: `precision.csv`, `precision.json`, `fringe_fit.json`.
pub fn cmd_precision(cfg: &RunConfig, out: &Path) -> Result<(PrecisionRun, Vec<String>)> {
    let run = run_precision(cfg)?;
    write_csv(&out.join("precision.csv"), &PRECISION_HEADER, &precision_rows(&run.reports))?;
    write_json(&out.join("precision.json"), &run)?;
    write_json(&out.join("fringe_fit.json"), &run.calibration)?;
    Ok((
        run,
        vec!["precision.csv".into(), "precision.json".into(), "fringe_fit.json".into()],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub eta: f64,
    pub c_sum: u64,
    /// Audited resources of the run.
    pub n: f64,
    /// Twofold Fisher information per informative event.
    pub fisher: f64,
    /// `1 / sqrt(C_sum F)`.
    pub delta_fisher: f64,
    pub snl: f64,
    pub db_below_snl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRun {
    pub points: Vec<ThresholdPoint>,
    /// Zero of the least-squares line `dB = a + b log10(eta)`.
    pub crossing: Option<f64>,
    pub slope_db_per_decade: Option<f64>,
}

/// Zero of `dB = a + b log10(eta)` fitted by least squares.
pub fn locate_crossing(points: &[ThresholdPoint]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.eta.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.db_below_snl).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (x - mx) * (p.db_below_snl - my))
        .sum();
    if sxx == 0.0 || sxy == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    Some((10f64.powf(-a / b), b))
}

/// Sweep a uniform efficiency and compare the information-limited precision
/// `1 / sqrt(C_sum F)` against the audited SNL at each point.
pub fn run_threshold_scan(cfg: &RunConfig) -> Result<ThresholdRun> {
    let t = cfg
        .threshold
        .as_ref()
        .ok_or_else(|| Error::Config("missing `threshold` section".into()))?;
    let u = 3.0 * t.theta_hat;
    let mut points = Vec::new();
    for (i, eta) in t.etas().into_iter().enumerate() {
        let eff = EfficiencyBudget::uniform(eta)?;
        let sampler = PulseSampler::phase(&cfg.source, &eff, u)?;
        let (tally, _) = simulate_setting(&sampler, t.pulses_per_point, t.chunk_size, cfg.seed, i)?;
        let c_sum = tally.c_sum();
        if c_sum == 0 {
            return Err(Error::EmptyStatistics(format!(
                "threshold point eta = {eta} recorded no informative events"
            )));
        }
        let audit = ResourceAudit::from_tally(&tally, &eff, cfg.source.mu())?;
        let fisher = twofold_fisher(&cfg.source, &eff, u)?;
        let delta = 1.0 / (c_sum as f64 * fisher).sqrt();
        let snl = snl(audit.n)?;
        points.push(ThresholdPoint {
            eta,
            c_sum,
            n: audit.n,
            fisher,
            delta_fisher: delta,
            snl,
            db_below_snl: db_below_snl(delta, snl)?,
        });
    }
    let line = locate_crossing(&points);
    Ok(ThresholdRun {
        points,
        crossing: line.map(|l| l.0),
        slope_db_per_decade: line.map(|l| l.1),
    })
}

/// Threshold scan: `threshold_scan.csv`, `threshold_scan.json`.
pub fn cmd_threshold_scan(cfg: &RunConfig, out: &Path) -> Result<(ThresholdRun, Vec<String>)> {
    let run = run_threshold_scan(cfg)?;
    let rows: Vec<Vec<String>> = run
        .points
        .iter()
        .map(|p| {
            vec![
                p.eta.to_string(),
                p.c_sum.to_string(),
                p.n.to_string(),
                p.fisher.to_string(),
                p.delta_fisher.to_string(),
                p.snl.to_string(),
                p.db_below_snl.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("threshold_scan.csv"),
        &["eta", "c_sum", "n", "fisher", "delta_fisher", "snl", "db_below_snl"],
        &rows,
    )?;
    write_json(&out.join("threshold_scan.json"), &run)?;
    Ok((run, vec!["threshold_scan.csv".into(), "threshold_scan.json".into()]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPhaseRun {
    pub calibration: FringeFit,
    pub trials: RandomPhaseTrialSet,
}

pub fn run_random_phase(cfg: &RunConfig) -> Result<RandomPhaseRun> {
    let r = cfg
        .random_phase
        .as_ref()
        .ok_or_else(|| Error::Config("missing `random_phase` section".into()))?;
    let cal = calibrate(cfg, None)?;
    let setup = RandomPhaseSetup {
        source: &cfg.source,
        eff: &cfg.efficiency,
        num_phases: r.num_phases,
        k_bar: r.k_bar,
        s: r.s,
        seed: cfg.seed,
        options: cfg.mle,
    };
    let trials = run_random_phase_experiment(&setup, &cal.fit)?;
    Ok(RandomPhaseRun {
        calibration: cal.fit,
        trials,
    })
}

/// Random-phase run: `random_phase.csv` (index, estimate, stddev, stddev_err) and `random_phase.json`.
pub fn cmd_random_phase(cfg: &RunConfig, out: &Path) -> Result<(RandomPhaseRun, Vec<String>)> {
    let run = run_random_phase(cfg)?;
    let path = out.join("random_phase.csv");
    let mut w = create(&path)?;
    write_table_csv(&mut w, &run.trials)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    let mut doc = run.clone();
    for t in &mut doc.trials.trials {
        t.stats.estimates.clear();
    }
    write_json(&out.join("random_phase.json"), &doc)?;
    Ok((run, vec!["random_phase.csv".into(), "random_phase.json".into()]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingAudit {
    pub setting_index: usize,
    pub audit: ResourceAudit,
    /// Photon passes recorded in the log's truth column.
    pub truth_photon_passes: u64,
    /// `n / truth - 1`; absent when the log carries no truth.
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub tallies: Vec<Tally>,
    pub settings: Vec<SettingAudit>,
    pub calibration: Option<FringeFit>,
    pub reports: Vec<PrecisionReport>,
    /// Settings without a precision report and why.
    pub skipped: Vec<(usize, String)>,
}

/// Recompute tallies, resources and precision from an event log.
///
/// Settings are matched to the calibration scan setpoints of `cfg` by index.
/// Each setting's pulse sequence is split into blocks of `blocks.k_bar`
/// informative events.
pub fn run_audit(cfg: &RunConfig, events: &Path) -> Result<AuditRun> {
    let file = File::open(events).map_err(|e| Error::io(events, e))?;
    let records = read_event_log(BufReader::new(file))?;
    let (tallies, pairs) = tallies_from_log(&records)?;
    let per_pair = u64::from(crate::model::PASS_COUNTS.0 + crate::model::PASS_COUNTS.1);
    let settings = tallies
        .iter()
        .zip(&pairs)
        .map(|(t, &p)| {
            let audit = ResourceAudit::from_tally(t, &cfg.efficiency, cfg.source.mu())?;
            let truth = p * per_pair;
            Ok(SettingAudit {
                setting_index: t.setting_index,
                relative_error: (truth > 0).then(|| audit.n / truth as f64 - 1.0),
                truth_photon_passes: truth,
                audit,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let setpoints = cfg.scan.setpoints();
    let mut skipped = Vec::new();
    let mut reports = Vec::new();
    let calibration = if tallies.len() == setpoints.len() {
        let scan = setpoints
            .iter()
            .zip(&tallies)
            .map(|(&t, tally)| ScanPoint::from_tally(t, tally))
            .collect::<Result<Vec<_>>>()?;
        Some(fit_fringe(&scan)?)
    } else {
        skipped.extend((0..tallies.len()).map(|s| {
            (
                s,
                format!(
                    "log has {} settings but the scan defines {}",
                    tallies.len(),
                    setpoints.len()
                ),
            )
        }));
        None
    };
    if let Some(cal) = &calibration {
        let blocks = blocks_from_log(&records, cfg.blocks.k_bar)?;
        for (s, b) in blocks.iter().enumerate() {
            if b.len() < 2 {
                skipped.push((s, format!("{} complete blocks, need 2", b.len())));
                continue;
            }
            match precision_report(
                b,
                cal,
                cfg.mle,
                &cfg.source,
                &cfg.efficiency,
                setpoints[s],
                cfg.blocks.k_bar,
            ) {
                Ok((r, _)) => reports.push(r),
                Err(e) => skipped.push((s, e.to_string())),
            }
        }
    }
    Ok(AuditRun {
        tallies,
        settings,
        calibration,
        reports,
        skipped,
    })
}

/// Audit: `tally.csv`, `audit.csv`, `audit.json`, and `precision.csv` when reports exist.
pub fn cmd_audit(cfg: &RunConfig, events: &Path, out: &Path) -> Result<(AuditRun, Vec<String>)> {
    let run = run_audit(cfg, events)?;
    write_tally_csv(create(&out.join("tally.csv"))?, &run.tallies)?;
    let rows: Vec<Vec<String>> = run
        .settings
        .iter()
        .map(|s| {
            let mut r = vec![s.setting_index.to_string()];
            r.extend(s.audit.recorded.iter().map(u64::to_string));
            r.extend(s.audit.actual.iter().map(f64::to_string));
            r.push(s.audit.n.to_string());
            r.push(s.truth_photon_passes.to_string());
            r.push(opt(s.relative_error));
            r
        })
        .collect();
    write_csv(
        &out.join("audit.csv"),
        &[
            "setting_index",
            "N_A1",
            "N_A2",
            "N_B1",
            "N_B2",
            "N_tilde_A1",
            "N_tilde_A2",
            "N_tilde_B1",
            "N_tilde_B2",
            "n",
            "truth_photon_passes",
            "relative_error",
        ],
        &rows,
    )?;
    write_json(&out.join("audit.json"), &run)?;
    let mut files = vec!["tally.csv".to_string(), "audit.csv".into(), "audit.json".into()];
    if !run.reports.is_empty() {
        write_csv(&out.join("precision.csv"), &PRECISION_HEADER, &precision_rows(&run.reports))?;
        files.push("precision.csv".into());
    }
    Ok((run, files))
}
