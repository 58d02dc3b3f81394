use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use duplex_qkd::bb84::run_bb84_with;
use duplex_qkd::duplex::{
    process_transcript, DuplexConfig, DuplexSession, FailurePolicy, Transcript, Triple,
};
use duplex_qkd::record::UniformDraws;
use duplex_qkd::rng::session_rng;
use duplex_qkd::stats::{
    compare_protocols, Aggregate, ComparisonTable, SessionReport, SweepCell, SweepResult, Table,
};
use duplex_qkd::Bit;

use crate::config::{EveArg, ProtocolArg, RunConfig, SweepConfig, VariantArg};

/// Per-session report tagged with the session index its seed stream uses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexedReport {
    pub session: u32,
    #[serde(flatten)]
    pub report: SessionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub aggregate: Aggregate,
    pub sessions: Vec<IndexedReport>,
}

/// Runs one session of `config` on seed stream `(cell, session)`.
pub fn run_session(config: &RunConfig, cell: u32, session: u32) -> Result<SessionReport> {
    let mut rng = session_rng(config.seed, cell, session);
    Ok(match config.protocol {
        ProtocolArg::Duplex => {
            let cfg = config.duplex_config()?;
            let s = duplex_qkd::duplex::run_duplex_session(&cfg, &mut UniformDraws, &mut rng)?;
            SessionReport::from_duplex(&s)
        }
        ProtocolArg::Bb84 => {
            let cfg = config.bb84_config()?;
            SessionReport::from_bb84(&run_bb84_with(&cfg, &mut rng)?)
        }
    })
}

/// Runs the listed sessions on the current rayon pool; output keeps the
/// order of `indices`.
pub fn run_sessions(config: &RunConfig, cell: u32, indices: &[u32]) -> Result<Vec<IndexedReport>> {
    indices
        .par_iter()
        .map(|&k| run_session(config, cell, k).map(|report| IndexedReport { session: k, report }))
        .collect()
}

pub fn cmd_run(config: &RunConfig, only_session: Option<u32>) -> Result<RunReport> {
    config.validate()?;
    let indices: Vec<u32> = match only_session {
        Some(k) => vec![k],
        None => (0..config.sessions).collect(),
    };
    let sessions = run_sessions(config, 0, &indices)?;
    let reports: Vec<SessionReport> = sessions.iter().map(|s| s.report.clone()).collect();
    Ok(RunReport {
        config: config.clone(),
        aggregate: Aggregate::from_reports(&reports)?,
        sessions,
    })
}

pub fn sessions_table(sessions: &[IndexedReport]) -> Table {
    let headers = [
        "session",
        "protocol",
        "n_timeslots",
        "sifted",
        "paired",
        "unpaired",
        "sampled",
        "checked",
        "failures",
        "estimated_error_rate",
        "true_error_rate",
        "key_length",
        "keys_agree",
        "eve_pair_bits_revealed",
        "detected",
    ]
    .map(String::from)
    .to_vec();
    let rows = sessions
        .iter()
        .map(|s| {
            let r = &s.report;
            vec![
                s.session.to_string(),
                r.protocol.name().to_string(),
                r.n_timeslots.to_string(),
                r.sifted.to_string(),
                r.paired.to_string(),
                r.unpaired.to_string(),
                r.sampled.to_string(),
                r.checked.to_string(),
                r.failures.to_string(),
                format!("{:.6}", r.estimated_error_rate),
                format!("{:.6}", r.true_error_rate),
                r.key_length.to_string(),
                r.keys_agree.to_string(),
                r.eve_pair_bits_revealed.to_string(),
                r.detected.to_string(),
            ]
        })
        .collect();
    Table { headers, rows }
}

pub fn aggregate_table(aggregates: &[&Aggregate]) -> Table {
    let headers = [
        "protocol",
        "sessions",
        "detection_rate",
        "detection_half_width",
        "mean_error_rate",
        "error_rate_half_width",
        "mean_key_rate",
        "key_rate_half_width",
        "mean_key_length",
        "total_checked",
        "total_failures",
        "check_failure_rate",
    ]
    .map(String::from)
    .to_vec();
    let rows = aggregates
        .iter()
        .map(|a| {
            vec![
                a.protocol.name().to_string(),
                a.sessions.to_string(),
                format!("{:.6}", a.detection_rate.mean),
                format!("{:.6}", a.detection_rate.half_width),
                format!("{:.6}", a.error_rate.mean),
                format!("{:.6}", a.error_rate.half_width),
                format!("{:.6}", a.key_rate.mean),
                format!("{:.6}", a.key_rate.half_width),
                format!("{:.6}", a.mean_key_length),
                a.total_checked.to_string(),
                a.total_failures.to_string(),
                format!("{:.6}", a.check_failure_rate),
            ]
        })
        .collect();
    Table { headers, rows }
}

/// Writes `table` with the csv crate using `delimiter`.
pub fn render_table(table: &Table, delimiter: u8) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(Vec::new());
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().context("flushing table")?;
    Ok(String::from_utf8(bytes)?)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report.json`, `sessions.csv` and `aggregate.csv` into `dir`.
pub fn write_run_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("report.json"), to_json(report)?)?;
    std::fs::write(
        dir.join("sessions.csv"),
        render_table(&sessions_table(&report.sessions), b',')?,
    )?;
    std::fs::write(
        dir.join("aggregate.csv"),
        render_table(&aggregate_table(&[&report.aggregate]), b',')?,
    )?;
    Ok(())
}

/// Structured result of replaying a fixed transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub timeslots: usize,
    pub variant: VariantArg,
    pub flip_convention: String,
    pub discard: Vec<u64>,
    pub set2: Vec<u64>,
    pub set3: Vec<u64>,
    /// Triples as published, later timeslot first.
    pub triples: Vec<(u64, u64, u8)>,
    pub unpaired: Vec<u64>,
    pub checked_pairs: usize,
    pub failures: Vec<(u64, u64, u8)>,
    pub pass: bool,
    pub aborted: bool,
    pub alice_key: Vec<u8>,
    pub bob_key: Vec<u8>,
    pub keys_agree: bool,
}

fn bits(v: &[Bit]) -> Vec<u8> {
    v.iter().map(|b| b.as_u8()).collect()
}

fn listed(v: &[Triple]) -> Vec<(u64, u64, u8)> {
    v.iter().map(Triple::listed).collect()
}

impl ReplayReport {
    fn from_session(s: &DuplexSession, variant: VariantArg) -> Self {
        Self {
            timeslots: s.transcript.len(),
            variant,
            flip_convention: format!("{:?}", s.flip_convention),
            discard: s.partition.discard.iter().map(|t| t.0).collect(),
            set2: s.partition.set2.iter().map(|t| t.0).collect(),
            set3: s.partition.set3.iter().map(|t| t.0).collect(),
            triples: listed(&s.triples),
            unpaired: s.unpaired.iter().map(|t| t.0).collect(),
            checked_pairs: s.verification.checked_pairs,
            failures: listed(&s.verification.failures),
            pass: s.verification.pass,
            aborted: s.aborted,
            alice_key: bits(&s.alice_key),
            bob_key: bits(&s.bob_key),
            keys_agree: s.keys_agree(),
        }
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        let triples = |v: &[(u64, u64, u8)]| {
            v.iter()
                .map(|(a, b, f)| format!("({a},{b},{f})"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let key = |v: &[u8]| v.iter().map(u8::to_string).collect::<String>();
        let mut out = String::new();
        let _ = writeln!(out, "timeslots: {}", self.timeslots);
        let _ = writeln!(out, "discard: {}", join(&self.discard));
        let _ = writeln!(out, "set2: {}", join(&self.set2));
        let _ = writeln!(out, "set3: {}", join(&self.set3));
        let _ = writeln!(out, "triples: {}", triples(&self.triples));
        let _ = writeln!(out, "unpaired: {}", join(&self.unpaired));
        let _ = writeln!(
            out,
            "verification: {} checked, {} failed, {}",
            self.checked_pairs,
            self.failures.len(),
            if self.pass { "pass" } else { "FAIL" }
        );
        if !self.failures.is_empty() {
            let _ = writeln!(out, "failing: {}", triples(&self.failures));
        }
        let _ = writeln!(out, "alice key: {}", key(&self.alice_key));
        let _ = writeln!(out, "bob key: {}", key(&self.bob_key));
        out
    }
}

pub fn replay_text(
    text: &str,
    variant: VariantArg,
    failure_policy: FailurePolicy,
) -> Result<ReplayReport> {
    let transcript: Transcript = text.parse()?;
    let cfg = DuplexConfig {
        variant: variant.into(),
        failure_policy,
        ..DuplexConfig::new(transcript.len())
    };
    let session = process_transcript(transcript, Vec::new(), &cfg)?;
    Ok(ReplayReport::from_session(&session, variant))
}

pub fn cmd_replay(
    path: &Path,
    variant: VariantArg,
    failure_policy: FailurePolicy,
) -> Result<ReplayReport> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading transcript {}", path.display()))?;
    replay_text(&text, variant, failure_policy)
        .with_context(|| format!("replaying {}", path.display()))
}

pub fn cmd_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let points = config.grid.points()?;
    let mut cells = Vec::with_capacity(points.len());
    for (c, point) in points.into_iter().enumerate() {
        let mut run = config.base.clone();
        run.eve = if point.intercept_fraction > 0.0 {
            EveArg::InterceptResend
        } else {
            EveArg::Absent
        };
        run.intercept_fraction = point.intercept_fraction;
        run.flip = point.flip_probability;
        run.loss = point.loss_probability;
        run.n_timeslots = point.n_timeslots;
        let indices: Vec<u32> = (0..run.sessions).collect();
        let reports: Vec<SessionReport> = run_sessions(&run, c as u32, &indices)?
            .into_iter()
            .map(|s| s.report)
            .collect();
        cells.push(SweepCell {
            point,
            aggregate: Aggregate::from_reports(&reports)?,
        });
    }
    Ok(SweepResult {
        protocol: config.base.protocol.into(),
        cells,
    })
}

/// Runs the same settings under both protocols and tabulates them side by side.
pub fn cmd_compare(config: &RunConfig) -> Result<ComparisonTable> {
    let mut duplex = config.clone();
    duplex.protocol = ProtocolArg::Duplex;
    let mut bb84 = config.clone();
    bb84.protocol = ProtocolArg::Bb84;
    duplex.validate()?;
    bb84.validate()?;
    let indices: Vec<u32> = (0..config.sessions).collect();
    let d: Vec<_> = run_sessions(&duplex, 0, &indices)?
        .into_iter()
        .map(|s| s.report)
        .collect();
    let b: Vec<_> = run_sessions(&bb84, 1, &indices)?
        .into_iter()
        .map(|s| s.report)
        .collect();
    Ok(compare_protocols(&d, &b)?)
}
