//! Batch runner and report rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct_method::{
    closest_uep_assessment, screen_contingency, ClosestUepAssessment, ClosestVerdict, DirectVerdict, NeedsTdsReason,
    ScreeningOptions, ScreeningVerdict,
};
use crate::dynamics::{simulate_switching, TdsVerdict};
use crate::network::{parse_case, parse_contingencies, CaseData, SwitchingEvent};
use crate::powerflow::PowerFlowOptions;
use crate::study::Study;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    ClosestUep,
    Tds,
    All,
}

impl Method {
    fn runs_proposed(&self) -> bool {
        matches!(self, Method::Proposed | Method::All)
    }

    fn runs_closest(&self) -> bool {
        matches!(self, Method::ClosestUep | Method::All)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case_path: PathBuf,
    pub contingency_path: PathBuf,
    pub method: Method,
    pub power_flow: PowerFlowOptions,
    pub screening: ScreeningOptions,
    /// Overrides the active demand of every load bus, MW.
    pub load_p_mw: Option<f64>,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(case_path: impl Into<PathBuf>, contingency_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            case_path: case_path.into(),
            contingency_path: contingency_path.into(),
            method: Method::All,
            power_flow: PowerFlowOptions::default(),
            screening: ScreeningOptions::default(),
            load_p_mw: None,
            format: OutputFormat::Table,
            output: None,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.screening;
        let positive = [
            ("pf tolerance", self.power_flow.tolerance),
            ("fault dt", s.fault_dt),
            ("dt", s.tds.dt),
            ("equilibrium tolerance", s.equilibrium.tolerance),
            ("boundary eps", s.boundary.eps),
        ];
        for (name, v) in positive {
            anyhow::ensure!(v > 0.0, "{name} must be positive, got {v}");
        }
        let horizons = [
            ("fault window", s.fault_t_max),
            ("horizon", s.tds.horizon),
            ("boundary horizon", s.boundary.horizon),
        ];
        for (name, v) in horizons {
            anyhow::ensure!(v >= 1.0, "{name} must be at least 1 s, got {v}");
        }
        anyhow::ensure!(s.tds.damping_ratio >= 0.0, "damping ratio must be non-negative");
        anyhow::ensure!(self.jobs != Some(0), "jobs must be positive");
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalVerdict {
    Stable,
    Unstable,
    NeedsTds,
}

impl FinalVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            FinalVerdict::Stable => "Stable",
            FinalVerdict::Unstable => "Unstable",
            FinalVerdict::NeedsTds => "NeedsTDS",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyReport {
    /// 1-based position in the contingency file.
    pub id: usize,
    pub event: SwitchingEvent,
    pub tds: Option<TdsVerdict>,
    /// Why the simulation could not run, when it was attempted and failed.
    pub tds_failure: Option<String>,
    pub closest_uep: Option<ClosestUepAssessment>,
    pub proposed: Option<ScreeningVerdict>,
    pub final_verdict: FinalVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub case: String,
    pub method: Method,
    pub seed: u64,
    pub load_p_mw: Option<f64>,
    pub power_flow: PowerFlowOptions,
    pub screening: ScreeningOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: ReportHeader,
    pub contingencies: Vec<ContingencyReport>,
}

impl Report {
    /// Nonzero iff some final verdict is Unstable.
    pub fn exit_code(&self) -> i32 {
        if self.contingencies.iter().any(|c| c.final_verdict == FinalVerdict::Unstable) {
            1
        } else {
            0
        }
    }
}

pub fn read_case(path: &Path, load_p_mw: Option<f64>) -> Result<CaseData> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading case file {}", path.display()))?;
    let case = parse_case(&text).with_context(|| format!("parsing case file {}", path.display()))?;
    Ok(match load_p_mw {
        Some(p) => case.with_uniform_load_p(p),
        None => case,
    })
}

pub fn read_contingencies(path: &Path) -> Result<Vec<SwitchingEvent>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading contingency file {}", path.display()))?;
    parse_contingencies(&text).with_context(|| format!("parsing contingency file {}", path.display()))
}

fn final_verdict(
    method: Method,
    tds: Option<&TdsVerdict>,
    closest: Option<&ClosestUepAssessment>,
    proposed: Option<&ScreeningVerdict>,
    fallback: bool,
) -> FinalVerdict {
    let from_tds = |t: Option<&TdsVerdict>| match t {
        Some(v) if v.is_stable() => FinalVerdict::Stable,
        Some(_) => FinalVerdict::Unstable,
        None => FinalVerdict::NeedsTds,
    };
    match method {
        Method::Tds => from_tds(tds),
        Method::Proposed | Method::All => {
            let p = proposed.expect("proposed method ran");
            match &p.verdict {
                DirectVerdict::Stable => FinalVerdict::Stable,
                DirectVerdict::NeedsTds {
                    reason: NeedsTdsReason::Islanding { .. },
                } => FinalVerdict::Unstable,
                DirectVerdict::NeedsTds { .. } if fallback => from_tds(tds),
                DirectVerdict::NeedsTds { .. } => FinalVerdict::NeedsTds,
            }
        }
        Method::ClosestUep => {
            let c = closest.expect("closest-UEP method ran");
            match &c.verdict {
                ClosestVerdict::Stable => FinalVerdict::Stable,
                _ if fallback => from_tds(tds),
                _ => FinalVerdict::NeedsTds,
            }
        }
    }
}

/// Evaluates one contingency with every method the configuration asks for.
pub fn evaluate_contingency(
    study: &Study,
    id: usize,
    event: &SwitchingEvent,
    method: Method,
    options: &ScreeningOptions,
) -> ContingencyReport {
    let proposed = method.runs_proposed().then(|| screen_contingency(study, event, options));
    let closest = method.runs_closest().then(|| closest_uep_assessment(study, event, id - 1, options));
    let needs_tds = match method {
        Method::Tds | Method::All => true,
        Method::Proposed => options.tds_fallback && !proposed.as_ref().is_some_and(|p| p.verdict.is_stable()),
        Method::ClosestUep => options.tds_fallback && !closest.as_ref().is_some_and(|c| c.verdict.is_stable()),
    };
    let mut tds_failure = None;
    let mut islanded = false;
    let tds = match proposed.as_ref().and_then(|p| p.tds) {
        Some(v) => Some(v),
        None if needs_tds => match simulate_switching(study, event, &options.tds) {
            Ok((_, v)) => Some(v),
            Err(e) => {
                islanded = e.is_islanding();
                tds_failure = Some(e.to_string());
                None
            }
        },
        None => None,
    };
    let final_verdict = if islanded {
        FinalVerdict::Unstable
    } else {
        final_verdict(method, tds.as_ref(), closest.as_ref(), proposed.as_ref(), options.tds_fallback)
    };
    log::debug!("contingency {id} ({event}): {}", final_verdict.label());
    ContingencyReport {
        id,
        event: *event,
        tds,
        tds_failure,
        closest_uep: closest,
        proposed,
        final_verdict,
    }
}

/// Screens every event of the list against `case`; rows follow input order.
pub fn run_study(case: CaseData, events: &[SwitchingEvent], config: &RunConfig) -> Result<Report> {
    let header = ReportHeader {
        case: case.name.clone(),
        method: config.method,
        seed: config.screening.seed,
        load_p_mw: config.load_p_mw,
        power_flow: config.power_flow,
        screening: config.screening,
    };
    if events.is_empty() {
        return Ok(Report {
            header,
            contingencies: Vec::new(),
        });
    }
    let study = Study::new(case, &config.power_flow).context("pre-switching operating point")?;
    log::info!(
        "{}: power flow converged in {} iterations, screening {} events",
        study.case.name,
        study.power_flow.iterations,
        events.len()
    );
    let work = || {
        events
            .par_iter()
            .enumerate()
            .map(|(i, e)| evaluate_contingency(&study, i + 1, e, config.method, &config.screening))
            .collect::<Vec<_>>()
    };
    let contingencies = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    };
    Ok(Report { header, contingencies })
}

/// Reads inputs, screens, renders, and writes the output if a path is set.
pub fn run(config: &RunConfig) -> Result<(Report, String)> {
    config.validate()?;
    let case = read_case(&config.case_path, config.load_p_mw)?;
    let events = read_contingencies(&config.contingency_path)?;
    let report = run_study(case, &events, config)?;
    let text = render(&report, config.format)?;
    if let Some(path) = &config.output {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok((report, text))
}

fn fmt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn tds_label(t: Option<&TdsVerdict>) -> String {
    match t {
        None => "-".into(),
        Some(TdsVerdict::Stable) => "Stable".into(),
        Some(TdsVerdict::Unstable { t_loss }) => format!("Unstable@{t_loss:.3}s"),
    }
}

fn closest_label(c: Option<&ClosestUepAssessment>) -> String {
    match c.map(|c| &c.verdict) {
        None => "-".into(),
        Some(ClosestVerdict::Stable) => "Stable".into(),
        Some(ClosestVerdict::NegativeMargin) => "Unstable".into(),
        Some(ClosestVerdict::Unavailable { .. }) => "n/a".into(),
    }
}

fn proposed_label(p: Option<&ScreeningVerdict>) -> String {
    match p.map(|p| &p.verdict) {
        None => "-".into(),
        Some(DirectVerdict::Stable) => "Stable".into(),
        Some(DirectVerdict::NeedsTds { .. }) => "NeedsTDS".into(),
    }
}

fn reasons(c: &ContingencyReport) -> String {
    let mut parts = Vec::new();
    if let Some(r) = c.proposed.as_ref().and_then(|p| p.verdict.reason()) {
        parts.push(r.describe());
    }
    if let Some(ClosestVerdict::Unavailable { reason }) = c.closest_uep.as_ref().map(|c| &c.verdict) {
        parts.push(format!("closest-UEP: {reason}"));
    }
    if let Some(f) = &c.tds_failure {
        parts.push(format!("TDS: {f}"));
    }
    parts.join("; ")
}

struct Row {
    cells: Vec<String>,
}

const COLUMNS: [&str; 10] = [
    "id",
    "contingency",
    "tds",
    "closest_uep",
    "closest_margin",
    "proposed",
    "proposed_margin",
    "step",
    "final",
    "reasons",
];

fn rows(report: &Report) -> Vec<Row> {
    report
        .contingencies
        .iter()
        .map(|c| Row {
            cells: vec![
                c.id.to_string(),
                c.event.to_string(),
                tds_label(c.tds.as_ref()),
                closest_label(c.closest_uep.as_ref()),
                fmt4(c.closest_uep.as_ref().and_then(|a| a.margin)),
                proposed_label(c.proposed.as_ref()),
                fmt4(c.proposed.as_ref().and_then(|p| p.margin)),
                c.proposed
                    .as_ref()
                    .map(|p| p.terminated_at.number().to_string())
                    .unwrap_or_else(|| "-".into()),
                c.final_verdict.label().into(),
                reasons(c),
            ],
        })
        .collect()
}

pub fn render(report: &Report, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for row in rows(report) {
                w.write_record(&row.cells)?;
            }
            Ok(String::from_utf8(w.into_inner()?)?)
        }
        OutputFormat::Table => {
            let rows = rows(report);
            let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.chars().count()).collect();
            for r in &rows {
                for (w, cell) in widths.iter_mut().zip(&r.cells) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let mut out = String::new();
            let h = &report.header;
            writeln!(
                out,
                "case: {}  method: {:?}  seed: {}  load override: {}",
                h.case,
                h.method,
                h.seed,
                h.load_p_mw.map(|p| format!("{p} MW")).unwrap_or_else(|| "none".into())
            )?;
            let line = |cells: Vec<String>, out: &mut String| -> std::fmt::Result {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}", w = *w))
                    .collect();
                writeln!(out, "{}", padded.join("  ").trim_end())
            };
            line(COLUMNS.iter().map(|s| s.to_string()).collect(), &mut out)?;
            line(widths.iter().map(|w| "-".repeat(*w)).collect(), &mut out)?;
            for r in rows {
                line(r.cells, &mut out)?;
            }
            Ok(out)
        }
    }
}
