//! The stages run against a snapshot directory: instrument, discover,
//! eliminate and promote.
//!
//! Stage outputs kept next to the manifest:
//!
//! ```text
//! discovery.json   tree, used set, trigger log
//! report.json      elimination report
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::{discover, DiscoverError, DiscoveryConfig, DiscoveryResult};
use crate::cache::{promote, serve, write_atomic, CacheError, PageSnapshot, ResourceKind, Variant};
use crate::driver::{cdp_load, sim_load, CdpConfig, DriverError, PageSession, ScriptValidationError, SimPageScript};
use crate::events::events_from_listeners;
use crate::js::{
    eliminate, inline_script_ranges, instrument, scan_source, FunctionSpan, UsedSet, DEFAULT_PROBE_TOKEN,
};
use crate::report::{EliminationReport, FileReport, SkippedFile, StageDurations};

pub const DISCOVERY_FILE: &str = "discovery.json";
pub const REPORT_FILE: &str = "report.json";
/// Looked up in the snapshot directory when no script is configured.
pub const SIM_SCRIPT_FILE: &str = "sim.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// The scripted page model; needs a page script.
    Sim,
    /// A browser reached over the DevTools protocol.
    Cdp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub backend: Backend,
    pub probe_token: String,
    pub settle_ms: u64,
    pub max_triggers: usize,
    /// Pages processed at once; 0 uses one per core.
    pub workers: usize,
    pub sim_script: Option<PathBuf>,
    pub cdp_endpoint: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let d = DiscoveryConfig::default();
        PipelineConfig {
            backend: Backend::Sim,
            probe_token: DEFAULT_PROBE_TOKEN.to_string(),
            settle_ms: 0,
            max_triggers: d.max_triggers,
            workers: 0,
            sim_script: None,
            cdp_endpoint: None,
        }
    }
}

impl PipelineConfig {
    pub fn discovery(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            settle: Duration::from_millis(self.settle_ms),
            max_triggers: self.max_triggers,
            probe_token: self.probe_token.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("page script: {0}")]
    Script(#[from] ScriptValidationError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("no page script: pass one or put {SIM_SCRIPT_FILE} in {0}")]
    NoSimScript(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0} has not been instrumented")]
    NotInstrumented(PathBuf),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InstrumentSummary {
    pub files: usize,
    pub functions: usize,
    pub skipped: Vec<SkippedFile>,
}

fn source_kind(kind: ResourceKind) -> crate::js::SourceKind {
    kind.source_kind().unwrap_or(crate::js::SourceKind::Script)
}

/// Scans and probes every eligible file. Files that fail to scan are
/// marked skipped in the manifest and served as captured.
pub fn instrument_snapshot(snap: &mut PageSnapshot, token: &str) -> Result<InstrumentSummary, PipelineError> {
    crate::js::validate_probe_token(token).map_err(|e| CacheError::Validation {
        url: String::new(),
        reason: e.to_string(),
    })?;
    let jobs: Vec<(String, String, ResourceKind)> = snap
        .eligible()
        .into_iter()
        .map(|url| {
            let e = snap.entry(&url)?;
            Ok((url.clone(), e.code.as_ref().unwrap().label.clone(), e.kind))
        })
        .collect::<Result<_, CacheError>>()?;
    let results: Vec<(String, Result<(Vec<FunctionSpan>, String), String>)> = jobs
        .par_iter()
        .map(|(url, label, kind)| {
            let r = snap.original_text(url).map_err(|e| e.to_string()).and_then(|text| {
                let spans = scan_source(&text, label, source_kind(*kind)).map_err(|e| format!("parse error: {e}"))?;
                let inst = instrument(&text, &spans, token).map_err(|e| e.to_string())?;
                Ok((spans, inst.text))
            });
            (url.clone(), r)
        })
        .collect();

    let mut summary = InstrumentSummary::default();
    for (url, r) in results {
        match r {
            Ok((spans, text)) => {
                summary.files += 1;
                summary.functions += spans.len();
                snap.set_instrumented(&url, &spans, &text)?;
            }
            Err(reason) => {
                log::warn!("{url}: {reason}");
                snap.set_skipped(&url, &reason)?;
                summary.skipped.push(SkippedFile { url, reason });
            }
        }
    }
    snap.save()?;
    Ok(summary)
}

/// Spans of every instrumented file.
pub fn snapshot_spans(snap: &PageSnapshot) -> Result<Vec<FunctionSpan>, PipelineError> {
    let mut all = Vec::new();
    for url in snap.eligible() {
        match snap.spans(&url)? {
            Some(s) => all.extend(s),
            None => return Err(PipelineError::NotInstrumented(snap.dir().to_path_buf())),
        }
    }
    Ok(all)
}

fn load_sim_script(snap: &PageSnapshot, config: &PipelineConfig) -> Result<SimPageScript, PipelineError> {
    let path = match &config.sim_script {
        Some(p) => p.clone(),
        None => {
            let p = snap.dir().join(SIM_SCRIPT_FILE);
            if !p.is_file() {
                return Err(PipelineError::NoSimScript(snap.dir().to_path_buf()));
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path).map_err(|source| PipelineError::Io { path, source })?;
    Ok(SimPageScript::from_json(&text)?)
}

fn explore<S: PageSession>(session: &mut S, config: &DiscoveryConfig) -> Result<DiscoveryResult, PipelineError> {
    let events = events_from_listeners(&session.listener_dump()?);
    match discover(session, &events, config) {
        Ok(r) => Ok(r),
        Err(e) => {
            log::warn!("discovery stopped: {e}");
            let partial = match e {
                DiscoverError::SessionLost { partial, .. } | DiscoverError::BudgetExceeded { partial, .. } => partial,
            };
            Ok(*partial)
        }
    }
}

/// Explores the instrumented page. An interrupted exploration comes back
/// with `complete == false`.
pub fn discover_snapshot(snap: &PageSnapshot, config: &PipelineConfig) -> Result<DiscoveryResult, PipelineError> {
    let spans = snapshot_spans(snap)?;
    let dcfg = config.discovery();
    let result = match config.backend {
        Backend::Sim => {
            let script = load_sim_script(snap, config)?.resolve_handlers(&spans)?;
            let mut page = sim_load(script, &config.probe_token)?;
            explore(&mut page, &dcfg)?
        }
        Backend::Cdp => {
            let server = serve(snap, Variant::Instrumented, "127.0.0.1:0")?;
            let mut cdp = CdpConfig::from_env();
            if let Some(e) = &config.cdp_endpoint {
                cdp.endpoint = e.clone();
            }
            let mut session = cdp_load(&server.page_url(), cdp)?;
            let r = explore(&mut session, &dcfg)?;
            for miss in server.misses() {
                log::warn!("not in snapshot: {miss}");
            }
            r
        }
    };
    for id in result.used.unknown(&spans) {
        log::warn!("probe for unknown function {id}");
    }
    Ok(result)
}

/// The part of a saved discovery the later stages read.
#[derive(Debug, Clone, Deserialize)]
pub struct SavedDiscovery {
    pub used: UsedSet,
    pub complete: bool,
}

pub fn save_discovery(dir: &Path, result: &DiscoveryResult) -> Result<(), PipelineError> {
    let path = dir.join(DISCOVERY_FILE);
    let text = serde_json::to_string_pretty(result).map_err(|source| PipelineError::Json {
        path: path.clone(),
        source,
    })?;
    Ok(write_atomic(&path, text.as_bytes())?)
}

pub fn load_discovery(dir: &Path) -> Result<SavedDiscovery, PipelineError> {
    let path = dir.join(DISCOVERY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path, source })
}

/// Files rewritten by [`eliminate_snapshot`] and why others were not.
#[derive(Debug, Clone, Default)]
pub struct EliminationOutcome {
    pub rewritten: BTreeMap<String, String>,
    pub per_file: Vec<FileReport>,
    /// Every code file served as captured.
    pub skipped: Vec<SkippedFile>,
    pub skipped_bytes: u64,
}

fn script_bytes(text: &str, kind: ResourceKind) -> u64 {
    match kind {
        ResourceKind::Html => inline_script_ranges(text).iter().map(|r| r.len() as u64).sum(),
        _ => text.len() as u64,
    }
}

/// Computes the eliminated text of every instrumented file. A file that
/// cannot be eliminated is reported as skipped and left out; one without
/// functions is not reported at all.
pub fn eliminate_snapshot(snap: &PageSnapshot, used: &UsedSet) -> Result<EliminationOutcome, PipelineError> {
    let mut out = EliminationOutcome::default();
    for (url, reason) in snap.skipped() {
        let text = String::from_utf8_lossy(&snap.body(&url, Variant::Original)?).into_owned();
        out.skipped_bytes += script_bytes(&text, snap.entry(&url)?.kind);
        out.skipped.push(SkippedFile { url, reason });
    }
    for url in snap.eligible() {
        let entry = snap.entry(&url)?;
        let label = entry.code.as_ref().unwrap().label.clone();
        let text = snap.original_text(&url)?;
        let spans = snap
            .spans(&url)?
            .ok_or_else(|| PipelineError::NotInstrumented(snap.dir().to_path_buf()))?;
        if spans.is_empty() {
            continue;
        }
        match eliminate(&text, &spans, &used.for_file(&label)) {
            Ok(e) => {
                out.per_file.push(FileReport {
                    url: url.clone(),
                    file: label,
                    total_functions: spans.len(),
                    eliminated_functions: e.eliminated.len(),
                    original_bytes: script_bytes(&text, entry.kind),
                    removed_bytes: (text.len() - e.text.len()) as u64,
                });
                out.rewritten.insert(url, e.text);
            }
            Err(err) => {
                log::warn!("{url}: {err}");
                out.skipped_bytes += script_bytes(&text, entry.kind);
                out.skipped.push(SkippedFile {
                    url,
                    reason: err.to_string(),
                });
            }
        }
    }
    Ok(out)
}

fn millis(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

/// What a full run produced.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: EliminationReport,
    pub discovery: DiscoveryResult,
}

/// Runs every stage on the snapshot in `dir` and writes the report.
///
/// Elimination only happens after a complete discovery. Otherwise every
/// file keeps its captured body and is listed as skipped.
pub fn run_pipeline(dir: &Path, config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let mut snap = PageSnapshot::open(dir)?;
    let mut stages = StageDurations::default();

    let t = Instant::now();
    instrument_snapshot(&mut snap, &config.probe_token)?;
    stages.instrument_ms = millis(t);

    let t = Instant::now();
    let discovery = discover_snapshot(&snap, config)?;
    save_discovery(dir, &discovery)?;
    stages.discover_ms = millis(t);

    let report = finish(&mut snap, &discovery.used, discovery.complete, stages)?;
    Ok(PipelineRun { report, discovery })
}

/// Eliminates and promotes from a used set, then writes the report.
pub fn finish(
    snap: &mut PageSnapshot,
    used: &UsedSet,
    complete: bool,
    mut stages: StageDurations,
) -> Result<EliminationReport, PipelineError> {
    let t = Instant::now();
    let mut outcome = if complete {
        eliminate_snapshot(snap, used)?
    } else {
        let mut o = eliminate_snapshot(snap, &UsedSet::new())?;
        for f in o.per_file.drain(..) {
            o.skipped_bytes += f.original_bytes;
            o.skipped.push(SkippedFile {
                url: f.url,
                reason: "discovery incomplete".to_string(),
            });
        }
        o.rewritten.clear();
        o
    };
    stages.eliminate_ms = millis(t);

    let t = Instant::now();
    let served_original: Vec<String> = snap
        .eligible()
        .into_iter()
        .filter(|u| !outcome.rewritten.contains_key(u))
        .collect();
    for url in &served_original {
        snap.clear_eliminated(url)?;
    }
    promote(snap, &outcome.rewritten)?;
    snap.save()?;
    stages.promote_ms = millis(t);

    outcome.skipped.sort_by(|a, b| a.url.cmp(&b.url));
    let report = EliminationReport::new(
        &snap.manifest.origin_url,
        outcome.per_file,
        outcome.skipped,
        outcome.skipped_bytes,
        stages,
        complete,
    );
    save_report(snap.dir(), &report)?;
    Ok(report)
}

pub fn save_report(dir: &Path, report: &EliminationReport) -> Result<(), PipelineError> {
    let path = dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(report).map_err(|source| PipelineError::Json {
        path: path.clone(),
        source,
    })?;
    Ok(write_atomic(&path, text.as_bytes())?)
}

pub fn load_report(path: &Path) -> Result<EliminationReport, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs [`run_pipeline`] on several snapshots, `config.workers` at a time.
pub fn run_many(dirs: &[PathBuf], config: &PipelineConfig) -> Result<Vec<Result<PipelineRun, PipelineError>>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(|| dirs.par_iter().map(|d| run_pipeline(d, config)).collect()))
}
