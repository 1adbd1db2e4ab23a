//! Elimination statistics and their distribution across pages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub url: String,
    /// Name used in function ids.
    pub file: String,
    pub total_functions: usize,
    pub eliminated_functions: usize,
    /// Script bytes: the whole file, or the inline scripts of an HTML page.
    pub original_bytes: u64,
    pub removed_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDurations {
    pub instrument_ms: u64,
    pub discover_ms: u64,
    pub eliminate_ms: u64,
    pub promote_ms: u64,
}

impl StageDurations {
    pub fn total_ms(&self) -> u64 {
        self.instrument_ms + self.discover_ms + self.eliminate_ms + self.promote_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageReport {
    pub url: String,
    pub total_functions: usize,
    pub eliminated_functions: usize,
    pub original_bytes: u64,
    pub removed_bytes: u64,
    /// Script bytes of skipped files, kept as captured.
    pub skipped_bytes: u64,
    /// `eliminated_functions / total_functions`, 0 for a page without functions.
    pub eliminated_fraction: f64,
    /// `removed_bytes` over all script bytes of the page, skipped ones included.
    pub removed_fraction: f64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationReport {
    pub schema: u32,
    pub page: PageReport,
    pub per_file: Vec<FileReport>,
    pub skipped_files: Vec<SkippedFile>,
    pub stages: StageDurations,
    pub discovery_complete: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EliminationReport {
    /// Builds the page totals from the file rows.
    pub fn new(
        url: &str,
        per_file: Vec<FileReport>,
        skipped_files: Vec<SkippedFile>,
        skipped_bytes: u64,
        stages: StageDurations,
        discovery_complete: bool,
    ) -> Self {
        let total_functions = per_file.iter().map(|f| f.total_functions).sum();
        let eliminated_functions = per_file.iter().map(|f| f.eliminated_functions).sum();
        let original_bytes = per_file.iter().map(|f| f.original_bytes).sum();
        let removed_bytes = per_file.iter().map(|f| f.removed_bytes).sum();
        EliminationReport {
            schema: REPORT_SCHEMA,
            page: PageReport {
                url: url.to_string(),
                total_functions,
                eliminated_functions,
                original_bytes,
                removed_bytes,
                skipped_bytes,
                eliminated_fraction: ratio(eliminated_functions as u64, total_functions as u64),
                removed_fraction: ratio(removed_bytes, original_bytes + skipped_bytes),
                duration_ms: stages.total_ms(),
            },
            per_file,
            skipped_files,
            stages,
            discovery_complete,
        }
    }

    /// Checks that page totals match the file rows and every row is in range.
    pub fn check(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Inconsistent(m));
        for f in &self.per_file {
            if f.eliminated_functions > f.total_functions {
                return bad(format!("{}: more functions eliminated than present", f.url));
            }
            if f.removed_bytes > f.original_bytes {
                return bad(format!("{}: more bytes removed than present", f.url));
            }
        }
        let p = &self.page;
        let sums = (
            self.per_file.iter().map(|f| f.total_functions).sum::<usize>(),
            self.per_file.iter().map(|f| f.eliminated_functions).sum::<usize>(),
            self.per_file.iter().map(|f| f.original_bytes).sum::<u64>(),
            self.per_file.iter().map(|f| f.removed_bytes).sum::<u64>(),
        );
        if sums != (p.total_functions, p.eliminated_functions, p.original_bytes, p.removed_bytes) {
            return bad("page totals differ from the sum over files".to_string());
        }
        Ok(())
    }

    /// The report with every duration zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.stages = StageDurations::default();
        r.page.duration_ms = 0;
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    /// Share of samples at or below `value`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub histogram: Vec<Bin>,
    pub cdf: Vec<CdfPoint>,
}

pub const HISTOGRAM_BINS: usize = 10;

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let (min, max) = (v[0], v[n - 1]);
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        let mean = v.iter().sum::<f64>() / n as f64;

        let histogram = if min == max {
            vec![Bin { lo: min, hi: max, count: n }]
        } else {
            let width = (max - min) / HISTOGRAM_BINS as f64;
            let mut bins: Vec<Bin> = (0..HISTOGRAM_BINS)
                .map(|i| Bin {
                    lo: min + width * i as f64,
                    hi: if i + 1 == HISTOGRAM_BINS { max } else { min + width * (i + 1) as f64 },
                    count: 0,
                })
                .collect();
            for x in &v {
                let i = (((x - min) / width) as usize).min(HISTOGRAM_BINS - 1);
                bins[i].count += 1;
            }
            bins
        };

        let mut cdf: Vec<CdfPoint> = Vec::new();
        for (i, x) in v.iter().enumerate() {
            let fraction = (i + 1) as f64 / n as f64;
            match cdf.last_mut() {
                Some(p) if p.value == *x => p.fraction = fraction,
                _ => cdf.push(CdfPoint { value: *x, fraction }),
            }
        }
        Some(Summary {
            count: n,
            min,
            max,
            mean,
            median,
            histogram,
            cdf,
        })
    }
}

/// Distributions over a set of page reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub pages: usize,
    pub eliminated_functions: Summary,
    pub eliminated_fraction: Summary,
    pub removed_bytes: Summary,
    pub removed_fraction: Summary,
    pub duration_ms: Summary,
    /// Eliminated function counts per file rather than per page.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_file_eliminated: Option<Summary>,
}

pub fn aggregate(reports: &[EliminationReport]) -> Result<Distribution, ReportError> {
    let pages = reports.len();
    let of = |f: &dyn Fn(&EliminationReport) -> f64| {
        Summary::of(&reports.iter().map(f).collect::<Vec<_>>()).ok_or(ReportError::EmptyInput)
    };
    let files: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.per_file.iter().map(|f| f.eliminated_functions as f64))
        .collect();
    Ok(Distribution {
        pages,
        eliminated_functions: of(&|r| r.page.eliminated_functions as f64)?,
        eliminated_fraction: of(&|r| r.page.eliminated_fraction)?,
        removed_bytes: of(&|r| r.page.removed_bytes as f64)?,
        removed_fraction: of(&|r| r.page.removed_fraction)?,
        duration_ms: of(&|r| r.page.duration_ms as f64)?,
        per_file_eliminated: Summary::of(&files),
    })
}
