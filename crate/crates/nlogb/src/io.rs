//! Artifact formats: per-step distributions and the density grid as CSV,
//! run summaries and manifests as JSON, plus the sweep index.
//!
//! Every file opens with a format-version marker, and writers are
//! byte-deterministic: the same data always serializes to the same bytes.
//! Floats go through Rust's shortest round-trip formatting, so reading a
//! file back recovers the exact values.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    ChaoticBehavior, Classification, CollisionEvent, FitResult, PhaseLabel, RunAnalysis,
};
use crate::observables::{ProbabilityDist, SolitonTrack};
use crate::walk::SimConfig;

pub const DISTRIBUTION_FORMAT: &str = "nlogb-distribution/1";
pub const GRID_FORMAT: &str = "nlogb-grid/1";
pub const SUMMARY_FORMAT: &str = "nlogb-summary/1";
pub const MANIFEST_FORMAT: &str = "nlogb-manifest/1";
pub const SWEEP_INDEX_FORMAT: &str = "nlogb-sweep-index/1";
pub const FIT_REPORT_FORMAT: &str = "nlogb-fit-report/1";

pub const DISTRIBUTION_FILE: &str = "distribution.csv";
pub const DENSITY_GRID_FILE: &str = "density_grid.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_INDEX_FILE: &str = "sweep_index.csv";
pub const FIT_REPORT_FILE: &str = "fit_report.txt";

/// Track and sigma series in a summary are thinned to this many points.
pub const SUMMARY_MAX_SERIES_POINTS: usize = 512;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unsupported format: expected {expected:?}, found {found:?}")]
    FormatVersion { expected: &'static str, found: String },
    #[error("malformed {what} at line {line}: {detail}")]
    Malformed {
        what: &'static str,
        line: usize,
        detail: String,
    },
}

/// One row of a distribution CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistributionRow {
    pub t: u32,
    pub m: i64,
    pub p: f64,
    pub p_u: f64,
    pub p_d: f64,
}

/// Writes recorded distributions as long-format CSV: one row per
/// (t, m) pair over each snapshot's stored lattice range.
pub fn write_distribution_csv<W: Write>(
    w: &mut W,
    dists: &[ProbabilityDist],
) -> Result<(), IoError> {
    writeln!(w, "# {DISTRIBUTION_FORMAT}")?;
    writeln!(w, "t,m,p,p_u,p_d")?;
    for dist in dists {
        for (m, p, p_u, p_d) in dist.iter() {
            writeln!(w, "{},{},{},{},{}", dist.t(), m, p, p_u, p_d)?;
        }
    }
    Ok(())
}

fn expect_marker<B: BufRead>(
    lines: &mut std::iter::Enumerate<std::io::Lines<B>>,
    expected: &'static str,
    what: &'static str,
) -> Result<(), IoError> {
    match lines.next() {
        Some((_, line)) => {
            let line = line?;
            let found = line.trim();
            if found == format!("# {expected}") {
                Ok(())
            } else {
                Err(IoError::FormatVersion {
                    expected,
                    found: found.to_string(),
                })
            }
        }
        None => Err(IoError::Malformed {
            what,
            line: 1,
            detail: "empty file".into(),
        }),
    }
}

fn expect_header<B: BufRead>(
    lines: &mut std::iter::Enumerate<std::io::Lines<B>>,
    expected: &str,
    what: &'static str,
) -> Result<(), IoError> {
    match lines.next() {
        Some((i, line)) => {
            let line = line?;
            if line.trim() == expected {
                Ok(())
            } else {
                Err(IoError::Malformed {
                    what,
                    line: i + 1,
                    detail: format!("expected header {expected:?}, found {:?}", line.trim()),
                })
            }
        }
        None => Err(IoError::Malformed {
            what,
            line: 2,
            detail: "missing header".into(),
        }),
    }
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    what: &'static str,
    line: usize,
    name: &str,
) -> Result<T, IoError> {
    let text = field.ok_or_else(|| IoError::Malformed {
        what,
        line,
        detail: format!("missing {name} column"),
    })?;
    text.trim().parse().map_err(|_| IoError::Malformed {
        what,
        line,
        detail: format!("cannot parse {name} from {text:?}"),
    })
}

/// Reads a distribution CSV back into rows.
pub fn read_distribution_csv<R: Read>(r: R) -> Result<Vec<DistributionRow>, IoError> {
    const WHAT: &str = "distribution csv";
    let mut lines = BufReader::new(r).lines().enumerate();
    expect_marker(&mut lines, DISTRIBUTION_FORMAT, WHAT)?;
    expect_header(&mut lines, "t,m,p,p_u,p_d", WHAT)?;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let n = i + 1;
        let mut fields = text.split(',');
        rows.push(DistributionRow {
            t: parse_field(fields.next(), WHAT, n, "t")?,
            m: parse_field(fields.next(), WHAT, n, "m")?,
            p: parse_field(fields.next(), WHAT, n, "p")?,
            p_u: parse_field(fields.next(), WHAT, n, "p_u")?,
            p_d: parse_field(fields.next(), WHAT, n, "p_d")?,
        });
    }
    Ok(rows)
}

/// Writes recorded distributions as a dense space-time grid: one row per
/// lattice site (m descending), one column per snapshot, cells holding
/// the total probability p(m, t).
pub fn write_density_grid<W: Write>(w: &mut W, dists: &[ProbabilityDist]) -> Result<(), IoError> {
    writeln!(w, "# {GRID_FORMAT}")?;
    let mut header = String::from("m");
    for dist in dists {
        header.push(',');
        header.push_str(&dist.t().to_string());
    }
    writeln!(w, "{header}")?;
    if dists.is_empty() {
        return Ok(());
    }
    let m_lo = dists.iter().map(|d| d.m_lo()).min().unwrap();
    let m_hi = dists.iter().map(|d| d.m_hi()).max().unwrap();
    for m in (m_lo..=m_hi).rev() {
        let mut row = m.to_string();
        for dist in dists {
            row.push(',');
            row.push_str(&dist.p(m).to_string());
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Turning point captured in a run summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub t: u32,
    pub m_cm: f64,
}

/// The soliton pair's tracks, thinned for the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPair {
    pub left: SolitonTrack,
    pub right: SolitonTrack,
}

/// Point a parameter sweep contributes to the collision-time fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInput {
    pub alpha: f64,
    pub t_col: u32,
}

/// Condensed, serializable outcome of one analyzed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: String,
    pub config: SimConfig,
    pub halfwidth: i64,
    /// "I", "II", "III", or "indeterminate".
    pub phase: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub behavior: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_eq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indeterminate_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turning_point: Option<TurningPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionEvent>,
    pub tracks: TrackPair,
    /// Thinned (t, sigma/t) series, t >= 1.
    pub sigma_over_t: Vec<(u32, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_input: Option<FitInput>,
}

/// Every at most `max_points`-th element, endpoints always kept.
fn thin<T: Clone>(values: &[T], max_points: usize) -> Vec<T> {
    let n = values.len();
    if n <= max_points || max_points < 2 {
        return values.to_vec();
    }
    let stride = n.div_ceil(max_points);
    let mut out: Vec<T> = values.iter().step_by(stride).cloned().collect();
    if (n - 1) % stride != 0 {
        out.push(values[n - 1].clone());
    }
    out
}

fn thin_track(track: &SolitonTrack, max_points: usize) -> SolitonTrack {
    SolitonTrack {
        side: track.side,
        window_halfwidth: track.window_halfwidth,
        series: thin(&track.series, max_points),
    }
}

impl RunSummary {
    /// Condenses a full analysis, thinning long series to
    /// SUMMARY_MAX_SERIES_POINTS entries.
    pub fn from_analysis(analysis: &RunAnalysis) -> RunSummary {
        let max = SUMMARY_MAX_SERIES_POINTS;
        let (phase, behavior, m_eq, indeterminate_reason) = match &analysis.classification {
            Classification::Label(label) => {
                let behavior = match label {
                    PhaseLabel::Chaotic { behavior } => Some(behavior.to_string()),
                    _ => None,
                };
                let m_eq = match label {
                    PhaseLabel::Chaotic {
                        behavior: ChaoticBehavior::Localized { m_eq },
                    } => Some(*m_eq),
                    _ => None,
                };
                (label.to_string(), behavior, m_eq, None)
            }
            Classification::Indeterminate { reason } => {
                ("indeterminate".to_string(), None, None, Some(reason.clone()))
            }
        };
        let sigma_over_t: Vec<(u32, f64)> = analysis
            .sigma
            .iter()
            .filter(|(t, _)| *t >= 1)
            .map(|&(t, s)| (t, s / t as f64))
            .collect();
        let fit_input = match (analysis.config.phase.kerr_alpha(), &analysis.collision) {
            (Some(alpha), Some(event)) => Some(FitInput {
                alpha,
                t_col: event.t_col,
            }),
            _ => None,
        };
        RunSummary {
            format_version: SUMMARY_FORMAT.to_string(),
            config: analysis.config.clone(),
            halfwidth: analysis.halfwidth,
            phase,
            behavior,
            m_eq,
            indeterminate_reason,
            turning_point: analysis.turning.map(|(t, m_cm)| TurningPoint { t, m_cm }),
            collision: analysis.collision,
            tracks: TrackPair {
                left: thin_track(&analysis.left, max),
                right: thin_track(&analysis.right, max),
            },
            sigma_over_t: thin(&sigma_over_t, max),
            fit_input,
        }
    }
}

/// Writes a summary as pretty-printed JSON with a trailing newline.
pub fn write_summary_json<W: Write>(w: &mut W, summary: &RunSummary) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut *w, summary)?;
    writeln!(w)?;
    Ok(())
}

/// Reads a summary back, checking its format version.
pub fn read_summary_json<R: Read>(r: R) -> Result<RunSummary, IoError> {
    let summary: RunSummary = serde_json::from_reader(r)?;
    if summary.format_version != SUMMARY_FORMAT {
        return Err(IoError::FormatVersion {
            expected: SUMMARY_FORMAT,
            found: summary.format_version,
        });
    }
    Ok(summary)
}

/// Record of what one CLI invocation produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: String,
    pub config: SimConfig,
    /// Soliton window halfwidth the run was analyzed with.
    pub halfwidth: i64,
    /// Artifact file names relative to the output directory.
    pub artifacts: Vec<String>,
    /// Wall-clock duration of the run; informational, varies between
    /// otherwise identical runs.
    pub wall_time_s: f64,
    /// `os-arch` of the producing host.
    pub platform: String,
}

impl RunManifest {
    pub fn new(
        config: SimConfig,
        halfwidth: i64,
        artifacts: Vec<String>,
        wall_time_s: f64,
    ) -> RunManifest {
        RunManifest {
            format_version: MANIFEST_FORMAT.to_string(),
            config,
            halfwidth,
            artifacts,
            wall_time_s,
            platform: format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH),
        }
    }
}

/// Writes a manifest as pretty-printed JSON with a trailing newline.
pub fn write_manifest_json<W: Write>(w: &mut W, manifest: &RunManifest) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut *w, manifest)?;
    writeln!(w)?;
    Ok(())
}

/// Reads a manifest back, checking its format version.
pub fn read_manifest_json<R: Read>(r: R) -> Result<RunManifest, IoError> {
    let manifest: RunManifest = serde_json::from_reader(r)?;
    if manifest.format_version != MANIFEST_FORMAT {
        return Err(IoError::FormatVersion {
            expected: MANIFEST_FORMAT,
            found: manifest.format_version,
        });
    }
    Ok(manifest)
}

/// One sweep point in the index: the nonlinearity, the collision time if
/// one was resolved, and the assigned phase.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepIndexRow {
    pub alpha: f64,
    pub t_col: Option<u32>,
    pub phase: String,
}

/// Writes the sweep index CSV; a missing collision time leaves its cell
/// empty.
pub fn write_sweep_index<W: Write>(w: &mut W, rows: &[SweepIndexRow]) -> Result<(), IoError> {
    writeln!(w, "# {SWEEP_INDEX_FORMAT}")?;
    writeln!(w, "alpha,t_col,phase")?;
    for row in rows {
        match row.t_col {
            Some(t) => writeln!(w, "{},{},{}", row.alpha, t, row.phase)?,
            None => writeln!(w, "{},,{}", row.alpha, row.phase)?,
        }
    }
    Ok(())
}

/// Reads a sweep index CSV back into rows.
pub fn read_sweep_index<R: Read>(r: R) -> Result<Vec<SweepIndexRow>, IoError> {
    const WHAT: &str = "sweep index csv";
    let mut lines = BufReader::new(r).lines().enumerate();
    expect_marker(&mut lines, SWEEP_INDEX_FORMAT, WHAT)?;
    expect_header(&mut lines, "alpha,t_col,phase", WHAT)?;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let n = i + 1;
        let mut fields = text.split(',');
        let alpha = parse_field(fields.next(), WHAT, n, "alpha")?;
        let t_col_text = fields.next().ok_or_else(|| IoError::Malformed {
            what: WHAT,
            line: n,
            detail: "missing t_col column".into(),
        })?;
        let t_col = if t_col_text.trim().is_empty() {
            None
        } else {
            Some(parse_field(Some(t_col_text), WHAT, n, "t_col")?)
        };
        let phase = fields
            .next()
            .ok_or_else(|| IoError::Malformed {
                what: WHAT,
                line: n,
                detail: "missing phase column".into(),
            })?
            .trim()
            .to_string();
        rows.push(SweepIndexRow {
            alpha,
            t_col,
            phase,
        });
    }
    Ok(rows)
}

/// Writes the hyperbola-fit report as plain text: the points that entered
/// the fit, then the fitted coefficients of 1/t_col = a/alpha + b.
pub fn write_fit_report<W: Write>(
    w: &mut W,
    points: &[(f64, f64)],
    fit: &FitResult,
) -> Result<(), IoError> {
    writeln!(w, "# {FIT_REPORT_FORMAT}")?;
    writeln!(w, "model: 1/t_col = a/alpha + b")?;
    writeln!(w, "points: {}", points.len())?;
    for (alpha, t_col) in points {
        writeln!(w, "  alpha = {alpha}  t_col = {t_col}")?;
    }
    writeln!(w, "a = {}", fit.a)?;
    writeln!(w, "b = {}", fit.b)?;
    writeln!(w, "r2 = {}", fit.r2)?;
    writeln!(w, "alpha_I = {}", fit.alpha_i)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze_run;
    use crate::walk::{evolve, SimConfig};

    fn snapshots(alpha: f64, steps: u32) -> Vec<ProbabilityDist> {
        let config = SimConfig::kerr(alpha, steps);
        evolve(&config)
            .unwrap()
            .iter()
            .map(ProbabilityDist::from_field)
            .collect()
    }

    #[test]
    fn distribution_csv_round_trips_exactly() {
        let dists = snapshots(0.4, 10);
        let mut buf = Vec::new();
        write_distribution_csv(&mut buf, &dists).unwrap();
        let rows = read_distribution_csv(buf.as_slice()).unwrap();
        let expected: usize = dists.iter().map(|d| d.iter().count()).sum();
        assert_eq!(rows.len(), expected);
        for row in &rows {
            let dist = &dists[row.t as usize];
            assert_eq!(row.p_u, dist.p_u(row.m));
            assert_eq!(row.p_d, dist.p_d(row.m));
            assert_eq!(row.p, dist.p(row.m));
        }
    }

    #[test]
    fn distribution_csv_rejects_foreign_header() {
        let text = "# some-other-format/9\nt,m,p,p_u,p_d\n";
        assert!(matches!(
            read_distribution_csv(text.as_bytes()),
            Err(IoError::FormatVersion { .. })
        ));
    }

    #[test]
    fn density_grid_lays_out_sites_by_time() {
        let dists = snapshots(0.0, 2);
        let mut buf = Vec::new();
        write_density_grid(&mut buf, &dists).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# nlogb-grid/1");
        assert_eq!(lines[1], "m,0,1,2");
        assert_eq!(lines.len(), 7);
        // Rows cover m = 2..-2 top to bottom; cells reproduce p(m, t)
        // exactly, and sites outside a snapshot's range print as plain 0.
        for (row, m) in lines[2..].iter().zip([2i64, 1, 0, -1, -2]) {
            let cells: Vec<&str> = row.split(',').collect();
            assert_eq!(cells[0], m.to_string());
            for (cell, dist) in cells[1..].iter().zip(&dists) {
                assert_eq!(cell.parse::<f64>().unwrap(), dist.p(m));
            }
        }
        let parity_zeros = text.matches(",0").count();
        assert!(parity_zeros >= 8, "grid should spell missing mass as 0");
    }

    #[test]
    fn summary_round_trips_and_is_byte_deterministic() {
        let config = SimConfig::kerr(0.4, 150);
        let analysis = analyze_run(&config, 8).unwrap();
        let summary = RunSummary::from_analysis(&analysis);
        let mut buf_a = Vec::new();
        write_summary_json(&mut buf_a, &summary).unwrap();
        let mut buf_b = Vec::new();
        write_summary_json(&mut buf_b, &summary).unwrap();
        assert_eq!(buf_a, buf_b);
        let back = read_summary_json(buf_a.as_slice()).unwrap();
        assert_eq!(back, summary);
    }

    #[test]
    fn summary_read_rejects_wrong_version() {
        let config = SimConfig::kerr(0.2, 80);
        let analysis = analyze_run(&config, 8).unwrap();
        let mut summary = RunSummary::from_analysis(&analysis);
        summary.format_version = "nlogb-summary/999".to_string();
        let mut buf = Vec::new();
        write_summary_json(&mut buf, &summary).unwrap();
        assert!(matches!(
            read_summary_json(buf.as_slice()),
            Err(IoError::FormatVersion { .. })
        ));
    }

    #[test]
    fn summary_thins_long_series_but_keeps_endpoints() {
        let config = SimConfig::kerr(0.4, 1500);
        let analysis = analyze_run(&config, 8).unwrap();
        let summary = RunSummary::from_analysis(&analysis);
        assert!(summary.tracks.right.series.len() <= SUMMARY_MAX_SERIES_POINTS + 1);
        assert!(summary.sigma_over_t.len() <= SUMMARY_MAX_SERIES_POINTS + 1);
        let first = summary.tracks.right.series.first().unwrap().t;
        let last = summary.tracks.right.series.last().unwrap().t;
        assert_eq!(first, analysis.right.series.first().unwrap().t);
        assert_eq!(last, analysis.right.series.last().unwrap().t);
        assert_eq!(summary.sigma_over_t.last().unwrap().0, 1500);
    }

    #[test]
    fn manifest_round_trips() {
        let manifest = RunManifest::new(
            SimConfig::kerr(0.49, 600),
            8,
            vec![
                DISTRIBUTION_FILE.to_string(),
                DENSITY_GRID_FILE.to_string(),
                SUMMARY_FILE.to_string(),
            ],
            1.25,
        );
        let mut buf = Vec::new();
        write_manifest_json(&mut buf, &manifest).unwrap();
        let back = read_manifest_json(buf.as_slice()).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn sweep_index_round_trips_with_and_without_t_col() {
        let rows = vec![
            SweepIndexRow {
                alpha: 0.49,
                t_col: Some(472),
                phase: "II".to_string(),
            },
            SweepIndexRow {
                alpha: 0.3,
                t_col: None,
                phase: "I".to_string(),
            },
            SweepIndexRow {
                alpha: 0.6669,
                t_col: None,
                phase: "indeterminate".to_string(),
            },
        ];
        let mut buf = Vec::new();
        write_sweep_index(&mut buf, &rows).unwrap();
        let back = read_sweep_index(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn thinning_short_series_is_identity() {
        let xs: Vec<u32> = (0..100).collect();
        assert_eq!(thin(&xs, 512), xs);
        let thinned = thin(&xs, 10);
        assert!(thinned.len() <= 11);
        assert_eq!(*thinned.first().unwrap(), 0);
        assert_eq!(*thinned.last().unwrap(), 99);
    }
}
