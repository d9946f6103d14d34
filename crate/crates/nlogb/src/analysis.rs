//! Run-level analysis: turning points, soliton collisions, the
//! collision-time law, formation onset, and classification of the
//! dynamical phase.
//!
//! Phase labels follow the soliton pair launched from a symmetric start:
//! I (ballistic) - the solitons separate forever; II (recollapse) - they
//! turn around, collide once near the origin, and separate again;
//! III (chaotic) - anything else: trapped oscillation near the origin,
//! localization at a standstill, or escape after repeated collisions.
//!
//! All detection runs on the right track's center-of-mass series smoothed
//! with a short moving average. Contact with the mirror partner uses a
//! hysteresis band: an episode opens when the smoothed m_CM falls to the
//! contact level and closes when it climbs back to the resolution level,
//! so jitter while the pair overlaps never splits one collision into many.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observables::{sigma, ProbabilityDist, Side, SolitonTrack, SolitonTracker};
use crate::walk::{evolve_with, SimConfig, WalkError};

/// Steps discarded before turning-point analysis; the soliton needs this
/// long to form and clear the origin.
pub const FORMATION_TRANSIENT: u32 = 50;
/// Samples in the moving average applied to track series.
pub const SMOOTHING_WINDOW: usize = 11;
/// Minimum track samples required for any analysis.
pub const MIN_TRACK_SAMPLES: usize = 20;
/// Runs shorter than this are never classified.
pub const MIN_CLASSIFY_STEPS: u32 = 100;
/// A smoothed m_CM excursion must fall this many sites off its local
/// maximum to count as a turning point; the same margin defines sustained
/// separation.
pub const TURNING_MIN_DROP: f64 = 2.0;
/// A contact episode opens when the smoothed right m_CM falls to this
/// level...
pub const CONTACT_ENTER: f64 = 1.0;
/// ...and closes when it climbs back to this level. The pair also counts
/// as resolved into two separate peaks only once the smoothed m_CM first
/// reaches this level.
pub const CONTACT_EXIT: f64 = 3.0;
/// If the pair is still in contact this late after launch, it never
/// separated to begin with (a merged start rather than a formed pair).
pub const BIRTH_TRAP_MIN_T: u32 = 25;
/// Minimum samples after the last contact needed to judge separation.
pub const MIN_POST_SAMPLES: usize = 20;
/// Last-quarter m_CM range below which a track counts as localized.
pub const LOCALIZATION_BAND: f64 = 3.0;
/// A localized tail must sit at least this far from the origin; closer
/// standstills count as trapped oscillation instead.
pub const LOCALIZATION_MIN_CM: f64 = 1.5;
/// Pre-collision intensity window: steps before t_col (start, end).
pub const BEFORE_WINDOW: (u32, u32) = (160, 130);
/// Post-collision intensity window: steps after t_col (start, end). The
/// long skip lets the re-formed soliton shed the radiation it picks up
/// while the windows of the two solitons overlap.
pub const AFTER_WINDOW: (u32, u32) = (280, 480);
/// Minimum samples the post-collision window must hold.
pub const MIN_WINDOW_SAMPLES: usize = 25;
/// Tight window halfwidth recommended for formation-onset measurements;
/// a narrow core window keeps slow origin radiation from masking the
/// plateau while the soliton is still near the start site.
pub const CORE_HALFWIDTH: i64 = 4;
/// Half-height of the intensity band around the tail mean that defines
/// the plateau for onset detection.
pub const ONSET_BAND: f64 = 0.03;

/// Reference boundary between the ballistic and recollapse regimes,
/// used only for report labels and short-run warnings.
pub const ALPHA_BOUNDARY_BALLISTIC: f64 = 0.474;
/// Reference boundary between the recollapse and chaotic regimes,
/// used only for report labels and short-run warnings.
pub const ALPHA_BOUNDARY_CHAOTIC: f64 = 0.6565;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("track has {have} samples, need {need}")]
    TrackTooShort { have: usize, need: usize },
    #[error("run ends {steps} steps after start but resolving the collision at t = {t_col} needs at least {minimum_steps}")]
    RunTooShort {
        steps: u32,
        t_col: u32,
        minimum_steps: u32,
    },
    #[error("hyperbola fit needs at least 3 points, got {have}")]
    InsufficientPoints { have: usize },
    #[error("hyperbola fit input is degenerate: all alpha values coincide")]
    SingularFit,
    #[error("fit point (alpha = {alpha}, t_col = {t_col}) is not strictly positive")]
    InvalidPoint { alpha: f64, t_col: f64 },
}

/// One maximal stretch of soliton-pair contact on the right track.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEpisode {
    /// First step with smoothed m_CM at or below the contact level.
    pub enter: u32,
    /// First later step back at the resolution level; None when the pair
    /// is still in contact when the run ends.
    pub exit: Option<u32>,
}

/// One soliton-soliton collision read off the right track.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Midpoint of the first contact episode.
    pub t_col: u32,
    /// Mean window intensity over the inbound window before t_col.
    pub intensity_before: f64,
    /// Mean window intensity over the settled window after t_col.
    pub intensity_after: f64,
}

/// Least-squares line through (1/alpha, 1/t_col).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Slope of 1/t_col against 1/alpha.
    pub a: f64,
    /// Intercept.
    pub b: f64,
    /// Coefficient of determination, clamped to [0, 1].
    pub r2: f64,
    /// Zero crossing -a/b: the alpha where the collision time diverges.
    /// Finite iff b != 0.
    pub alpha_i: f64,
}

/// Sub-behavior of a phase III run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChaoticBehavior {
    /// Bounded motion with repeated direction reversals.
    Oscillating,
    /// Standstill: last-quarter m_CM range under the localization band.
    Localized { m_eq: f64 },
    /// Separation resumes after repeated contacts or reversals.
    Escaping,
}

/// Dynamical phase of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum PhaseLabel {
    Ballistic,
    Recollapse,
    Chaotic { behavior: ChaoticBehavior },
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseLabel::Ballistic => write!(f, "I"),
            PhaseLabel::Recollapse => write!(f, "II"),
            PhaseLabel::Chaotic { .. } => write!(f, "III"),
        }
    }
}

impl std::fmt::Display for ChaoticBehavior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChaoticBehavior::Oscillating => write!(f, "oscillating"),
            ChaoticBehavior::Localized { .. } => write!(f, "localized"),
            ChaoticBehavior::Escaping => write!(f, "escaping"),
        }
    }
}

/// Outcome of classification: a phase label, or a refusal to guess.
#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    Label(PhaseLabel),
    Indeterminate { reason: String },
}

/// m_CM statistics over the last quarter of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub from_t: u32,
    pub samples: usize,
    pub mean: f64,
    pub range: f64,
}

/// Everything analyze_run measures about one configuration.
#[derive(Clone, Debug)]
pub struct RunAnalysis {
    pub config: SimConfig,
    pub halfwidth: i64,
    pub left: SolitonTrack,
    pub right: SolitonTrack,
    /// (t, sigma) at every step.
    pub sigma: Vec<(u32, f64)>,
    /// First step the smoothed right m_CM reaches the resolution level.
    pub resolution: Option<u32>,
    pub episodes: Vec<ContactEpisode>,
    pub turning: Option<(u32, f64)>,
    pub collision: Option<CollisionEvent>,
    /// Why collision statistics are missing even though contact happened;
    /// typically the run ended before the settling window.
    pub collision_error: Option<AnalysisError>,
    pub classification: Classification,
}

/// Centered moving average with window shrinking at the edges.
fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let sum: f64 = values[lo..=hi].iter().sum();
        out.push(sum / (hi - lo + 1) as f64);
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn smoothed_cm(track: &SolitonTrack) -> Vec<f64> {
    let cm: Vec<f64> = track.series.iter().map(|p| p.m_cm).collect();
    moving_average(&cm, SMOOTHING_WINDOW)
}

/// First step at which the smoothed m_CM reaches the resolution level:
/// the earliest time the pair is resolvable as two separate peaks. None
/// when the track never separates that far.
pub fn resolution_time(track: &SolitonTrack) -> Option<u32> {
    let sm = smoothed_cm(track);
    sm.iter()
        .position(|&v| v >= CONTACT_EXIT)
        .map(|i| track.series[i].t)
}

/// Contact episodes of the right track with its mirror partner, in time
/// order. Detection arms once the pair has resolved; an episode then
/// opens at the contact level and closes back at the resolution level
/// (hysteresis), so noise during the overlap never splits an episode.
pub fn contact_episodes(track: &SolitonTrack) -> Vec<ContactEpisode> {
    let sm = smoothed_cm(track);
    let Some(start) = sm.iter().position(|&v| v >= CONTACT_EXIT) else {
        return Vec::new();
    };
    let mut episodes = Vec::new();
    let mut enter: Option<u32> = None;
    for i in start..sm.len() {
        match enter {
            None => {
                if sm[i] <= CONTACT_ENTER {
                    enter = Some(track.series[i].t);
                }
            }
            Some(e) => {
                if sm[i] >= CONTACT_EXIT {
                    episodes.push(ContactEpisode {
                        enter: e,
                        exit: Some(track.series[i].t),
                    });
                    enter = None;
                }
            }
        }
    }
    if let Some(e) = enter {
        episodes.push(ContactEpisode {
            enter: e,
            exit: None,
        });
    }
    episodes
}

/// Last step at or before the resolution time with smoothed m_CM still at
/// the contact level: how long the launch stayed merged. None when the
/// track never resolves.
fn launch_contact_end(track: &SolitonTrack) -> Option<u32> {
    let sm = smoothed_cm(track);
    let res_idx = sm.iter().position(|&v| v >= CONTACT_EXIT)?;
    let mut last = None;
    for i in 0..=res_idx {
        if sm[i] <= CONTACT_ENTER {
            last = Some(track.series[i].t);
        }
    }
    last
}

/// First smoothed strict local maximum followed by a sustained drop of at
/// least TURNING_MIN_DROP sites. `sm` must be the smoothed values aligned
/// with `samples`; the scan starts at `start`.
fn scan_turning_from(
    samples: &[(u32, f64)],
    sm: &[f64],
    start: usize,
) -> Option<(u32, f64)> {
    let n = sm.len();
    if n < 3 {
        return None;
    }
    let mut i = start.max(1);
    while i + 1 < n {
        if sm[i] >= sm[i - 1] && sm[i] > sm[i + 1] {
            let peak = sm[i];
            let mut j = i + 1;
            let mut outcome = None;
            while j < n {
                if sm[j] > peak {
                    break;
                }
                if peak - sm[j] >= TURNING_MIN_DROP {
                    outcome = Some((samples[i].0, samples[i].1));
                    break;
                }
                j += 1;
            }
            if outcome.is_some() {
                return outcome;
            }
            i = j.max(i + 1);
        } else {
            i += 1;
        }
    }
    None
}

/// Smooths and scans a (t, m_cm) segment for a turning point.
fn scan_turning(samples: &[(u32, f64)]) -> Option<(u32, f64)> {
    let cm: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sm = moving_average(&cm, SMOOTHING_WINDOW);
    scan_turning_from(samples, &sm, 0)
}

/// Finds where the outward motion of the tracked soliton reverses.
///
/// Works on the smoothed m_CM series after both the formation transient
/// and the resolution time, so a merged launch is never mistaken for an
/// excursion; small wiggles below the drop threshold are ignored.
/// Returns the sample's (t, raw m_cm), or None for a track that never
/// turns around (including one that never resolves into a pair).
pub fn detect_turning_point(track: &SolitonTrack) -> Result<Option<(u32, f64)>, AnalysisError> {
    if track.series.len() < MIN_TRACK_SAMPLES {
        return Err(AnalysisError::TrackTooShort {
            have: track.series.len(),
            need: MIN_TRACK_SAMPLES,
        });
    }
    let Some(resolved) = resolution_time(track) else {
        return Ok(None);
    };
    let samples: Vec<(u32, f64)> = track.series.iter().map(|p| (p.t, p.m_cm)).collect();
    let sm = smoothed_cm(track);
    let from_t = resolved.max(FORMATION_TRANSIENT);
    let start = samples
        .iter()
        .position(|s| s.0 >= from_t)
        .unwrap_or(samples.len());
    Ok(scan_turning_from(&samples, &sm, start))
}

/// Detects the first collision of the mirror soliton pair on the right
/// track and measures the window intensity before and after it.
///
/// The collision time is the midpoint of the first contact episode. The
/// pre-collision intensity averages the inbound window before t_col
/// (falling back to the whole resolved approach when the episode comes
/// too early for the window); the post-collision intensity averages the
/// settled window after t_col. Returns Ok(None) when no contact occurs;
/// errors when the run ends before the collision can be resolved.
pub fn detect_collision(
    right: &SolitonTrack,
    steps: u32,
) -> Result<Option<CollisionEvent>, AnalysisError> {
    if right.series.len() < MIN_TRACK_SAMPLES {
        return Err(AnalysisError::TrackTooShort {
            have: right.series.len(),
            need: MIN_TRACK_SAMPLES,
        });
    }
    let episodes = contact_episodes(right);
    let Some(first) = episodes.first() else {
        return Ok(None);
    };
    let Some(exit) = first.exit else {
        return Err(AnalysisError::RunTooShort {
            steps,
            t_col: first.enter,
            minimum_steps: first.enter + AFTER_WINDOW.0 + MIN_WINDOW_SAMPLES as u32 - 1,
        });
    };
    let t_col = (first.enter + exit) / 2;
    let resolved = resolution_time(right).expect("contact requires prior resolution");

    let before_lo = t_col.saturating_sub(BEFORE_WINDOW.0).max(resolved);
    let before_hi = t_col.saturating_sub(BEFORE_WINDOW.1);
    let mut before: Vec<f64> = right
        .series
        .iter()
        .filter(|p| p.t >= before_lo && p.t <= before_hi)
        .map(|p| p.intensity)
        .collect();
    if before.len() < 5 {
        before = right
            .series
            .iter()
            .filter(|p| p.t >= resolved && p.t < first.enter)
            .map(|p| p.intensity)
            .collect();
    }
    if before.is_empty() {
        return Ok(None);
    }

    let after_lo = t_col + AFTER_WINDOW.0;
    let after_hi = t_col + AFTER_WINDOW.1;
    let after: Vec<f64> = right
        .series
        .iter()
        .filter(|p| p.t >= after_lo && p.t <= after_hi)
        .map(|p| p.intensity)
        .collect();
    if after.len() < MIN_WINDOW_SAMPLES {
        return Err(AnalysisError::RunTooShort {
            steps,
            t_col,
            minimum_steps: after_lo + MIN_WINDOW_SAMPLES as u32 - 1,
        });
    }
    Ok(Some(CollisionEvent {
        t_col,
        intensity_before: mean(&before),
        intensity_after: mean(&after),
    }))
}

/// Ordinary least squares of y = 1/t_col against x = 1/alpha.
///
/// Input points are (alpha, t_col) pairs, all strictly positive.
pub fn fit_hyperbola(points: &[(f64, f64)]) -> Result<FitResult, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::InsufficientPoints { have: points.len() });
    }
    for &(alpha, t_col) in points {
        if !(alpha > 0.0 && t_col > 0.0) {
            return Err(AnalysisError::InvalidPoint { alpha, t_col });
        }
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(a, t)| (1.0 / a, 1.0 / t)).collect();
    let n = xy.len() as f64;
    let x_mean = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - x_mean).powi(2)).sum();
    if sxx <= 1e-20 * (x_mean * x_mean + 1.0) {
        return Err(AnalysisError::SingularFit);
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - x_mean) * (p.1 - y_mean)).sum();
    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    let ss_res: f64 = xy.iter().map(|p| (p.1 - (a * p.0 + b)).powi(2)).sum();
    let ss_tot: f64 = xy.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitResult {
        a,
        b,
        r2,
        alpha_i: -a / b,
    })
}

/// m_CM statistics of the last quarter of the run; None when the tail
/// holds no samples.
pub fn tail_stats(track: &SolitonTrack, steps: u32) -> Option<TailStats> {
    let from_t = steps - steps / 4;
    let tail: Vec<f64> = track
        .series
        .iter()
        .filter(|p| p.t >= from_t)
        .map(|p| p.m_cm)
        .collect();
    if tail.is_empty() {
        return None;
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &tail {
        min = min.min(v);
        max = max.max(v);
    }
    Some(TailStats {
        from_t,
        samples: tail.len(),
        mean: mean(&tail),
        range: max - min,
    })
}

/// True when the smoothed segment keeps moving outward through its end:
/// the last value sits within the drop threshold of the running maximum
/// and gained at least that much over the segment.
fn is_separating(samples: &[(u32, f64)]) -> bool {
    if samples.len() < 2 {
        return false;
    }
    let cm: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sm = moving_average(&cm, SMOOTHING_WINDOW);
    let max = sm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = *sm.last().unwrap();
    let first = sm[0];
    last >= max - TURNING_MIN_DROP && last - first >= TURNING_MIN_DROP
}

/// Assigns the dynamical phase from the right track of a symmetric run.
///
/// Refuses to guess (Indeterminate) when the track is too short, the
/// turning point falls in the final tenth of the run, or a contact sits
/// too close to the end to resolve what follows it. A launch that stays
/// merged past the birth-trap deadline and then separates cleanly counts
/// as a recollapse whose collision happened before the pair ever
/// resolved.
pub fn classify_phase(right: &SolitonTrack, steps: u32) -> Classification {
    let series = &right.series;
    if series.len() < MIN_TRACK_SAMPLES || steps < MIN_CLASSIFY_STEPS {
        return Classification::Indeterminate {
            reason: format!(
                "run of {} steps with {} track samples is too short to classify",
                steps,
                series.len()
            ),
        };
    }
    let samples: Vec<(u32, f64)> = series.iter().map(|p| (p.t, p.m_cm)).collect();
    let resolution = resolution_time(right);
    let episodes = contact_episodes(right);
    let turning = detect_turning_point(right).unwrap_or(None);

    if let Some((t_turn, _)) = turning {
        if t_turn as u64 * 10 >= steps as u64 * 9 {
            return Classification::Indeterminate {
                reason: format!(
                    "turning point at t = {t_turn} falls in the final 10% of {steps} steps"
                ),
            };
        }
    }
    if let Some(last) = episodes.last() {
        let end = last.exit.unwrap_or(steps);
        if steps - end < MIN_POST_SAMPLES as u32 {
            return Classification::Indeterminate {
                reason: format!(
                    "contact at t = {} is too close to the end of the run to resolve",
                    last.enter
                ),
            };
        }
    }

    let tail = tail_stats(right, steps);
    if let Some(t) = tail {
        if t.range < LOCALIZATION_BAND && t.mean.abs() > LOCALIZATION_MIN_CM {
            return Classification::Label(PhaseLabel::Chaotic {
                behavior: ChaoticBehavior::Localized { m_eq: t.mean },
            });
        }
    }

    let post_of = |from_t: u32| -> Vec<(u32, f64)> {
        samples.iter().filter(|s| s.0 >= from_t).copied().collect()
    };
    let n = samples.len();
    let tail_separating = is_separating(&samples[n - n / 4..]);

    match episodes.len() {
        0 => match resolution {
            Some(resolved) => {
                let merged_until = launch_contact_end(right).unwrap_or(0);
                if merged_until >= BIRTH_TRAP_MIN_T {
                    // Merged launch: the pair collided before it ever
                    // resolved, so a clean separation afterwards is a
                    // recollapse with an unmeasurable collision time.
                    let post = post_of(resolved);
                    if scan_turning(&post).is_none() && is_separating(&post) {
                        Classification::Label(PhaseLabel::Recollapse)
                    } else if tail_separating {
                        Classification::Label(PhaseLabel::Chaotic {
                            behavior: ChaoticBehavior::Escaping,
                        })
                    } else {
                        Classification::Label(PhaseLabel::Chaotic {
                            behavior: ChaoticBehavior::Oscillating,
                        })
                    }
                } else if turning.is_none() {
                    Classification::Label(PhaseLabel::Ballistic)
                } else if tail_separating {
                    Classification::Indeterminate {
                        reason: "track reversed without reaching contact; run too short to resolve"
                            .into(),
                    }
                } else {
                    Classification::Label(PhaseLabel::Chaotic {
                        behavior: ChaoticBehavior::Oscillating,
                    })
                }
            }
            None => Classification::Label(PhaseLabel::Chaotic {
                behavior: ChaoticBehavior::Oscillating,
            }),
        },
        1 => {
            let exit = episodes[0].exit.expect("unexited contact was caught above");
            let post = post_of(exit);
            if post.len() >= MIN_POST_SAMPLES
                && scan_turning(&post).is_none()
                && is_separating(&post)
            {
                Classification::Label(PhaseLabel::Recollapse)
            } else if tail_separating {
                Classification::Label(PhaseLabel::Chaotic {
                    behavior: ChaoticBehavior::Escaping,
                })
            } else {
                Classification::Label(PhaseLabel::Chaotic {
                    behavior: ChaoticBehavior::Oscillating,
                })
            }
        }
        _ => {
            if tail_separating {
                Classification::Label(PhaseLabel::Chaotic {
                    behavior: ChaoticBehavior::Escaping,
                })
            } else {
                Classification::Label(PhaseLabel::Chaotic {
                    behavior: ChaoticBehavior::Oscillating,
                })
            }
        }
    }
}

/// Onset of the window-intensity plateau: the first time after which the
/// smoothed intensity never leaves the band around its tail mean. None
/// when the series never settles (or is too short to judge).
///
/// Points are (t, window intensity); measure the intensity on a tight
/// core window (CORE_HALFWIDTH) so residual radiation near the origin
/// does not mask the plateau of a slow soliton.
pub fn plateau_onset(points: &[(u32, f64)]) -> Option<u32> {
    if points.len() < MIN_TRACK_SAMPLES {
        return None;
    }
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    let sm = moving_average(&values, SMOOTHING_WINDOW);
    let n = sm.len();
    let tail = &sm[n - (n / 10).max(1)..];
    let target = mean(tail);
    let mut last_bad = None;
    for (i, &v) in sm.iter().enumerate() {
        if (v - target).abs() > ONSET_BAND {
            last_bad = Some(i);
        }
    }
    match last_bad {
        None => Some(points[0].0),
        Some(i) if i + 1 < n => Some(points[i + 1].0),
        Some(_) => None,
    }
}

/// Mean outward velocity over the last third of a track: the slope of
/// m_CM between the first and last sample of that stretch.
pub fn mean_velocity(track: &SolitonTrack) -> Result<f64, AnalysisError> {
    let series = &track.series;
    if series.len() < MIN_TRACK_SAMPLES {
        return Err(AnalysisError::TrackTooShort {
            have: series.len(),
            need: MIN_TRACK_SAMPLES,
        });
    }
    let slice = &series[series.len() * 2 / 3..];
    let first = slice.first().unwrap();
    let last = slice.last().unwrap();
    Ok((last.m_cm - first.m_cm) / (last.t - first.t) as f64)
}

/// Runs a configuration at full time resolution and measures everything:
/// per-side tracks, sigma series, contact episodes, turning point,
/// collision, phase label.
///
/// `on_step` sees every step's probability distribution, regardless of the
/// config's artifact recording stride. Analysis shortfalls never fail the
/// run: a collision the run is too short to settle is reported through
/// `collision_error` with `collision` left empty.
pub fn analyze_run_with<F>(
    config: &SimConfig,
    halfwidth: i64,
    mut on_step: F,
) -> Result<RunAnalysis, WalkError>
where
    F: FnMut(&ProbabilityDist),
{
    let mut full = config.clone();
    full.record_every = 1;
    let mut left = SolitonTracker::new(Side::Left, halfwidth);
    let mut right = SolitonTracker::new(Side::Right, halfwidth);
    let mut sigma_series = Vec::with_capacity(config.steps as usize + 1);
    evolve_with(&full, |field| {
        let dist = ProbabilityDist::from_field(field);
        left.observe(&dist);
        right.observe(&dist);
        sigma_series.push((dist.t(), sigma(&dist)));
        on_step(&dist);
    })?;
    let left = left.finish();
    let right = right.finish();
    let resolution = resolution_time(&right);
    let episodes = contact_episodes(&right);
    let turning = detect_turning_point(&right).unwrap_or(None);
    let (collision, collision_error) = match detect_collision(&right, config.steps) {
        Ok(event) => (event, None),
        Err(err) => (None, Some(err)),
    };
    let classification = classify_phase(&right, config.steps);
    Ok(RunAnalysis {
        config: config.clone(),
        halfwidth,
        left,
        right,
        sigma: sigma_series,
        resolution,
        episodes,
        turning,
        collision,
        collision_error,
        classification,
    })
}

/// `analyze_run_with` without a streaming observer.
pub fn analyze_run(config: &SimConfig, halfwidth: i64) -> Result<RunAnalysis, WalkError> {
    analyze_run_with(config, halfwidth, |_| {})
}
