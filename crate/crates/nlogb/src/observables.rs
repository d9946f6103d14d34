//! Measured quantities: site probabilities, spread, peak location, and
//! windowed soliton tracks.
//!
//! A soliton is read off the probability distribution as the window
//! [m_peak - dm, m_peak + dm] around a local probability maximum; its
//! position is the probability-weighted center of mass of the window and
//! its intensity the window's total probability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::walk::SpinorField;

/// A window must hold at least this much probability to define a
/// center of mass.
pub const WINDOW_MIN_MASS: f64 = 1e-15;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ObservablesError {
    #[error("region [{lo}, {hi}] is empty")]
    EmptyRegion { lo: i64, hi: i64 },
    #[error("region [{lo}, {hi}] holds no probability")]
    AllZeroRegion { lo: i64, hi: i64 },
    #[error("window around m = {m_peak} holds {mass:e}, below {min:e}")]
    EmptyWindow { m_peak: i64, mass: f64, min: f64 },
}

/// Site probabilities of one snapshot over its support, split by spinor
/// component: p = p_u + p_d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDist {
    t: u32,
    m_lo: i64,
    p_u: Vec<f64>,
    p_d: Vec<f64>,
}

impl ProbabilityDist {
    pub fn from_field(field: &SpinorField) -> Self {
        let (lo, hi) = field.support();
        let len = (hi - lo + 1) as usize;
        let mut p_u = Vec::with_capacity(len);
        let mut p_d = Vec::with_capacity(len);
        for m in lo..=hi {
            p_u.push(field.u(m).norm_sqr());
            p_d.push(field.d(m).norm_sqr());
        }
        ProbabilityDist {
            t: field.t(),
            m_lo: lo,
            p_u,
            p_d,
        }
    }

    /// Builds a distribution directly from per-component probabilities
    /// starting at site `m_lo`. Both slices must have equal length and the
    /// values are expected to sum to roughly 1.
    pub fn from_parts(t: u32, m_lo: i64, p_u: Vec<f64>, p_d: Vec<f64>) -> Self {
        assert_eq!(p_u.len(), p_d.len());
        ProbabilityDist { t, m_lo, p_u, p_d }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn m_lo(&self) -> i64 {
        self.m_lo
    }

    pub fn m_hi(&self) -> i64 {
        self.m_lo + self.p_u.len() as i64 - 1
    }

    /// Total probability at site m; zero outside the stored range.
    pub fn p(&self, m: i64) -> f64 {
        if m < self.m_lo || m > self.m_hi() {
            0.0
        } else {
            let i = (m - self.m_lo) as usize;
            self.p_u[i] + self.p_d[i]
        }
    }

    pub fn p_u(&self, m: i64) -> f64 {
        if m < self.m_lo || m > self.m_hi() {
            0.0
        } else {
            self.p_u[(m - self.m_lo) as usize]
        }
    }

    pub fn p_d(&self, m: i64) -> f64 {
        if m < self.m_lo || m > self.m_hi() {
            0.0
        } else {
            self.p_d[(m - self.m_lo) as usize]
        }
    }

    /// Rows (m, p, p_u, p_d) in ascending m over the stored range.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64, f64, f64)> + '_ {
        (self.m_lo..=self.m_hi()).map(|m| (m, self.p(m), self.p_u(m), self.p_d(m)))
    }

    pub fn total(&self) -> f64 {
        self.p_u.iter().sum::<f64>() + self.p_d.iter().sum::<f64>()
    }
}

/// Site probabilities of a snapshot.
pub fn probability(field: &SpinorField) -> ProbabilityDist {
    ProbabilityDist::from_field(field)
}

/// Standard deviation of position: sqrt(Σ m²p - (Σ m p)²).
pub fn sigma(dist: &ProbabilityDist) -> f64 {
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for (m, p, _, _) in dist.iter() {
        let mf = m as f64;
        mean += mf * p;
        mean_sq += mf * mf * p;
    }
    (mean_sq - mean * mean).max(0.0).sqrt()
}

/// Site of maximum probability within `region` (inclusive bounds).
///
/// Exact ties break toward the outermost site (largest |m|); a tie
/// between -m and +m breaks toward +m.
pub fn peak_position(dist: &ProbabilityDist, region: (i64, i64)) -> Result<i64, ObservablesError> {
    let (lo, hi) = region;
    if lo > hi {
        return Err(ObservablesError::EmptyRegion { lo, hi });
    }
    let scan_lo = lo.max(dist.m_lo());
    let scan_hi = hi.min(dist.m_hi());
    let mut best: Option<(i64, f64)> = None;
    for m in scan_lo..=scan_hi {
        let p = dist.p(m);
        let better = match best {
            None => p > 0.0,
            Some((bm, bp)) => {
                p > bp || (p == bp && (m.abs() > bm.abs() || (m.abs() == bm.abs() && m > bm)))
            }
        };
        if better {
            best = Some((m, p));
        }
    }
    best.map(|(m, _)| m)
        .ok_or(ObservablesError::AllZeroRegion { lo, hi })
}

/// Probability-weighted mean position over the window
/// [m_peak - halfwidth, m_peak + halfwidth], clamped to the lattice and
/// normalized by the window's own probability.
pub fn center_of_mass(
    dist: &ProbabilityDist,
    m_peak: i64,
    halfwidth: i64,
) -> Result<f64, ObservablesError> {
    let lo = (m_peak - halfwidth).max(dist.m_lo());
    let hi = (m_peak + halfwidth).min(dist.m_hi());
    let mut mass = 0.0;
    let mut moment = 0.0;
    for m in lo..=hi {
        let p = dist.p(m);
        mass += p;
        moment += m as f64 * p;
    }
    if mass < WINDOW_MIN_MASS {
        return Err(ObservablesError::EmptyWindow {
            m_peak,
            mass,
            min: WINDOW_MIN_MASS,
        });
    }
    Ok(moment / mass)
}

/// Total probability in the window [m_peak - halfwidth, m_peak + halfwidth]
/// clamped to the lattice.
pub fn soliton_intensity(dist: &ProbabilityDist, m_peak: i64, halfwidth: i64) -> f64 {
    let lo = (m_peak - halfwidth).max(dist.m_lo());
    let hi = (m_peak + halfwidth).min(dist.m_hi());
    let mut mass = 0.0;
    for m in lo..=hi {
        mass += dist.p(m);
    }
    mass
}

/// Which half of the lattice a track is assigned to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> i64 {
        match self {
            Side::Left => -1,
            Side::Right => 1,
        }
    }
}

/// One tracked sample: peak site, window center of mass, window intensity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: u32,
    pub m_peak: i64,
    pub m_cm: f64,
    pub intensity: f64,
}

/// Time series of one tracked soliton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonTrack {
    pub side: Side,
    pub window_halfwidth: i64,
    pub series: Vec<TrackPoint>,
}

/// Incremental per-snapshot soliton tracker for one side.
///
/// While the tracked structure is away from the origin the peak search
/// covers the whole assigned half-lattice (m >= 1 on the right, m <= -1 on
/// the left). Once a previously escaped soliton comes back within
/// halfwidth + 2 sites of the origin, the search narrows to that
/// neighborhood of the last center of mass so the track follows its own
/// soliton through a collision instead of re-locking globally.
#[derive(Clone, Debug)]
pub struct SolitonTracker {
    side: Side,
    halfwidth: i64,
    prev_xi: Option<f64>,
    locked_out: bool,
    series: Vec<TrackPoint>,
}

impl SolitonTracker {
    pub fn new(side: Side, halfwidth: i64) -> Self {
        SolitonTracker {
            side,
            halfwidth,
            prev_xi: None,
            locked_out: false,
            series: Vec::new(),
        }
    }

    /// Feeds one snapshot. Snapshots where no peak or center of mass is
    /// defined leave a gap in the series.
    pub fn observe(&mut self, dist: &ProbabilityDist) {
        let s = self.side.sign();
        let reach = self.halfwidth + 2;
        // Region in signed coordinates xi = s * m; the track lives at xi > 0.
        let region_xi = match self.prev_xi {
            Some(xi) if self.locked_out && xi.abs() <= reach as f64 => {
                let c = xi.round() as i64;
                (c - reach, c + reach)
            }
            _ => {
                let xi_hi = match self.side {
                    Side::Right => dist.m_hi(),
                    Side::Left => -dist.m_lo(),
                };
                (1, xi_hi)
            }
        };
        if region_xi.0 > region_xi.1 {
            return;
        }
        let Some(m_peak) = self.directed_peak(dist, region_xi) else {
            return;
        };
        let Ok(m_cm) = center_of_mass(dist, m_peak, self.halfwidth) else {
            return;
        };
        let intensity = soliton_intensity(dist, m_peak, self.halfwidth);
        let xi = s as f64 * m_cm;
        if xi > reach as f64 {
            self.locked_out = true;
        }
        self.prev_xi = Some(xi);
        self.series.push(TrackPoint {
            t: dist.t(),
            m_peak,
            m_cm,
            intensity,
        });
    }

    /// Argmax of p over xi in [region.0, region.1]; exact ties break toward
    /// larger xi, i.e. outward on this track's side.
    fn directed_peak(&self, dist: &ProbabilityDist, region_xi: (i64, i64)) -> Option<i64> {
        let s = self.side.sign();
        let mut best: Option<(i64, f64)> = None;
        for xi in region_xi.0..=region_xi.1 {
            let m = s * xi;
            let p = dist.p(m);
            let better = match best {
                None => p > 0.0,
                Some((_, bp)) => p >= bp,
            };
            if better && p > 0.0 {
                best = Some((xi, p));
            }
        }
        best.map(|(xi, _)| s * xi)
    }

    pub fn finish(self) -> SolitonTrack {
        SolitonTrack {
            side: self.side,
            window_halfwidth: self.halfwidth,
            series: self.series,
        }
    }
}

/// Tracks the left-moving and right-moving structures across a run's
/// snapshots. Returns (left, right).
pub fn track_solitons(snapshots: &[SpinorField], halfwidth: i64) -> (SolitonTrack, SolitonTrack) {
    let mut left = SolitonTracker::new(Side::Left, halfwidth);
    let mut right = SolitonTracker::new(Side::Right, halfwidth);
    for field in snapshots {
        let dist = ProbabilityDist::from_field(field);
        left.observe(&dist);
        right.observe(&dist);
    }
    (left.finish(), right.finish())
}
