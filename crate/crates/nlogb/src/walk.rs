//! Spinor walker on the integer lattice and its single-step evolution.
//!
//! A state holds one complex amplitude pair `(u_m, d_m)` per site `m`.
//! One step applies, in order: a per-site phase rule (for the Kerr rule
//! each spinor component picks up 2πα times its own probability, read
//! from the pre-step amplitudes), then a 2x2 unitary coin in the internal
//! space, then the conditional shift that moves `u` one site right and
//! `d` one site left. With the phase rule switched off this is the plain
//! coined walk; with the Kerr rule the evolution is nonlinear in the state.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Complex amplitude of one spinor component at one site.
pub type Amplitude = Complex64;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerance on the total probability of an initial condition.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on coin unitarity, max entry of |C†C - I|.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("initial condition has total probability {norm}, expected 1 within {tol:e}")]
    NotNormalized { norm: f64, tol: f64 },
    #[error("initial condition has a non-finite amplitude at m = {m}")]
    NonFiniteInitial { m: i64 },
    #[error("coin matrix is not unitary: max |C\u{2020}C - I| entry is {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("step from t = {t} would move amplitude outside the lattice [{m_min}, {m_max}]")]
    OutOfBounds { t: u32, m_min: i64, m_max: i64 },
    #[error("record_every must be at least 1")]
    ZeroRecordEvery,
}

/// 2x2 unitary acting on the internal (u, d) space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoinMatrix", into = "CoinMatrix")]
pub struct CoinOp {
    uu: Complex64,
    ud: Complex64,
    du: Complex64,
    dd: Complex64,
}

/// Row-major coin entries: `[[uu, ud], [du, dd]]`.
pub type CoinMatrix = [[Complex64; 2]; 2];

impl CoinOp {
    /// Builds a coin from its matrix, rejecting non-unitary input.
    pub fn new(m: CoinMatrix) -> Result<Self, WalkError> {
        let coin = CoinOp {
            uu: m[0][0],
            ud: m[0][1],
            du: m[1][0],
            dd: m[1][1],
        };
        let dev = coin.unitarity_deviation();
        if !(dev <= UNITARITY_TOL) {
            return Err(WalkError::NotUnitary { deviation: dev });
        }
        Ok(coin)
    }

    /// The balanced coin: u' = (u + d)/sqrt(2), d' = (u - d)/sqrt(2).
    pub fn hadamard() -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        CoinOp {
            uu: s,
            ud: s,
            du: s,
            dd: -s,
        }
    }

    /// Max entry of |C†C - I|; zero for an exactly unitary coin.
    pub fn unitarity_deviation(&self) -> f64 {
        let c00 = self.uu.conj() * self.uu + self.du.conj() * self.du;
        let c01 = self.uu.conj() * self.ud + self.du.conj() * self.dd;
        let c10 = self.ud.conj() * self.uu + self.dd.conj() * self.du;
        let c11 = self.ud.conj() * self.ud + self.dd.conj() * self.dd;
        let one = Complex64::new(1.0, 0.0);
        [(c00 - one).norm(), c01.norm(), c10.norm(), (c11 - one).norm()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> CoinMatrix {
        [[self.uu, self.ud], [self.du, self.dd]]
    }
}

impl Default for CoinOp {
    fn default() -> Self {
        CoinOp::hadamard()
    }
}

impl TryFrom<CoinMatrix> for CoinOp {
    type Error = String;
    fn try_from(m: CoinMatrix) -> Result<Self, String> {
        CoinOp::new(m).map_err(|e| e.to_string())
    }
}

impl From<CoinOp> for CoinMatrix {
    fn from(c: CoinOp) -> CoinMatrix {
        c.matrix()
    }
}

/// Arguments handed to a custom phase function for one site.
#[derive(Clone, Copy, Debug)]
pub struct PhaseInput {
    /// Lattice site.
    pub m: i64,
    /// Step index of the state the phase acts on.
    pub t: u32,
    /// |u_m|^2 before the phase is applied.
    pub p_u: f64,
    /// |d_m|^2 before the phase is applied.
    pub p_d: f64,
}

/// Signature of a user-supplied phase: returns the phase angle in radians.
pub type PhaseFn = dyn Fn(PhaseInput) -> f64 + Send + Sync;

/// Per-site phase applied to each spinor component before the coin.
#[derive(Clone)]
pub enum PhaseRule {
    /// No phase; the walk is the plain linear coined walk.
    None,
    /// Intensity-dependent phase: component c gains exp(i 2πα |c_m|^2).
    /// Negative alpha evolves the conjugate dynamics of positive alpha.
    Kerr { alpha: f64 },
    /// Site-linear phase m·phi0 on both components.
    Linear { phi0: f64 },
    /// Site-quadratic phase m^2·phi0 on both components.
    Quadratic { phi0: f64 },
    /// Arbitrary phases per component; not serializable.
    Custom { f_u: Arc<PhaseFn>, f_d: Arc<PhaseFn> },
}

impl PhaseRule {
    pub fn kerr(alpha: f64) -> Self {
        PhaseRule::Kerr { alpha }
    }

    pub fn custom<Fu, Fd>(f_u: Fu, f_d: Fd) -> Self
    where
        Fu: Fn(PhaseInput) -> f64 + Send + Sync + 'static,
        Fd: Fn(PhaseInput) -> f64 + Send + Sync + 'static,
    {
        PhaseRule::Custom {
            f_u: Arc::new(f_u),
            f_d: Arc::new(f_d),
        }
    }

    /// The Kerr coefficient when this is the Kerr rule.
    pub fn kerr_alpha(&self) -> Option<f64> {
        match self {
            PhaseRule::Kerr { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// Phase angles (F_u, F_d) for one site.
    fn phases(&self, input: PhaseInput) -> (f64, f64) {
        use std::f64::consts::TAU;
        match self {
            PhaseRule::None => (0.0, 0.0),
            PhaseRule::Kerr { alpha } => (TAU * alpha * input.p_u, TAU * alpha * input.p_d),
            PhaseRule::Linear { phi0 } => {
                let f = input.m as f64 * phi0;
                (f, f)
            }
            PhaseRule::Quadratic { phi0 } => {
                let f = (input.m as f64) * (input.m as f64) * phi0;
                (f, f)
            }
            PhaseRule::Custom { f_u, f_d } => (f_u(input), f_d(input)),
        }
    }
}

impl fmt::Debug for PhaseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseRule::None => f.write_str("None"),
            PhaseRule::Kerr { alpha } => f.debug_struct("Kerr").field("alpha", alpha).finish(),
            PhaseRule::Linear { phi0 } => f.debug_struct("Linear").field("phi0", phi0).finish(),
            PhaseRule::Quadratic { phi0 } => {
                f.debug_struct("Quadratic").field("phi0", phi0).finish()
            }
            PhaseRule::Custom { .. } => f.write_str("Custom { .. }"),
        }
    }
}

impl PartialEq for PhaseRule {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (PhaseRule::None, PhaseRule::None) => true,
            (PhaseRule::Kerr { alpha: a }, PhaseRule::Kerr { alpha: b }) => a == b,
            (PhaseRule::Linear { phi0: a }, PhaseRule::Linear { phi0: b }) => a == b,
            (PhaseRule::Quadratic { phi0: a }, PhaseRule::Quadratic { phi0: b }) => a == b,
            (
                PhaseRule::Custom { f_u: au, f_d: ad },
                PhaseRule::Custom { f_u: bu, f_d: bd },
            ) => Arc::ptr_eq(au, bu) && Arc::ptr_eq(ad, bd),
            _ => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
enum PhaseRuleRepr {
    None,
    Kerr { alpha: f64 },
    Linear { phi0: f64 },
    Quadratic { phi0: f64 },
}

impl Serialize for PhaseRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            PhaseRule::None => PhaseRuleRepr::None,
            PhaseRule::Kerr { alpha } => PhaseRuleRepr::Kerr { alpha: *alpha },
            PhaseRule::Linear { phi0 } => PhaseRuleRepr::Linear { phi0: *phi0 },
            PhaseRule::Quadratic { phi0 } => PhaseRuleRepr::Quadratic { phi0: *phi0 },
            PhaseRule::Custom { .. } => {
                return Err(S::Error::custom(
                    "custom phase rules hold arbitrary functions and cannot be serialized",
                ))
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhaseRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match PhaseRuleRepr::deserialize(d)? {
            PhaseRuleRepr::None => PhaseRule::None,
            PhaseRuleRepr::Kerr { alpha } => PhaseRule::Kerr { alpha },
            PhaseRuleRepr::Linear { phi0 } => PhaseRule::Linear { phi0 },
            PhaseRuleRepr::Quadratic { phi0 } => PhaseRule::Quadratic { phi0 },
        })
    }
}

/// Amplitudes of one site of a custom initial condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteAmplitude {
    pub m: i64,
    pub u: Complex64,
    pub d: Complex64,
}

/// State at t = 0. Custom states must carry total probability 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// (u_0, d_0) = (1, i)/sqrt(2): the walk spreads mirror-symmetrically.
    SymmetricDelta,
    /// (u_0, d_0) = (1, 0): the walk leans to the right.
    UpDelta,
    /// Explicit per-site amplitudes. Later entries overwrite earlier
    /// entries for the same site.
    Custom { sites: Vec<SiteAmplitude> },
}

impl InitialCondition {
    fn sites(&self) -> Vec<SiteAmplitude> {
        match self {
            InitialCondition::SymmetricDelta => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                vec![SiteAmplitude {
                    m: 0,
                    u: Complex64::new(s, 0.0),
                    d: Complex64::new(0.0, s),
                }]
            }
            InitialCondition::UpDelta => vec![SiteAmplitude {
                m: 0,
                u: Complex64::new(1.0, 0.0),
                d: CZERO,
            }],
            InitialCondition::Custom { sites } => sites.clone(),
        }
    }

    /// The same state with every amplitude conjugated. Evolving it at -alpha
    /// reproduces the site probabilities of the original state at +alpha.
    pub fn conjugated(&self) -> InitialCondition {
        let sites = self
            .sites()
            .into_iter()
            .map(|s| SiteAmplitude {
                m: s.m,
                u: s.u.conj(),
                d: s.d.conj(),
            })
            .collect();
        InitialCondition::Custom { sites }
    }
}

/// Everything that determines one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub phase: PhaseRule,
    pub coin: CoinOp,
    pub init: InitialCondition,
    /// Number of steps T; the lattice is sized so all T steps fit.
    pub steps: u32,
    /// Snapshot recording stride; t = 0 and t = T are always recorded.
    pub record_every: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            phase: PhaseRule::None,
            coin: CoinOp::hadamard(),
            init: InitialCondition::SymmetricDelta,
            steps: 300,
            record_every: 1,
        }
    }
}

impl SimConfig {
    /// Kerr run from the symmetric delta with default coin and recording.
    pub fn kerr(alpha: f64, steps: u32) -> Self {
        SimConfig {
            phase: PhaseRule::Kerr { alpha },
            steps,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        if self.record_every == 0 {
            return Err(WalkError::ZeroRecordEvery);
        }
        Ok(())
    }
}

/// Full spinor state at one step: dense amplitude arrays over the lattice.
///
/// `support()` is the envelope outside which all amplitudes are exactly
/// zero; it grows by one site per step, matching the light cone of a
/// delta-localized start.
#[derive(Clone, Debug)]
pub struct SpinorField {
    t: u32,
    m_min: i64,
    m_max: i64,
    lo: i64,
    hi: i64,
    u: Vec<Complex64>,
    d: Vec<Complex64>,
}

impl SpinorField {
    fn idx(&self, m: i64) -> usize {
        (m - self.m_min) as usize
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// Full lattice bounds (inclusive).
    pub fn lattice(&self) -> (i64, i64) {
        (self.m_min, self.m_max)
    }

    /// Envelope of possibly nonzero sites (inclusive).
    pub fn support(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    /// u amplitude at site m; zero outside the lattice.
    pub fn u(&self, m: i64) -> Complex64 {
        if m < self.m_min || m > self.m_max {
            CZERO
        } else {
            self.u[self.idx(m)]
        }
    }

    /// d amplitude at site m; zero outside the lattice.
    pub fn d(&self, m: i64) -> Complex64 {
        if m < self.m_min || m > self.m_max {
            CZERO
        } else {
            self.d[self.idx(m)]
        }
    }

    /// Total probability, sum of |u|^2 + |d|^2 over the lattice.
    pub fn norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for m in self.lo..=self.hi {
            let i = self.idx(m);
            total += self.u[i].norm_sqr() + self.d[i].norm_sqr();
        }
        total
    }
}

/// Builds the t = 0 state on a lattice wide enough for `steps` steps
/// (the init's occupied span padded by steps + 1 sites on each side).
pub fn make_initial(init: &InitialCondition, steps: u32) -> Result<SpinorField, WalkError> {
    let sites = init.sites();
    for s in &sites {
        let finite =
            s.u.re.is_finite() && s.u.im.is_finite() && s.d.re.is_finite() && s.d.im.is_finite();
        if !finite {
            return Err(WalkError::NonFiniteInitial { m: s.m });
        }
    }
    let norm: f64 = {
        // Resolve duplicate sites before measuring the norm.
        let mut probe = std::collections::BTreeMap::new();
        for s in &sites {
            probe.insert(s.m, (s.u, s.d));
        }
        probe
            .values()
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .sum()
    };
    if !((norm - 1.0).abs() <= NORM_TOL) {
        return Err(WalkError::NotNormalized {
            norm,
            tol: NORM_TOL,
        });
    }

    let occupied: Vec<i64> = sites
        .iter()
        .filter(|s| s.u.norm_sqr() > 0.0 || s.d.norm_sqr() > 0.0)
        .map(|s| s.m)
        .collect();
    let lo0 = occupied.iter().copied().min().unwrap_or(0);
    let hi0 = occupied.iter().copied().max().unwrap_or(0);

    let margin = steps as i64 + 1;
    let m_min = lo0 - margin;
    let m_max = hi0 + margin;
    let len = (m_max - m_min + 1) as usize;
    let mut field = SpinorField {
        t: 0,
        m_min,
        m_max,
        lo: lo0,
        hi: hi0,
        u: vec![CZERO; len],
        d: vec![CZERO; len],
    };
    for s in &sites {
        let i = field.idx(s.m);
        field.u[i] = s.u;
        field.d[i] = s.d;
    }
    Ok(field)
}

/// Applies the phase rule to every site, reading all probabilities from
/// the input state. Pure map: site moduli are unchanged.
pub fn apply_phase(field: &SpinorField, rule: &PhaseRule) -> SpinorField {
    if matches!(rule, PhaseRule::None) {
        return field.clone();
    }
    let mut out = field.clone();
    for m in field.lo..=field.hi {
        let i = field.idx(m);
        let u = field.u[i];
        let d = field.d[i];
        let (fu, fd) = rule.phases(PhaseInput {
            m,
            t: field.t,
            p_u: u.norm_sqr(),
            p_d: d.norm_sqr(),
        });
        out.u[i] = u * Complex64::from_polar(1.0, fu);
        out.d[i] = d * Complex64::from_polar(1.0, fd);
    }
    out
}

/// One full step: phase, coin, then conditional shift.
///
/// Errors if the support would leave the lattice; a field built by
/// `make_initial` for T steps never hits this before step T + 1.
pub fn step(field: &SpinorField, config: &SimConfig) -> Result<SpinorField, WalkError> {
    let (lo, hi) = (field.lo, field.hi);
    if lo - 1 < field.m_min || hi + 1 > field.m_max {
        return Err(WalkError::OutOfBounds {
            t: field.t,
            m_min: field.m_min,
            m_max: field.m_max,
        });
    }
    let phased = apply_phase(field, &config.phase);
    let c = &config.coin;
    let mut u_out = vec![CZERO; field.u.len()];
    let mut d_out = vec![CZERO; field.d.len()];
    for m in (lo - 1)..=(hi + 1) {
        let i = field.idx(m);
        u_out[i] = c.uu * phased.u(m - 1) + c.ud * phased.d(m - 1);
        d_out[i] = c.du * phased.u(m + 1) + c.dd * phased.d(m + 1);
    }
    Ok(SpinorField {
        t: field.t + 1,
        m_min: field.m_min,
        m_max: field.m_max,
        lo: lo - 1,
        hi: hi + 1,
        u: u_out,
        d: d_out,
    })
}

/// Runs the walk for `config.steps` steps, invoking `record` on the state
/// at t = 0, at every `record_every`-th step, and at the final step.
pub fn evolve_with<F>(config: &SimConfig, mut record: F) -> Result<(), WalkError>
where
    F: FnMut(&SpinorField),
{
    config.validate()?;
    let mut field = make_initial(&config.init, config.steps)?;
    record(&field);
    for t in 1..=config.steps {
        field = step(&field, config)?;
        if t % config.record_every == 0 || t == config.steps {
            record(&field);
        }
    }
    Ok(())
}

/// Like `evolve_with`, collecting the recorded snapshots.
pub fn evolve(config: &SimConfig) -> Result<Vec<SpinorField>, WalkError> {
    let mut snapshots = Vec::new();
    evolve_with(config, |field| snapshots.push(field.clone()))?;
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn p(field: &SpinorField, m: i64) -> f64 {
        field.u(m).norm_sqr() + field.d(m).norm_sqr()
    }

    #[test]
    fn initial_symmetric_delta() {
        let field = make_initial(&InitialCondition::SymmetricDelta, 10).unwrap();
        assert_eq!(field.t(), 0);
        assert_eq!(field.lattice(), (-11, 11));
        assert_eq!(field.support(), (0, 0));
        assert_eq!(field.u(0), Complex64::new(FRAC_1_SQRT_2, 0.0));
        assert_eq!(field.d(0), Complex64::new(0.0, FRAC_1_SQRT_2));
        assert!((field.norm_sq() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn initial_custom_accepts_unit_norm() {
        let init = InitialCondition::Custom {
            sites: vec![SiteAmplitude {
                m: 3,
                u: Complex64::new(0.6, 0.0),
                d: Complex64::new(0.0, 0.8),
            }],
        };
        let field = make_initial(&init, 5).unwrap();
        assert_eq!(field.support(), (3, 3));
        assert_eq!(field.lattice(), (-3, 9));
    }

    #[test]
    fn initial_custom_rejects_bad_norm() {
        let init = InitialCondition::Custom {
            sites: vec![SiteAmplitude {
                m: 0,
                u: Complex64::new(0.6, 0.0),
                d: Complex64::new(0.0, 0.6),
            }],
        };
        match make_initial(&init, 5) {
            Err(WalkError::NotNormalized { norm, .. }) => assert!((norm - 0.72).abs() < 1e-15),
            other => panic!("expected NotNormalized, got {other:?}"),
        }
    }

    #[test]
    fn initial_custom_rejects_non_finite() {
        let init = InitialCondition::Custom {
            sites: vec![SiteAmplitude {
                m: 1,
                u: Complex64::new(f64::NAN, 0.0),
                d: CZERO,
            }],
        };
        assert!(matches!(
            make_initial(&init, 5),
            Err(WalkError::NonFiniteInitial { m: 1 })
        ));
    }

    #[test]
    fn kerr_phase_half_turn_flips_sign() {
        // 2π · 0.5 · |1|² = π, so a unit amplitude changes sign.
        let init = InitialCondition::UpDelta;
        let field = make_initial(&init, 2).unwrap();
        let phased = apply_phase(&field, &PhaseRule::kerr(0.5));
        assert!((phased.u(0) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kerr_phase_preserves_site_probability() {
        let init = InitialCondition::SymmetricDelta;
        let field = make_initial(&init, 2).unwrap();
        let phased = apply_phase(&field, &PhaseRule::kerr(0.37));
        assert!((phased.u(0).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((phased.d(0).norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_phase_matches_direct_formula() {
        let init = InitialCondition::Custom {
            sites: vec![SiteAmplitude {
                m: 3,
                u: Complex64::new(1.0, 0.0),
                d: CZERO,
            }],
        };
        let field = make_initial(&init, 1).unwrap();
        let phased = apply_phase(&field, &PhaseRule::Linear { phi0: 0.2 });
        let expected = Complex64::from_polar(1.0, 0.6);
        assert!((phased.u(3) - expected).norm() < 1e-15);
    }

    #[test]
    fn custom_phase_reproduces_linear_rule() {
        let config_linear = SimConfig {
            phase: PhaseRule::Linear { phi0: 0.31 },
            steps: 20,
            ..SimConfig::default()
        };
        let config_custom = SimConfig {
            phase: PhaseRule::custom(
                |i: PhaseInput| i.m as f64 * 0.31,
                |i: PhaseInput| i.m as f64 * 0.31,
            ),
            steps: 20,
            ..SimConfig::default()
        };
        let a = evolve(&config_linear).unwrap();
        let b = evolve(&config_custom).unwrap();
        for (fa, fb) in a.iter().zip(&b) {
            for m in -21..=21 {
                assert_eq!(fa.u(m), fb.u(m));
                assert_eq!(fa.d(m), fb.d(m));
            }
        }
    }

    #[test]
    fn one_step_from_symmetric_delta_splits_evenly() {
        // Both components start with probability 1/2, so the phase rule
        // multiplies the whole site by one unit-modulus factor and the
        // split is 1/2 each way for every alpha.
        for alpha in [0.0, 0.37, 0.5] {
            let config = SimConfig::kerr(alpha, 1);
            let field = make_initial(&config.init, 1).unwrap();
            let next = step(&field, &config).unwrap();
            assert_eq!(next.t(), 1);
            assert!((p(&next, 1) - 0.5).abs() < 1e-15, "alpha = {alpha}");
            assert!((p(&next, -1) - 0.5).abs() < 1e-15, "alpha = {alpha}");
            assert!(p(&next, 0).abs() < 1e-30);
        }
    }

    #[test]
    fn two_steps_from_symmetric_delta_any_alpha() {
        // Through t = 2 all occupied sites share |amplitude|² = 1/2 per
        // component, so Kerr phases stay global and probabilities are
        // alpha-independent: {1/4, 1/2, 1/4} at m = {2, 0, -2}.
        for alpha in [0.0, 0.4] {
            let config = SimConfig::kerr(alpha, 2);
            let snapshots = evolve(&config).unwrap();
            let last = snapshots.last().unwrap();
            assert!((p(last, 2) - 0.25).abs() < 1e-15);
            assert!((p(last, 0) - 0.5).abs() < 1e-15);
            assert!((p(last, -2) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_steps_from_up_delta_linear_walk() {
        let config = SimConfig {
            init: InitialCondition::UpDelta,
            steps: 2,
            ..SimConfig::default()
        };
        let snapshots = evolve(&config).unwrap();
        let last = snapshots.last().unwrap();
        assert!((p(last, 2) - 0.25).abs() < 1e-15);
        assert!((p(last, 0) - 0.5).abs() < 1e-15);
        assert!((p(last, -2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn step_past_lattice_bounds_errors() {
        let config = SimConfig {
            steps: 0,
            ..SimConfig::default()
        };
        let field = make_initial(&config.init, 0).unwrap();
        // Lattice is [-1, 1]: one step fits, the second does not.
        let next = step(&field, &config).unwrap();
        assert!(matches!(
            step(&next, &config),
            Err(WalkError::OutOfBounds { t: 1, .. })
        ));
    }

    #[test]
    fn evolve_records_schedule_and_final_step() {
        let config = SimConfig {
            steps: 10,
            record_every: 4,
            ..SimConfig::default()
        };
        let snapshots = evolve(&config).unwrap();
        let ts: Vec<u32> = snapshots.iter().map(|f| f.t()).collect();
        assert_eq!(ts, vec![0, 4, 8, 10]);
    }

    #[test]
    fn evolve_zero_steps_is_initial_state() {
        let config = SimConfig {
            steps: 0,
            ..SimConfig::default()
        };
        let snapshots = evolve(&config).unwrap();
        assert_eq!(snapshots.len(), 1);
        assert_eq!(snapshots[0].t(), 0);
    }

    #[test]
    fn evolve_rejects_zero_record_every() {
        let config = SimConfig {
            record_every: 0,
            ..SimConfig::default()
        };
        assert!(matches!(evolve(&config), Err(WalkError::ZeroRecordEvery)));
    }

    #[test]
    fn hadamard_coin_is_unitary() {
        assert!(CoinOp::hadamard().unitarity_deviation() < 1e-15);
        assert!(CoinOp::new(CoinOp::hadamard().matrix()).is_ok());
    }

    #[test]
    fn non_unitary_coin_rejected() {
        let s = Complex64::new(0.9, 0.0);
        let m = [[s, s], [s, -s]];
        assert!(matches!(
            CoinOp::new(m),
            Err(WalkError::NotUnitary { .. })
        ));
    }

    #[test]
    fn conjugated_initial_condition() {
        let conj = InitialCondition::SymmetricDelta.conjugated();
        let field = make_initial(&conj, 1).unwrap();
        assert_eq!(field.u(0), Complex64::new(FRAC_1_SQRT_2, 0.0));
        assert_eq!(field.d(0), Complex64::new(0.0, -FRAC_1_SQRT_2));
    }

    #[test]
    fn phase_rule_serde_round_trip() {
        for rule in [
            PhaseRule::None,
            PhaseRule::kerr(0.49),
            PhaseRule::Linear { phi0: 0.1 },
            PhaseRule::Quadratic { phi0: -0.25 },
        ] {
            let json = serde_json::to_string(&rule).unwrap();
            let back: PhaseRule = serde_json::from_str(&json).unwrap();
            assert_eq!(rule, back);
        }
    }

    #[test]
    fn custom_phase_rule_does_not_serialize() {
        let rule = PhaseRule::custom(|_| 0.0, |_| 0.0);
        assert!(serde_json::to_string(&rule).is_err());
    }

    #[test]
    fn sim_config_serde_round_trip_is_exact() {
        let config = SimConfig {
            phase: PhaseRule::kerr(0.6669),
            coin: CoinOp::hadamard(),
            init: InitialCondition::Custom {
                sites: vec![SiteAmplitude {
                    m: -2,
                    u: Complex64::new(0.123_456_789_012_345_67, -0.5),
                    d: Complex64::new(0.3, 0.7),
                }],
            },
            steps: 12345,
            record_every: 7,
        };
        // The custom site above is not normalized; serde round-tripping
        // does not validate, only make_initial does.
        let json = serde_json::to_string(&config).unwrap();
        let back: SimConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }
}
