//! The Bour datum `{U, h, m, ε₀, ε₁, ε₂, k, J}` and its admissibility checks.
//!
//! The intrinsic part `{U, k, J}` lives in [`Profile`]; it fixes the first
//! fundamental form `s^{2k} ds² + U(s)² dt²`. An [`EdgeData`] adds the pitch
//! `h`, the homothety parameter `m` and the three signs, and is only
//! constructed once the radicand
//!
//! ```text
//! ρ_{h,m}(s)² = m²U(s)² − h² − m⁴U(s)²V(s)²,   U'(s) = s^k V(s)
//! ```
//!
//! is positive on all of `J`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, DomainError, ParseError, SmoothFn};
use crate::jet::{jet_eval, Jet, JetError, MAX_ORDER};

/// Relative zero band for "U^(i)(0) = 0" decisions, scaled by max(1, |U(0)|).
pub const DERIVATIVE_ZERO_TOL: f64 = 1e-9;
/// Inside this radius V is evaluated from its Taylor jet at 0.
pub const V_SWITCH_RADIUS: f64 = 1e-3;
pub const DEFAULT_STAR_SAMPLES: usize = 1024;
/// Width to which sign changes and minima of the radicand are refined.
pub const REFINE_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("U^({order})(0) = {value:e} does not vanish")]
    NonVanishingLowDerivative { order: usize, value: f64 },
    #[error("U({s}) = {value} is not positive")]
    NonPositiveU { s: f64, value: f64 },
    #[error("negative radicand {value:e} at s = {s}")]
    NegativeRadicand { s: f64, value: f64 },
    #[error("admissibility violated: {0}")]
    StarViolation(String),
    #[error("s = {s} lies outside J = [{lo}, {hi}]")]
    OutsideDomain { s: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A sign `±1`, serialized as the integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(format!("sign must be +1 or -1, got {v}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `n ≥ 2` equally spaced points including both ends.
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.hi
                } else {
                    self.lo + self.width() * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// The intrinsic part of a datum: `U`, `k` and the domain `J`.
#[derive(Debug, Clone)]
pub struct Profile {
    u: SmoothFn,
    k: usize,
    span: Interval,
    u_jet: Jet,
    v_jet: Jet,
}

impl Profile {
    /// Checks `k ≥ 1`, `0 ∈ J`, `U^(i)(0) = 0` for `i ≤ k` and `U > 0` on `J`.
    pub fn new(u: SmoothFn, k: usize, span: Interval) -> Result<Self, ProfileError> {
        if k == 0 {
            return Err(ProfileError::InvalidParameter("k must be at least 1".into()));
        }
        if k + 2 > MAX_ORDER {
            return Err(ProfileError::InvalidParameter(format!(
                "k = {k} exceeds the supported jet order"
            )));
        }
        if !(span.lo < span.hi) || !span.contains(0.0) {
            return Err(ProfileError::InvalidParameter(format!(
                "J = [{}, {}] must be a proper interval containing 0",
                span.lo, span.hi
            )));
        }
        let u_jet = jet_eval(&u, 0.0, MAX_ORDER)?;
        let band = DERIVATIVE_ZERO_TOL * u_jet.value().abs().max(1.0);
        for order in 1..=k {
            let value = u_jet.derivative(order);
            if value.abs() > band {
                return Err(ProfileError::NonVanishingLowDerivative { order, value });
            }
        }
        // V = U'/s^k; the low coefficients were just checked against the band
        let du = u_jet.differentiate();
        let v_jet = du.divide_by_power(k, band)?;
        let profile = Profile {
            u,
            k,
            span,
            u_jet,
            v_jet,
        };
        for s in span.linspace(DEFAULT_STAR_SAMPLES) {
            let value = profile.u_at(s)?;
            if !(value > 0.0) {
                return Err(ProfileError::NonPositiveU { s, value });
            }
        }
        Ok(profile)
    }

    pub fn u(&self) -> &SmoothFn {
        &self.u
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Edge type `n = k + 1`.
    pub fn n(&self) -> usize {
        self.k + 1
    }

    pub fn span(&self) -> Interval {
        self.span
    }

    /// Taylor jet of `U` at 0 (order [`MAX_ORDER`]).
    pub fn u_jet(&self) -> &Jet {
        &self.u_jet
    }

    /// Taylor jet of `V = U'/s^k` at 0.
    pub fn v_jet(&self) -> &Jet {
        &self.v_jet
    }

    pub fn u0(&self) -> f64 {
        self.u_jet.value()
    }

    pub fn v0(&self) -> f64 {
        self.v_jet.value()
    }

    /// `U^(i)(0)`.
    pub fn u_derivative_at_zero(&self, i: usize) -> f64 {
        self.u_jet.derivative(i)
    }

    /// Zero band shared by every `U^(i)(0) = 0` decision.
    pub fn zero_band(&self) -> f64 {
        DERIVATIVE_ZERO_TOL * self.u0().abs().max(1.0)
    }

    pub fn u_at(&self, s: f64) -> Result<f64, ProfileError> {
        Ok(self.u.eval(s)?)
    }

    pub fn v_at(&self, s: f64) -> Result<f64, ProfileError> {
        Ok(self.u_and_v(s)?.1)
    }

    /// `(U(s), V(s))`, switching to the jet of `V` near the removable singularity.
    pub fn u_and_v(&self, s: f64) -> Result<(f64, f64), ProfileError> {
        if s.abs() < V_SWITCH_RADIUS {
            return Ok((self.u.eval(s)?, self.v_jet.eval(s)));
        }
        let (u, du) = self.u.eval_dual(s)?;
        Ok((u, du / s.powi(self.k as i32)))
    }

    /// `m²U² − h² − m⁴U²V²` at `s`.
    pub fn radicand(&self, h: f64, m: f64, s: f64) -> Result<f64, ProfileError> {
        let (u, v) = self.u_and_v(s)?;
        Ok(radicand_from(u, v, h, m))
    }

    pub fn rho(&self, h: f64, m: f64, s: f64) -> Result<f64, ProfileError> {
        let r = self.radicand(h, m, s)?;
        if r < 0.0 {
            return Err(ProfileError::NegativeRadicand { s, value: r });
        }
        Ok(r.sqrt())
    }

    /// `ρ_{h,m}(0)` from the jets.
    pub fn rho0(&self, h: f64, m: f64) -> Result<f64, ProfileError> {
        let r = radicand_from(self.u0(), self.v0(), h, m);
        if r < 0.0 {
            return Err(ProfileError::NegativeRadicand { s: 0.0, value: r });
        }
        Ok(r.sqrt())
    }

    /// Checks `ρ_{h,m}² > 0` on `J`.
    pub fn check_star(&self, h: f64, m: f64, samples: usize) -> ValidationReport {
        check_star_impl(self, h, m, samples)
    }
}

pub(crate) fn radicand_from(u: f64, v: f64, h: f64, m: f64) -> f64 {
    let mu = m * u;
    mu * mu - h * h - mu * mu * m * m * v * v
}

/// A failed admissibility condition at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarFailure {
    pub condition: String,
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub star_ok: bool,
    /// Minimum of the radicand `ρ²` over the sampled points of `J`.
    pub rho_min: f64,
    pub failures: Vec<StarFailure>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.star_ok {
            return write!(f, "ok (min radicand {:e})", self.rho_min);
        }
        let parts: Vec<String> = self
            .failures
            .iter()
            .map(|x| format!("{} at s = {} (value {:e})", x.condition, x.s, x.value))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn check_star_impl(p: &Profile, h: f64, m: f64, samples: usize) -> ValidationReport {
    let samples = samples.max(16);
    let mut failures = Vec::new();
    let mut min = f64::INFINITY;
    let eval = |s: f64| p.radicand(h, m, s).ok().filter(|r| r.is_finite());

    let mut grid = p.span.linspace(samples);
    if !grid.contains(&0.0) {
        let at = grid.partition_point(|&x| x < 0.0);
        grid.insert(at, 0.0);
    }
    let values: Vec<Option<f64>> = grid.iter().map(|&s| eval(s)).collect();

    for (&s, v) in grid.iter().zip(&values) {
        match v {
            None => failures.push(StarFailure {
                condition: "radicand undefined".into(),
                s,
                value: f64::NAN,
            }),
            Some(v) => min = min.min(*v),
        }
    }
    match eval(0.0) {
        Some(r0) if r0 > 0.0 => {}
        Some(r0) => failures.push(StarFailure {
            condition: "rho(0) = 0".into(),
            s: 0.0,
            value: r0,
        }),
        None => {}
    }

    // sign changes: bisect to the crossing
    for i in 0..grid.len() - 1 {
        let (Some(a), Some(b)) = (values[i], values[i + 1]) else {
            continue;
        };
        if (a > 0.0) != (b > 0.0) {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let lo_positive = a > 0.0;
            while hi - lo > REFINE_WIDTH {
                let mid = 0.5 * (lo + hi);
                match eval(mid) {
                    Some(v) if (v > 0.0) == lo_positive => lo = mid,
                    _ => hi = mid,
                }
            }
            let s = 0.5 * (lo + hi);
            failures.push(StarFailure {
                condition: "radicand changes sign".into(),
                s,
                value: eval(s).unwrap_or(f64::NAN),
            });
        }
    }

    // interior local minima that stay positive on the grid may still dip below zero
    let scale = values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 1..grid.len() - 1 {
        let (Some(a), Some(b), Some(c)) = (values[i - 1], values[i], values[i + 1]) else {
            continue;
        };
        if !(b > 0.0 && b <= a && b <= c && b < 1e-3 * scale.max(1e-300)) {
            continue;
        }
        let (s, v) = golden_min(&eval, grid[i - 1], grid[i + 1]);
        min = min.min(v);
        if v <= 0.0 {
            failures.push(StarFailure {
                condition: "radicand non-positive between samples".into(),
                s,
                value: v,
            });
        }
    }

    let mut seen = Vec::<(String, f64)>::new();
    failures.retain(|f| {
        let key = (f.condition.clone(), f.s);
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    for f in &failures {
        if f.value.is_finite() {
            min = min.min(f.value);
        }
    }
    ValidationReport {
        star_ok: failures.is_empty(),
        rho_min: min,
        failures,
    }
}

fn golden_min(f: &impl Fn(f64) -> Option<f64>, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let val = |x: f64| f(x).unwrap_or(f64::NEG_INFINITY);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (val(c), val(d));
    while b - a > REFINE_WIDTH {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = val(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = val(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, val(s))
}

/// JSON form of a datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    #[serde(rename = "U")]
    pub u: String,
    pub h: f64,
    pub m: f64,
    pub eps0: Sign,
    pub eps1: Sign,
    pub eps2: Sign,
    pub k: usize,
    #[serde(rename = "J")]
    pub j: Interval,
}

/// A validated Bour datum.
#[derive(Debug, Clone)]
pub struct EdgeData {
    profile: Arc<Profile>,
    h: f64,
    m: f64,
    eps: [Sign; 3],
    pub(crate) series: OnceLock<Arc<crate::bour::BourSeries>>,
}

/// Builds and fully validates a datum.
#[allow(clippy::too_many_arguments)]
pub fn make_edge_data(
    u: SmoothFn,
    h: f64,
    m: f64,
    eps0: Sign,
    eps1: Sign,
    eps2: Sign,
    k: usize,
    span: Interval,
) -> Result<EdgeData, ProfileError> {
    let profile = Arc::new(Profile::new(u, k, span)?);
    EdgeData::new(profile, h, m, [eps0, eps1, eps2])
}

impl EdgeData {
    /// Validates `(h, m)` and the signs against an existing profile.
    pub fn new(profile: Arc<Profile>, h: f64, m: f64, eps: [Sign; 3]) -> Result<Self, ProfileError> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(ProfileError::InvalidParameter(format!("m = {m} must be positive")));
        }
        if !h.is_finite() {
            return Err(ProfileError::InvalidParameter(format!("h = {h} is not finite")));
        }
        let report = profile.check_star(h, m, DEFAULT_STAR_SAMPLES);
        if !report.star_ok {
            return Err(ProfileError::StarViolation(report.to_string()));
        }
        Ok(EdgeData {
            profile,
            h,
            m,
            eps,
            series: OnceLock::new(),
        })
    }

    pub fn from_spec(spec: &EdgeSpec) -> Result<Self, ProfileError> {
        make_edge_data(
            parse_expr(&spec.u)?,
            spec.h,
            spec.m,
            spec.eps0,
            spec.eps1,
            spec.eps2,
            spec.k,
            spec.j,
        )
    }

    pub fn to_spec(&self) -> EdgeSpec {
        EdgeSpec {
            u: self.profile.u().source_text().to_string(),
            h: self.h,
            m: self.m,
            eps0: self.eps[0],
            eps1: self.eps[1],
            eps2: self.eps[2],
            k: self.profile.k(),
            j: self.profile.span(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_spec()).expect("datum serializes")
    }

    /// Same profile and signs, new `(h, m)`.
    pub fn with_params(&self, h: f64, m: f64) -> Result<Self, ProfileError> {
        EdgeData::new(self.profile.clone(), h, m, self.eps)
    }

    /// Same profile and parameters, new signs (validation is sign-blind).
    pub fn with_signs(&self, eps0: Sign, eps1: Sign, eps2: Sign) -> Self {
        EdgeData {
            profile: self.profile.clone(),
            h: self.h,
            m: self.m,
            eps: [eps0, eps1, eps2],
            series: OnceLock::new(),
        }
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn shared_profile(&self) -> Arc<Profile> {
        self.profile.clone()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn k(&self) -> usize {
        self.profile.k()
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn eps0(&self) -> Sign {
        self.eps[0]
    }

    pub fn eps1(&self) -> Sign {
        self.eps[1]
    }

    pub fn eps2(&self) -> Sign {
        self.eps[2]
    }

    pub fn span(&self) -> Interval {
        self.profile.span()
    }

    pub fn u0(&self) -> f64 {
        self.profile.u0()
    }

    /// `ρ_{h,m}(s)`.
    pub fn rho(&self, s: f64) -> Result<f64, ProfileError> {
        self.profile.rho(self.h, self.m, s)
    }

    pub fn rho0(&self) -> f64 {
        self.profile
            .rho0(self.h, self.m)
            .expect("validated datum has positive rho(0)")
    }

    pub fn check_star(&self, samples: usize) -> ValidationReport {
        self.profile.check_star(self.h, self.m, samples)
    }

    pub(crate) fn check_in_span(&self, s: f64) -> Result<(), ProfileError> {
        let j = self.span();
        // small slack so grid endpoints computed in floating point are accepted
        let slack = 1e-12 * (1.0 + j.width());
        if s < j.lo - slack || s > j.hi + slack {
            return Err(ProfileError::OutsideDomain {
                s,
                lo: j.lo,
                hi: j.hi,
            });
        }
        Ok(())
    }
}
