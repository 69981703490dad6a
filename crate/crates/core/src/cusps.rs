//! Plane-curve cusps, the canonical parameter and edge types of Bour data.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bour::{series, BourError};
use crate::expr::{DomainError, SmoothFn};
use crate::interp::{Hermite, InterpError};
use crate::jet::{factorial, jet_eval, Jet, JetError};
use crate::profile::EdgeData;
use crate::quad::{integrate, QuadError, QuadOptions};

pub const DEFAULT_CUSP_TOL: f64 = 1e-8;
/// Minimum jet order accepted by the classifier.
pub const MIN_CURVE_ORDER: usize = 7;
/// Radius around the singular point inside which the canonical parameter comes from its jet.
pub const CANONICAL_JET_BAND: f64 = 1e-3;
const CANONICAL_JET_ORDER: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CuspError {
    #[error("curve jets must share base and order, with order at least {MIN_CURVE_ORDER}")]
    BadJet,
    #[error("reparametrization is not a local diffeomorphism: phi'({base}) = {derivative:e}")]
    NotDiffeo { base: f64, derivative: f64 },
    #[error("curve does not have multiplicity {expected} at {u0}: {reason}")]
    WrongMultiplicity {
        expected: usize,
        u0: f64,
        reason: String,
    },
    #[error("edge classification is only available for k = 1, 2 (got k = {0})")]
    UnsupportedK(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Bour(#[from] BourError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CuspTag {
    #[serde(rename = "3/2")]
    Cusp32,
    #[serde(rename = "5/2")]
    Cusp52,
    #[serde(rename = "7/2")]
    Cusp72,
    #[serde(rename = "4/3")]
    Cusp43,
    #[serde(rename = "5/3")]
    Cusp53,
    #[serde(rename = "regular")]
    Regular,
    #[serde(rename = "undetermined")]
    Undetermined,
}

impl CuspTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CuspTag::Cusp32 => "3/2",
            CuspTag::Cusp52 => "5/2",
            CuspTag::Cusp72 => "7/2",
            CuspTag::Cusp43 => "4/3",
            CuspTag::Cusp53 => "5/3",
            CuspTag::Regular => "regular",
            CuspTag::Undetermined => "undetermined",
        }
    }
}

impl fmt::Display for CuspTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A classification with the decisive quantities that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspType {
    pub tag: CuspTag,
    pub witnesses: BTreeMap<String, f64>,
}

impl CuspType {
    fn new(tag: CuspTag, witnesses: BTreeMap<String, f64>) -> Self {
        CuspType { tag, witnesses }
    }

    pub fn witness(&self, name: &str) -> Option<f64> {
        self.witnesses.get(name).copied()
    }
}

type V2 = [f64; 2];

fn det2(a: V2, b: V2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot2(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm2(a: V2) -> f64 {
    a[0].hypot(a[1])
}

/// Jets of the two components of a plane curve at a common base point.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCurveJet {
    pub x: Jet,
    pub y: Jet,
}

impl PlaneCurveJet {
    pub fn new(x: Jet, y: Jet) -> Result<Self, CuspError> {
        if x.base() != y.base() || x.order() != y.order() || x.order() < MIN_CURVE_ORDER {
            return Err(CuspError::BadJet);
        }
        Ok(PlaneCurveJet { x, y })
    }

    pub fn from_fns(x: &SmoothFn, y: &SmoothFn, base: f64, order: usize) -> Result<Self, CuspError> {
        PlaneCurveJet::new(jet_eval(x, base, order)?, jet_eval(y, base, order)?)
    }

    pub fn base(&self) -> f64 {
        self.x.base()
    }

    pub fn order(&self) -> usize {
        self.x.order()
    }

    /// `γ^(j)(base)`.
    pub fn d(&self, j: usize) -> V2 {
        [self.x.derivative(j), self.y.derivative(j)]
    }

    pub fn scale(&self, lambda: f64) -> Self {
        PlaneCurveJet {
            x: self.x.scale(lambda),
            y: self.y.scale(lambda),
        }
    }

    /// `γ ∘ φ`, with `φ` expanded at the base and translated so it fixes the base.
    pub fn reparametrize(&self, phi: &SmoothFn) -> Result<(Self, Jet), CuspError> {
        let b = self.base();
        let pj = jet_eval(phi, b, self.order())?;
        let dphi = pj.coeff(1);
        if dphi.abs() < DEFAULT_CUSP_TOL {
            return Err(CuspError::NotDiffeo {
                base: b,
                derivative: dphi,
            });
        }
        let pj = pj.add_const(b - pj.value());
        Ok((
            PlaneCurveJet {
                x: self.x.compose(&pj),
                y: self.y.compose(&pj),
            },
            pj,
        ))
    }
}

/// Applies a target map `Φ` acting on the component jets.
pub fn map_target(c: &PlaneCurveJet, phi: impl Fn(&Jet, &Jet) -> (Jet, Jet)) -> Result<PlaneCurveJet, CuspError> {
    let (x, y) = phi(&c.x, &c.y);
    PlaneCurveJet::new(x, y)
}

struct Band {
    tol: f64,
}

impl Band {
    /// `|det(a, Σ cᵢ bᵢ)|` against `tol ‖a‖ Σ |cᵢ| ‖bᵢ‖`.
    fn det_nonzero(&self, a: V2, terms: &[(f64, V2)]) -> (f64, bool) {
        let mut b = [0.0, 0.0];
        let mut scale = 0.0;
        for &(c, v) in terms {
            b[0] += c * v[0];
            b[1] += c * v[1];
            scale += c.abs() * norm2(v);
        }
        let d = det2(a, b);
        (d, d.abs() > self.tol * norm2(a) * scale)
    }
}

/// Decision tree of the 3/2, 5/2, 7/2, 4/3 and 5/3 cusp criteria at the base point.
pub fn classify_plane_cusp(c: &PlaneCurveJet, tol: f64) -> CuspType {
    let g: Vec<V2> = (0..=MIN_CURVE_ORDER).map(|j| c.d(j)).collect();
    let band = Band { tol };
    let mut w = BTreeMap::new();
    let top = (1..=MIN_CURVE_ORDER).map(|j| norm2(g[j])).fold(0.0, f64::max);
    if top == 0.0 {
        return CuspType::new(CuspTag::Undetermined, w);
    }
    w.insert("speed".to_string(), norm2(g[1]));
    if norm2(g[1]) > tol * top {
        return CuspType::new(CuspTag::Regular, w);
    }
    let rest = (2..=MIN_CURVE_ORDER).map(|j| norm2(g[j])).fold(0.0, f64::max);
    if norm2(g[2]) > tol * rest {
        let (d23, ok) = band.det_nonzero(g[2], &[(1.0, g[3])]);
        w.insert("det23".into(), d23);
        if ok {
            return CuspType::new(CuspTag::Cusp32, w);
        }
        let n22 = dot2(g[2], g[2]);
        let c1 = dot2(g[3], g[2]) / n22;
        w.insert("c1".into(), c1);
        let (d25, ok) = band.det_nonzero(g[2], &[(3.0, g[5]), (-10.0 * c1, g[4])]);
        w.insert("det25".into(), d25);
        if ok {
            return CuspType::new(CuspTag::Cusp52, w);
        }
        let rem = [
            g[5][0] - 10.0 / 3.0 * c1 * g[4][0],
            g[5][1] - 10.0 / 3.0 * c1 * g[4][1],
        ];
        let c2 = dot2(rem, g[2]) / n22;
        w.insert("c2".into(), c2);
        let (d27, ok) = band.det_nonzero(
            g[2],
            &[
                (1.0, g[7]),
                (-7.0 * c1, g[6]),
                (-(7.0 * c2 - 70.0 / 3.0 * c1.powi(3)), g[4]),
            ],
        );
        w.insert("det27".into(), d27);
        if ok {
            return CuspType::new(CuspTag::Cusp72, w);
        }
        return CuspType::new(CuspTag::Undetermined, w);
    }
    let rest3 = (3..=MIN_CURVE_ORDER).map(|j| norm2(g[j])).fold(0.0, f64::max);
    if norm2(g[3]) > tol * rest3 {
        let (d34, ok) = band.det_nonzero(g[3], &[(1.0, g[4])]);
        w.insert("det34".into(), d34);
        if ok {
            return CuspType::new(CuspTag::Cusp43, w);
        }
        let (d35, ok) = band.det_nonzero(g[3], &[(1.0, g[5])]);
        w.insert("det35".into(), d35);
        if ok {
            return CuspType::new(CuspTag::Cusp53, w);
        }
    }
    CuspType::new(CuspTag::Undetermined, w)
}

/// Result of classifying a curve and its reparametrization `γ ∘ φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparamCheck {
    pub original: CuspType,
    pub reparametrized: CuspType,
    /// `c̄₁ = c₁φ' + 3φ''/φ'`, when the original has a `c₁` witness.
    pub predicted_c1: Option<f64>,
    pub recomputed_c1: Option<f64>,
}

impl ReparamCheck {
    pub fn tags_match(&self) -> bool {
        self.original.tag == self.reparametrized.tag
    }
}

pub fn reparam_invariance_check(c: &PlaneCurveJet, phi: &SmoothFn, tol: f64) -> Result<ReparamCheck, CuspError> {
    let original = classify_plane_cusp(c, tol);
    let (bar, pj) = c.reparametrize(phi)?;
    let reparametrized = classify_plane_cusp(&bar, tol);
    let (d1, d2) = (pj.derivative(1), pj.derivative(2));
    Ok(ReparamCheck {
        predicted_c1: original.witness("c1").map(|c1| c1 * d1 + 3.0 * d2 / d1),
        recomputed_c1: reparametrized.witness("c1"),
        original,
        reparametrized,
    })
}

/// A velocity field `u ↦ γ'(u)` (any dimension) with Taylor jets.
pub trait Velocity: Sync {
    fn dim(&self) -> usize;
    fn velocity(&self, u: f64) -> Result<Vec<f64>, CuspError>;
    /// Jets at `u0` of the velocity components.
    fn velocity_jets(&self, u0: f64, order: usize) -> Result<Vec<Jet>, CuspError>;

    fn speed(&self, u: f64) -> Result<f64, CuspError> {
        Ok(self.velocity(u)?.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// A plane curve given by two expressions.
#[derive(Debug, Clone)]
pub struct ExprCurve {
    pub x: SmoothFn,
    pub y: SmoothFn,
}

impl Velocity for ExprCurve {
    fn dim(&self) -> usize {
        2
    }

    fn velocity(&self, u: f64) -> Result<Vec<f64>, CuspError> {
        Ok(vec![self.x.eval_dual(u)?.1, self.y.eval_dual(u)?.1])
    }

    fn velocity_jets(&self, u0: f64, order: usize) -> Result<Vec<Jet>, CuspError> {
        Ok(vec![
            jet_eval(&self.x, u0, order + 1)?.differentiate(),
            jet_eval(&self.y, u0, order + 1)?.differentiate(),
        ])
    }
}

/// Tabulated canonical parameter `s(u)` with `‖dγ/ds‖ = |s|^k` and its inverse.
#[derive(Debug, Clone)]
pub struct CanonicalParameter {
    pub u0: f64,
    pub k: usize,
    forward: Hermite,
    inverse: Hermite,
    s_jet: Jet,
    u_jet: Jet,
}

impl CanonicalParameter {
    pub fn us(&self) -> &[f64] {
        self.forward.xs()
    }

    pub fn ss(&self) -> &[f64] {
        self.forward.ys()
    }

    /// Jet of `s(u)` at `u0`.
    pub fn s_jet(&self) -> &Jet {
        &self.s_jet
    }

    /// Jet of the inverse `u(s)` at `s = 0`.
    pub fn u_jet(&self) -> &Jet {
        &self.u_jet
    }

    pub fn s_of_u(&self, u: f64) -> f64 {
        if (u - self.u0).abs() < CANONICAL_JET_BAND {
            self.s_jet.eval(u)
        } else {
            self.forward.eval(u)
        }
    }

    pub fn ds_du(&self, u: f64) -> f64 {
        if (u - self.u0).abs() < CANONICAL_JET_BAND {
            self.s_jet.differentiate().eval(u)
        } else {
            self.forward.eval_with_slope(u).1
        }
    }

    pub fn u_of_s(&self, s: f64) -> f64 {
        if s.abs() < CANONICAL_JET_BAND * self.s_jet.coeff(1) {
            self.u_jet.eval(s)
        } else {
            self.inverse.eval(s)
        }
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.inverse.domain()
    }
}

/// Checks multiplicity `k + 1` at `u0` and returns the jets of `γ'/(u − u0)^k`.
fn reduced_velocity(v: &dyn Velocity, u0: f64, k: usize, order: usize) -> Result<Vec<Jet>, CuspError> {
    let jets = v.velocity_jets(u0, order + k)?;
    let size = |i: usize| jets.iter().map(|j| j.coeff(i).powi(2)).sum::<f64>().sqrt() * factorial(i);
    let scale = (0..=k + 2).map(size).fold(0.0, f64::max);
    for i in 0..k {
        if size(i) > DEFAULT_CUSP_TOL * scale {
            return Err(CuspError::WrongMultiplicity {
                expected: k + 1,
                u0,
                reason: format!("derivative of order {} does not vanish", i + 1),
            });
        }
    }
    if !(size(k) > DEFAULT_CUSP_TOL * scale) {
        return Err(CuspError::WrongMultiplicity {
            expected: k + 1,
            u0,
            reason: format!("derivative of order {} vanishes", k + 1),
        });
    }
    Ok(jets
        .iter()
        .map(|j| Jet::from_coeffs(u0, j.coeffs()[k..].to_vec()))
        .collect::<Result<_, _>>()?)
}

/// Jet of `s(u)` at `u0`: with `‖γ'‖ = |u − u0|^k g(u)`,
/// `s = δ [(k+1) ∫₀¹ τ^k g(u0 + τδ) dτ]^{1/(k+1)}`.
fn canonical_jet(reduced: &[Jet], k: usize) -> Result<Jet, CuspError> {
    let mut g2 = reduced[0].mul_jet(&reduced[0]);
    for j in &reduced[1..] {
        g2 = &g2 + &j.mul_jet(j);
    }
    let g = g2.sqrt()?;
    let kk = (k + 1) as f64;
    let coeffs = (0..=g.order())
        .map(|j| g.coeff(j) * kk / (kk + j as f64))
        .collect();
    let inner = Jet::from_coeffs(g.base(), coeffs)?.powf(1.0 / kk)?;
    Ok(inner.resize(inner.order() + 1).shift_up(1))
}

/// Canonical parameter of a curve with multiplicity `k + 1` at `u0 ∈ [lo, hi]`.
pub fn canonical_parameter(
    v: &dyn Velocity,
    u0: f64,
    k: usize,
    lo: f64,
    hi: f64,
    n_samples: usize,
) -> Result<CanonicalParameter, CuspError> {
    canonical_parameter_tol(v, u0, k, lo, hi, n_samples, 1e-13)
}

pub fn canonical_parameter_tol(
    v: &dyn Velocity,
    u0: f64,
    k: usize,
    lo: f64,
    hi: f64,
    n_samples: usize,
    quad_tol: f64,
) -> Result<CanonicalParameter, CuspError> {
    if !(lo <= u0 && u0 <= hi && lo < hi) || n_samples < 2 {
        return Err(CuspError::InvalidArgument(format!(
            "need lo <= u0 <= hi with lo < hi and at least 2 samples (got [{lo}, {hi}], u0 = {u0}, n = {n_samples})"
        )));
    }
    let reduced = reduced_velocity(v, u0, k, CANONICAL_JET_ORDER)?;
    let s_jet = canonical_jet(&reduced, k)?;
    let u_jet = s_jet.reversion()?;
    let ds_jet = s_jet.differentiate();

    let mut us: Vec<f64> = (0..n_samples)
        .map(|i| lo + (hi - lo) * i as f64 / (n_samples - 1) as f64)
        .collect();
    us[n_samples - 1] = hi;
    us.retain(|&u| (u - u0).abs() > 1e-12 * (hi - lo));
    let at = us.partition_point(|&u| u < u0);
    us.insert(at, u0);

    let kk = (k + 1) as f64;
    let opts = QuadOptions::with_tol(quad_tol);
    let mut ss = vec![0.0; us.len()];
    let mut ds = vec![0.0; us.len()];
    ds[at] = s_jet.coeff(1);
    let speed_err = std::cell::RefCell::new(None);
    let speed = |u: f64| match v.speed(u) {
        Ok(x) => x,
        Err(e) => {
            speed_err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    for dir in [1isize, -1] {
        let mut length = 0.0;
        let mut i = at as isize;
        loop {
            let next = i + dir;
            if next < 0 || next as usize >= us.len() {
                break;
            }
            let (a, b) = (us[i as usize], us[next as usize]);
            let piece = integrate(speed, a, b, &opts);
            if let Some(e) = speed_err.take() {
                return Err(e);
            }
            length += piece?.value.abs();
            let j = next as usize;
            let d = b - u0;
            if d.abs() < CANONICAL_JET_BAND {
                ss[j] = s_jet.eval(b);
                ds[j] = ds_jet.eval(b);
            } else {
                let s = d.signum() * (kk * length).powf(1.0 / kk);
                ss[j] = s;
                let sp = speed(b);
                if let Some(e) = speed_err.take() {
                    return Err(e);
                }
                ds[j] = sp / s.abs().powi(k as i32);
            }
            i = next;
        }
    }
    let inv_slopes: Vec<f64> = ds.iter().map(|d| 1.0 / d).collect();
    let inverse = Hermite::new(ss.clone(), us.clone(), inv_slopes)?;
    let forward = Hermite::new(us, ss, ds)?;
    Ok(CanonicalParameter {
        u0,
        k,
        forward,
        inverse,
        s_jet,
        u_jet,
    })
}

/// Edge type from the derivatives of `U` at 0 (k = 1, 2 only).
pub fn classify_edge(data: &EdgeData, tol: f64) -> Result<CuspType, CuspError> {
    let p = data.profile();
    let band = tol * p.u0().abs().max(1.0);
    let mut w = BTreeMap::new();
    let mut probe = |order: usize| {
        let v = p.u_derivative_at_zero(order);
        w.insert(format!("u{order}"), v);
        v.abs() > band
    };
    let tag = match data.k() {
        1 => {
            if probe(3) {
                CuspTag::Cusp32
            } else if probe(5) {
                CuspTag::Cusp52
            } else if probe(7) {
                CuspTag::Cusp72
            } else {
                CuspTag::Undetermined
            }
        }
        2 => {
            if probe(4) {
                CuspTag::Cusp43
            } else if probe(5) {
                CuspTag::Cusp53
            } else {
                CuspTag::Undetermined
            }
        }
        k => return Err(CuspError::UnsupportedK(k)),
    };
    Ok(CuspType::new(tag, w))
}

/// Jets at 0 of the profile curve `(x(s), z(s))`.
pub fn profile_curve_jet(data: &EdgeData) -> Result<PlaneCurveJet, CuspError> {
    let ser = series(data)?;
    let order = ser.x.order().min(ser.z.order());
    PlaneCurveJet::new(ser.x.truncate(order), ser.z.truncate(order))
}

/// Edge type from the cusp type of the profile curve.
pub fn classify_edge_via_profile(data: &EdgeData, tol: f64) -> Result<CuspType, CuspError> {
    Ok(classify_plane_cusp(&profile_curve_jet(data)?, tol))
}
