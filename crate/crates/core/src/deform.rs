//! Isometric deformations `(h, m) ↦ Ψ_{[U,h,m,ε₀,ε₁,ε₂]}` and sign isomers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bour::{first_fundamental_form_tol, psi, BourError, FundamentalForm};
use crate::cusps::{classify_edge, CuspError, CuspTag, DEFAULT_CUSP_TOL};
use crate::invariants::{kappa_nu, kappa_t};
use crate::profile::{radicand_from, EdgeData, Interval, Profile, ProfileError, Sign};

pub const METRIC_SAMPLES: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const METRIC_QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeformError {
    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solution (h, m) = ({h}, {m}) is not admissible: {reason}")]
    StarViolation { h: f64, m: f64, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Bour(#[from] BourError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Cusp(#[from] CuspError),
}

/// `(κ_ν, κ_t)` of a datum.
pub fn invariant_map(data: &EdgeData) -> (f64, f64) {
    (kappa_nu(data), kappa_t(data))
}

/// Closed-form `(κ_ν, κ_t)` at `(h, m)` for a profile, without checking all of `J`.
/// `None` when `ρ_{h,m}(0)² ≤ 0` or `m ≤ 0`.
pub fn invariant_map_at(profile: &Profile, h: f64, m: f64) -> Option<(f64, f64)> {
    let (u0, v0) = (profile.u0(), profile.v0());
    let r2 = radicand_from(u0, v0, h, m);
    if !(r2 > 0.0) || !(m > 0.0) {
        return None;
    }
    let d = m * m * u0 * u0;
    Some((r2.sqrt() / d, h / d))
}

/// `1/(m³ ρ(0) U(0)²)`.
pub fn jacobian_det(data: &EdgeData) -> f64 {
    let u0 = data.u0();
    1.0 / (data.m().powi(3) * data.rho0() * u0 * u0)
}

/// `∂(κ_ν, κ_t)/∂(h, m)` at `(h, m)`; rows are `κ_ν`, `κ_t`.
pub fn jacobian_matrix_at(profile: &Profile, h: f64, m: f64) -> Option<[[f64; 2]; 2]> {
    let (u0, v0) = (profile.u0(), profile.v0());
    let r2 = radicand_from(u0, v0, h, m);
    if !(r2 > 0.0) {
        return None;
    }
    let rho = r2.sqrt();
    let u2 = u0 * u0;
    let drho_dh = -h / rho;
    let drho_dm = (m * u2 - 2.0 * m.powi(3) * u2 * v0 * v0) / rho;
    Some([
        [
            drho_dh / (m * m * u2),
            drho_dm / (m * m * u2) - 2.0 * rho / (m.powi(3) * u2),
        ],
        [1.0 / (m * m * u2), -2.0 * h / (m.powi(3) * u2)],
    ])
}

pub fn jacobian_matrix(data: &EdgeData) -> [[f64; 2]; 2] {
    jacobian_matrix_at(data.profile(), data.h(), data.m()).expect("validated datum")
}

/// Central-difference Jacobian of the closed-form invariant map.
pub fn finite_difference_jacobian(data: &EdgeData, step: f64) -> Option<[[f64; 2]; 2]> {
    let p = data.profile();
    let (h, m) = (data.h(), data.m());
    let dh = {
        let (a, b) = (invariant_map_at(p, h + step, m)?, invariant_map_at(p, h - step, m)?);
        [(a.0 - b.0) / (2.0 * step), (a.1 - b.1) / (2.0 * step)]
    };
    let dm = {
        let (a, b) = (invariant_map_at(p, h, m + step)?, invariant_map_at(p, h, m - step)?);
        [(a.0 - b.0) / (2.0 * step), (a.1 - b.1) / (2.0 * step)]
    };
    Some([[dh[0], dm[0]], [dh[1], dm[1]]])
}

pub fn det2x2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Deterministic sample points in `J × [0, 2π]` (additive recurrence).
pub fn metric_sample_points(span: Interval, count: usize) -> Vec<(f64, f64)> {
    let a1 = 0.5 * (5f64.sqrt() - 1.0);
    let a2 = std::f64::consts::SQRT_2 - 1.0;
    (1..=count)
        .map(|i| {
            let f1 = (i as f64 * a1).fract();
            let f2 = (i as f64 * a2).fract();
            (span.lo + f1 * span.width(), 2.0 * std::f64::consts::PI * f2)
        })
        .collect()
}

fn sampled_forms(data: &EdgeData, points: &[(f64, f64)]) -> Result<Vec<FundamentalForm>, BourError> {
    points
        .iter()
        .map(|&(s, t)| first_fundamental_form_tol(data, s, t, METRIC_QUAD_TOL))
        .collect()
}

/// `max |ΔE| + |ΔF| + |ΔG|` between two data over sample points.
pub fn metric_delta(a: &EdgeData, b: &EdgeData, points: &[(f64, f64)]) -> Result<f64, BourError> {
    let fa = sampled_forms(a, points)?;
    let fb = sampled_forms(b, points)?;
    Ok(fa
        .iter()
        .zip(&fb)
        .map(|(x, y)| (x.e - y.e).abs() + (x.f - y.f).abs() + (x.g - y.g).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub h: f64,
    pub m: f64,
    pub valid: bool,
    pub data: Option<EdgeData>,
    /// Largest sampled metric difference to the base.
    pub metric_delta: Option<f64>,
    pub edge_type: Option<CuspTag>,
}

#[derive(Debug, Clone)]
pub struct DeformationFamily {
    pub base: EdgeData,
    pub members: Vec<FamilyMember>,
}

impl DeformationFamily {
    pub fn valid_members(&self) -> impl Iterator<Item = &FamilyMember> {
        self.members.iter().filter(|m| m.valid)
    }

    pub fn max_metric_delta(&self) -> f64 {
        self.members
            .iter()
            .filter_map(|m| m.metric_delta)
            .fold(0.0, f64::max)
    }
}

/// Grid of `(h, m)` over `h_span × m_span`, each member validated and compared with the base.
pub fn deformation_family(
    data: &EdgeData,
    h_span: Interval,
    m_span: Interval,
    nh: usize,
    nm: usize,
) -> Result<DeformationFamily, DeformError> {
    if nh == 0 || nm == 0 {
        return Err(DeformError::InvalidArgument("grid needs at least one point per axis".into()));
    }
    let axis = |span: Interval, n: usize| if n == 1 { vec![span.lo] } else { span.linspace(n) };
    let hs = axis(h_span, nh);
    let ms = axis(m_span, nm);
    let points = metric_sample_points(data.span(), METRIC_SAMPLES);
    let base_forms = sampled_forms(data, &points)?;
    let grid: Vec<(f64, f64)> = hs.iter().flat_map(|&h| ms.iter().map(move |&m| (h, m))).collect();
    let members = grid
        .par_iter()
        .map(|&(h, m)| {
            let Ok(member) = data.with_params(h, m) else {
                return Ok(FamilyMember {
                    h,
                    m,
                    valid: false,
                    data: None,
                    metric_delta: None,
                    edge_type: None,
                });
            };
            let forms = sampled_forms(&member, &points)?;
            let delta = forms
                .iter()
                .zip(&base_forms)
                .map(|(x, y)| (x.e - y.e).abs() + (x.f - y.f).abs() + (x.g - y.g).abs())
                .fold(0.0, f64::max);
            let edge_type = match classify_edge(&member, DEFAULT_CUSP_TOL) {
                Ok(c) => Some(c.tag),
                Err(CuspError::UnsupportedK(_)) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(FamilyMember {
                h,
                m,
                valid: true,
                data: Some(member),
                metric_delta: Some(delta),
                edge_type,
            })
        })
        .collect::<Result<Vec<_>, DeformError>>()?;
    Ok(DeformationFamily {
        base: data.clone(),
        members,
    })
}

#[derive(Debug, Clone)]
pub struct Inversion {
    pub h: f64,
    pub m: f64,
    pub iterations: usize,
    pub residual: f64,
    pub data: EdgeData,
}

/// Damped Newton for `(κ_ν, κ_t)(h, m) = target`, starting at the datum's `(h, m)`.
pub fn invert_invariants(data0: &EdgeData, target: (f64, f64)) -> Result<Inversion, DeformError> {
    let p = data0.profile();
    let (mut h, mut m) = (data0.h(), data0.m());
    let resid = |h: f64, m: f64| -> Option<[f64; 2]> {
        let (a, b) = invariant_map_at(p, h, m)?;
        Some([a - target.0, b - target.1])
    };
    let size = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut r = resid(h, m).expect("validated start point");
    let mut iterations = 0;
    while size(r) >= NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER {
            return Err(DeformError::NoConvergence {
                iterations,
                residual: size(r),
            });
        }
        iterations += 1;
        let j = jacobian_matrix_at(p, h, m).expect("iterates stay admissible");
        let det = det2x2(&j);
        let dh = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dm = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (hn, mn) = (h - lambda * dh, m - lambda * dm);
            if let Some(rn) = resid(hn, mn) {
                if size(rn) < size(r) || size(rn) < NEWTON_TOL {
                    accepted = Some((hn, mn, rn));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((hn, mn, rn)) => {
                h = hn;
                m = mn;
                r = rn;
            }
            None => {
                return Err(DeformError::NoConvergence {
                    iterations,
                    residual: size(r),
                })
            }
        }
    }
    let data = data0.with_params(h, m).map_err(|e| DeformError::StarViolation {
        h,
        m,
        reason: e.to_string(),
    })?;
    Ok(Inversion {
        h,
        m,
        iterations,
        residual: size(r),
        data,
    })
}

/// Radius and `|dz/dθ|` of the singular helix `t ↦ Ψ(0, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixInvariants {
    pub radius: f64,
    pub pitch: f64,
}

pub fn singular_helix(data: &EdgeData) -> Result<HelixInvariants, BourError> {
    let a = psi(data, 0.0, 0.0, 1e-12)?.position;
    let b = psi(data, 0.0, 0.5, 1e-12)?.position;
    let angle = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    Ok(HelixInvariants {
        radius: a[0].hypot(a[1]),
        pitch: ((b[2] - a[2]) / angle).abs(),
    })
}

#[derive(Debug, Clone)]
pub struct IsomerSet {
    /// Signs `(ε₁, ε₂)` in the order `(+,+), (+,−), (−,+), (−,−)`.
    pub variants: Vec<((Sign, Sign), EdgeData)>,
    pub metric_delta: f64,
    pub helices: Vec<HelixInvariants>,
}

pub fn isomers(data: &EdgeData) -> Result<IsomerSet, DeformError> {
    let signs = [
        (Sign::Plus, Sign::Plus),
        (Sign::Plus, Sign::Minus),
        (Sign::Minus, Sign::Plus),
        (Sign::Minus, Sign::Minus),
    ];
    let variants: Vec<_> = signs
        .iter()
        .map(|&(e1, e2)| ((e1, e2), data.with_signs(data.eps0(), e1, e2)))
        .collect();
    let points = metric_sample_points(data.span(), METRIC_SAMPLES);
    let mut metric_delta: f64 = 0.0;
    for (_, v) in &variants[1..] {
        metric_delta = metric_delta.max(metric_delta_pair(&variants[0].1, v, &points)?);
    }
    let helices = variants
        .iter()
        .map(|(_, v)| singular_helix(v))
        .collect::<Result<_, _>>()?;
    Ok(IsomerSet {
        variants,
        metric_delta,
        helices,
    })
}

fn metric_delta_pair(a: &EdgeData, b: &EdgeData, points: &[(f64, f64)]) -> Result<f64, DeformError> {
    Ok(metric_delta(a, b, points)?)
}

/// Linear schedule `h_j = h₀(1 − j/(steps − 1))` down to the surface of revolution.
pub fn revolution_path(data: &EdgeData, steps: usize) -> Result<Vec<EdgeData>, DeformError> {
    if steps < 2 {
        return Err(DeformError::InvalidArgument("steps must be at least 2".into()));
    }
    let h0 = data.h();
    (0..steps)
        .map(|j| {
            let h = h0 * (1.0 - j as f64 / (steps - 1) as f64);
            Ok(data.with_params(h, data.m())?)
        })
        .collect()
}
