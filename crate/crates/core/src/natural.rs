//! From a helicoidal surface `(x(u) cos v, x(u) sin v, z(u) + hv)` back to its Bour datum.
//!
//! The shear `φ(u) = h ∫_{u0}^u ż/(x² + h²)` makes `f̃(u, v) = f(u, v − φ(u))`
//! orthogonal: `f_u · f_v = hż` and `‖f_v‖² = x² + h²`, so
//! `f̃_u = f_u − φ' f_v` satisfies `f̃_u · f_v = 0` and
//!
//! ```text
//! ‖f̃_u‖² = ẋ² + ż² − h²ż²/(x² + h²) = ẋ² + ż² x²/(x² + h²).
//! ```
//!
//! Reparametrizing `u` canonically for this speed gives `E = s^{2k}`, `F = 0`,
//! `G = x² + h² = U(s)²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bour::{self, norm, series, BourError};
use crate::cusps::{canonical_parameter_tol, CanonicalParameter, CuspError, Velocity};
use crate::expr::{DomainError, SmoothFn};
use crate::interp::{Hermite, InterpError};
use crate::jet::{jet_eval, Jet, JetError};
use crate::profile::{EdgeData, Interval, ProfileError};
use crate::quad::{integrate, QuadError, QuadOptions};

pub const CHART_SAMPLES: usize = 512;
pub const GENERIC_TOL: f64 = 1e-8;
/// Tolerance for the `U^(i)(0) = 0` chart invariant.
pub const CHART_DERIVATIVE_TOL: f64 = 1e-7;
const CHART_QUAD_TOL: f64 = 1e-13;
/// Below this radius the Bour profile is evaluated from its series at 0.
const BOUR_SERIES_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NaturalError {
    #[error("profile is not generic at u0 = {u0}: {}", diagnostics.join("; "))]
    NotGeneric { u0: f64, diagnostics: Vec<String> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error(transparent)]
    Bour(#[from] BourError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// A profile curve `γ(u) = (x(u), z(u))`.
pub trait ProfileCurve: Sync {
    /// Jet of `x` at `u`.
    fn x_jet(&self, u: f64, order: usize) -> Result<Jet, NaturalError>;
    /// Jet of `ż` at `u`.
    fn dz_jet(&self, u: f64, order: usize) -> Result<Jet, NaturalError>;
    fn z(&self, u: f64) -> Result<f64, NaturalError>;

    fn x(&self, u: f64) -> Result<f64, NaturalError> {
        Ok(self.x_jet(u, 0)?.value())
    }

    /// `(ẋ, ż)`.
    fn velocity(&self, u: f64) -> Result<(f64, f64), NaturalError> {
        Ok((self.x_jet(u, 1)?.coeff(1), self.dz_jet(u, 0)?.value()))
    }

    /// Jets of `(x, z)` at `u`.
    fn jets(&self, u: f64, order: usize) -> Result<(Jet, Jet), NaturalError> {
        let z = self.dz_jet(u, order.saturating_sub(1))?.integrate().add_const(self.z(u)?);
        Ok((self.x_jet(u, order)?, z.resize(order)))
    }
}

/// Helicoidal surface data given by expressions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HelicoidalInput {
    pub x: SmoothFn,
    pub z: SmoothFn,
    pub h: f64,
    pub interval: Interval,
}

impl ProfileCurve for HelicoidalInput {
    fn x_jet(&self, u: f64, order: usize) -> Result<Jet, NaturalError> {
        Ok(jet_eval(&self.x, u, order)?)
    }

    fn dz_jet(&self, u: f64, order: usize) -> Result<Jet, NaturalError> {
        Ok(jet_eval(&self.z, u, order + 1)?.differentiate())
    }

    fn z(&self, u: f64) -> Result<f64, NaturalError> {
        Ok(self.z.eval(u)?)
    }
}

impl HelicoidalInput {
    /// Confirms `x ≠ 0` on the interval by sampling.
    pub fn check_axis(&self, samples: usize) -> Result<(), NaturalError> {
        let vals: Vec<f64> = self
            .interval
            .linspace(samples)
            .iter()
            .map(|&u| self.x.eval(u))
            .collect::<Result<_, _>>()?;
        if vals.contains(&0.0) || vals.windows(2).any(|w| w[0].signum() != w[1].signum()) {
            return Err(NaturalError::InvalidArgument("x meets the axis on the interval".into()));
        }
        Ok(())
    }
}

/// The profile curve `(x(s), z(s))` of a Bour datum.
#[derive(Debug, Clone)]
pub struct BourProfile<'a> {
    pub data: &'a EdgeData,
}

impl BourProfile<'_> {
    fn near_zero(&self, u: f64) -> bool {
        u.abs() < BOUR_SERIES_RADIUS
    }

    fn reexpand(j: &Jet, u: f64, order: usize) -> Jet {
        j.compose(&Jet::variable(u, order))
    }

    /// Jets of `U`, `V`, `m²U² − h²` and `ρ` at `u`.
    fn parts(&self, u: f64, order: usize) -> Result<(Jet, Jet, Jet, Jet), NaturalError> {
        let d = self.data;
        let p = d.profile();
        let (h, m, k) = (d.h(), d.m(), d.k());
        let uj = if self.near_zero(u) {
            Self::reexpand(p.u_jet(), u, order + 1)
        } else {
            jet_eval(p.u(), u, order + 1)?
        };
        let vj = if self.near_zero(u) {
            Self::reexpand(p.v_jet(), u, order)
        } else {
            uj.differentiate()
                .div_jet(&Jet::variable(u, order).powi(k as i32)?)?
        };
        let uj = uj.truncate(order);
        let mu2 = uj.mul_jet(&uj).scale(m * m);
        let w = mu2.add_const(-h * h);
        let rho = (&w - &mu2.mul_jet(&vj.mul_jet(&vj)).scale(m * m)).sqrt()?;
        Ok((uj, vj, w, rho))
    }
}

impl ProfileCurve for BourProfile<'_> {
    fn x_jet(&self, u: f64, order: usize) -> Result<Jet, NaturalError> {
        if self.near_zero(u) {
            return Ok(Self::reexpand(&series(self.data)?.x, u, order));
        }
        let (_, _, w, _) = self.parts(u, order)?;
        Ok(w.sqrt()?.scale(self.data.eps0().value()))
    }

    fn dz_jet(&self, u: f64, order: usize) -> Result<Jet, NaturalError> {
        if self.near_zero(u) {
            return Ok(Self::reexpand(&series(self.data)?.z.differentiate(), u, order));
        }
        let d = self.data;
        let (uj, _, w, rho) = self.parts(u, order)?;
        let sk = Jet::variable(u, order).powi(d.k() as i32)?;
        Ok(sk
            .mul_jet(&uj)
            .mul_jet(&rho)
            .div_jet(&w)?
            .scale(d.eps2().value() * d.m()))
    }

    fn z(&self, u: f64) -> Result<f64, NaturalError> {
        Ok(bour::z_of_s(self.data, u, CHART_QUAD_TOL)?)
    }
}

/// `‖f̃_u‖` as a velocity field `(ẋ, ż x/√(x² + h²))`.
struct Sheared<'a> {
    curve: &'a dyn ProfileCurve,
    h: f64,
}

impl Velocity for Sheared<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn velocity(&self, u: f64) -> Result<Vec<f64>, CuspError> {
        let x = self.curve.x_jet(u, 1).map_err(into_cusp)?;
        let dz = self.curve.dz_jet(u, 0).map_err(into_cusp)?.value();
        let x0 = x.value();
        Ok(vec![x.coeff(1), dz * x0 / (x0 * x0 + self.h * self.h).sqrt()])
    }

    fn velocity_jets(&self, u0: f64, order: usize) -> Result<Vec<Jet>, CuspError> {
        let x = self.curve.x_jet(u0, order + 1).map_err(into_cusp)?;
        let dz = self.curve.dz_jet(u0, order).map_err(into_cusp)?;
        let xt = x.truncate(order);
        let factor = xt.div_jet(&xt.mul_jet(&xt).add_const(self.h * self.h).sqrt()?)?;
        Ok(vec![x.differentiate(), dz.mul_jet(&factor)])
    }
}

fn into_cusp(e: NaturalError) -> CuspError {
    match e {
        NaturalError::Cusp(c) => c,
        NaturalError::Jet(j) => CuspError::Jet(j),
        NaturalError::Domain(d) => CuspError::Domain(d),
        NaturalError::Quad(q) => CuspError::Quad(q),
        NaturalError::Bour(b) => CuspError::Bour(b),
        other => CuspError::InvalidArgument(other.to_string()),
    }
}

/// Singular points: zeros of `ẋ² + ż²` (the discriminant `h²ẋ² + x²(ẋ² + ż²)`
/// has the same zero set while `x ≠ 0`), located through sign changes of its derivative.
pub fn singular_set(curve: &dyn ProfileCurve, interval: Interval, n_samples: usize) -> Result<Vec<f64>, NaturalError> {
    if n_samples < 64 {
        return Err(NaturalError::InvalidArgument("n_samples must be at least 64".into()));
    }
    let q = |u: f64| -> Result<(f64, f64), NaturalError> {
        let (x, z) = (curve.x_jet(u, 2)?, curve.dz_jet(u, 1)?);
        let (dx, ddx, dz, ddz) = (x.coeff(1), 2.0 * x.coeff(2), z.value(), z.coeff(1));
        Ok((dx * dx + dz * dz, 2.0 * (dx * ddx + dz * ddz)))
    };
    let grid = interval.linspace(n_samples);
    let vals: Vec<(f64, f64)> = grid.iter().map(|&u| q(u)).collect::<Result<_, _>>()?;
    let qmax = vals.iter().map(|v| v.0).fold(0.0, f64::max);
    let mut roots: Vec<f64> = Vec::new();
    let accept = |u: f64, roots: &mut Vec<f64>| -> Result<(), NaturalError> {
        if q(u)?.0 <= 1e-10 * qmax.max(f64::MIN_POSITIVE) && roots.last().is_none_or(|&r| (u - r).abs() > 1e-9) {
            roots.push(u);
        }
        Ok(())
    };
    for i in 0..grid.len() {
        if vals[i].0 == 0.0 {
            accept(grid[i], &mut roots)?;
            continue;
        }
        if i + 1 < grid.len() && vals[i].1 < 0.0 && vals[i + 1].1 > 0.0 {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let d = q(mid)?.1;
                if d == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if d < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            accept(0.5 * (lo + hi), &mut roots)?;
        }
    }
    Ok(roots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericReport {
    pub generic: bool,
    pub diagnostics: Vec<String>,
}

/// Checks `x^(i)(u0) = z^(i)(u0) = 0` for `i = 1..k`, `x(u0) ≠ 0` and `z^(k+1)(u0) ≠ 0`.
pub fn check_generic(curve: &dyn ProfileCurve, u0: f64, k: usize) -> Result<GenericReport, NaturalError> {
    let (x, z) = curve.jets(u0, k + 2)?;
    let scale = (0..=k + 1)
        .map(|i| x.derivative(i).abs().max(z.derivative(i).abs()))
        .fold(1.0, f64::max);
    let band = GENERIC_TOL * scale;
    let mut diagnostics = Vec::new();
    if x.value().abs() <= band {
        diagnostics.push("axis intersection: x(u0) = 0".to_string());
    }
    for i in 1..=k {
        for (name, j) in [("x", &x), ("z", &z)] {
            let v = j.derivative(i);
            if v.abs() > band {
                diagnostics.push(format!("{name}^({i})(u0) = {v:e} does not vanish"));
            }
        }
    }
    let top = z.derivative(k + 1);
    if top.abs() <= band {
        diagnostics.push(format!("z^({})(u0) = {top:e} vanishes", k + 1));
    }
    Ok(GenericReport {
        generic: diagnostics.is_empty(),
        diagnostics,
    })
}

/// Natural coordinates `(s, t̃)` around a singular point.
#[derive(Debug, Clone)]
pub struct NaturalChart {
    pub u0: f64,
    pub k: usize,
    pub h: f64,
    pub param: CanonicalParameter,
    u_of_s_table: Hermite,
    phi_of_u: Hermite,
    u_jet: Jet,
}

/// Tabulated arrays of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDump {
    pub u0: f64,
    pub k: usize,
    pub h: f64,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(rename = "U")]
    pub big_u: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(rename = "U_jet_at_0")]
    pub u_jet: Vec<f64>,
}

impl NaturalChart {
    pub fn s_of_u(&self, u: f64) -> f64 {
        self.param.s_of_u(u)
    }

    pub fn u_of_s(&self, s: f64) -> f64 {
        self.param.u_of_s(s)
    }

    /// `U(s) = √(x(u(s))² + h²)`.
    pub fn big_u(&self, s: f64) -> f64 {
        if s.abs() < crate::cusps::CANONICAL_JET_BAND * self.param.s_jet().coeff(1) {
            self.u_jet.eval(s)
        } else {
            self.u_of_s_table.eval(s)
        }
    }

    /// Jet of `U` at `s = 0`.
    pub fn u_jet(&self) -> &Jet {
        &self.u_jet
    }

    pub fn phi(&self, u: f64) -> f64 {
        self.phi_of_u.eval(u)
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.param.s_range()
    }

    pub fn dump(&self) -> ChartDump {
        ChartDump {
            u0: self.u0,
            k: self.k,
            h: self.h,
            u: self.param.us().to_vec(),
            s: self.param.ss().to_vec(),
            big_u: self.u_of_s_table.ys().to_vec(),
            phi: self.phi_of_u.ys().to_vec(),
            u_jet: self.u_jet.coeffs().to_vec(),
        }
    }
}

pub fn natural_coordinates(
    curve: &dyn ProfileCurve,
    h: f64,
    interval: Interval,
    u0: f64,
    k: usize,
) -> Result<NaturalChart, NaturalError> {
    natural_coordinates_with(curve, h, interval, u0, k, CHART_SAMPLES)
}

pub fn natural_coordinates_with(
    curve: &dyn ProfileCurve,
    h: f64,
    interval: Interval,
    u0: f64,
    k: usize,
    samples: usize,
) -> Result<NaturalChart, NaturalError> {
    let report = check_generic(curve, u0, k)?;
    if !report.generic {
        return Err(NaturalError::NotGeneric {
            u0,
            diagnostics: report.diagnostics,
        });
    }
    let sheared = Sheared { curve, h };
    let param = canonical_parameter_tol(&sheared, u0, k, interval.lo, interval.hi, samples, CHART_QUAD_TOL)?;

    let us = param.us().to_vec();
    let ss = param.ss().to_vec();
    let mut big_u = Vec::with_capacity(us.len());
    let mut du_ds = Vec::with_capacity(us.len());
    let mut dphi = Vec::with_capacity(us.len());
    for &u in &us {
        let xj = curve.x_jet(u, 1)?;
        let dz = curve.dz_jet(u, 0)?.value();
        let (x, dx) = (xj.value(), xj.coeff(1));
        let r2 = x * x + h * h;
        let uu = r2.sqrt();
        big_u.push(uu);
        dphi.push(h * dz / r2);
        // dU/ds = (x ẋ / U) du/ds, and du/ds → 0/0 only through ẋ at u0
        du_ds.push(x * dx / uu / param.ds_du(u));
    }
    // φ by accumulated quadrature outward from u0
    let at = us.iter().position(|&u| u == u0).expect("u0 is a node");
    let mut phi = vec![0.0; us.len()];
    let opts = QuadOptions::with_tol(CHART_QUAD_TOL);
    let err = std::cell::RefCell::new(None);
    let integrand = |u: f64| match (curve.x(u), curve.velocity(u)) {
        (Ok(x), Ok((_, dz))) => h * dz / (x * x + h * h),
        (Err(e), _) | (_, Err(e)) => {
            err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    if h != 0.0 {
        for i in at + 1..us.len() {
            let piece = integrate(integrand, us[i - 1], us[i], &opts);
            if let Some(e) = err.take() {
                return Err(e);
            }
            phi[i] = phi[i - 1] + piece?.value;
        }
        for i in (0..at).rev() {
            let piece = integrate(integrand, us[i + 1], us[i], &opts);
            if let Some(e) = err.take() {
                return Err(e);
            }
            phi[i] = phi[i + 1] + piece?.value;
        }
    }

    let xj = curve.x_jet(u0, param.u_jet().order())?;
    let x_of_s = xj.compose(param.u_jet());
    let u_jet = x_of_s.mul_jet(&x_of_s).add_const(h * h).sqrt()?;

    Ok(NaturalChart {
        u0,
        k,
        h,
        u_of_s_table: Hermite::new(ss, big_u, du_ds)?,
        phi_of_u: Hermite::new(us, phi, dphi)?,
        u_jet,
        param,
    })
}

/// Recovery errors of build-then-extract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    /// `sup |U_rec(s) − m U(s)|`.
    pub sup_error_u: f64,
    /// `sup |G_rec − G|` with `G_rec = (U_rec/m_rec)²` and `G` from the surface.
    pub sup_error_metric: f64,
    /// `sup |s_rec(s) − s|`.
    pub sup_error_param: f64,
    /// `U_rec(0)/‖Ψ_t(0, 0)‖`.
    pub m_recovered: f64,
    pub singular_points: Vec<f64>,
}

/// Builds Ψ from the datum, reads off its profile `(x(s), z(s))` with pitch `h`
/// (Ψ is `f_{γ,h}` in the angle `v = θ`), and compares the extracted chart with the datum.
pub fn roundtrip(data: &EdgeData, s_probe: &[f64]) -> Result<(RoundtripReport, NaturalChart), NaturalError> {
    let curve = BourProfile { data };
    let j = data.span();
    let singular_points = singular_set(&curve, j, 256)?;
    let chart = natural_coordinates(&curve, data.h(), j, 0.0, data.k())?;
    let (slo, shi) = chart.s_range();
    let psi_t = bour::tangents(data, 0.0, 0.0, 1e-12)?.1;
    let m_rec = chart.big_u(0.0) / norm(psi_t);
    let mut rep = RoundtripReport {
        sup_error_u: 0.0,
        sup_error_metric: 0.0,
        sup_error_param: 0.0,
        m_recovered: m_rec,
        singular_points,
    };
    let slack = 1e-9 * (shi - slo);
    for &probe in s_probe {
        if probe < slo - slack || probe > shi + slack || !j.contains(probe) {
            return Err(NaturalError::InvalidArgument(format!("probe s = {probe} outside the chart")));
        }
        let s = probe.clamp(slo, shi);
        let u_rec = chart.big_u(s);
        let u = data.profile().u_at(s)?;
        rep.sup_error_u = rep.sup_error_u.max((u_rec - data.m() * u).abs());
        let g = bour::first_fundamental_form(data, s, 0.0)?.g;
        rep.sup_error_metric = rep.sup_error_metric.max(((u_rec / m_rec).powi(2) - g).abs());
        rep.sup_error_param = rep.sup_error_param.max((chart.s_of_u(s) - s).abs());
    }
    Ok((rep, chart))
}
