//! Pointwise and Taylor evaluation of the Bour representation
//!
//! ```text
//! x(s)   = ε₀ √(m²U² − h²)
//! z(s)   = ε₂ m ∫₀ˢ ζ^k U ρ / (m²U² − h²) dζ
//! θ(s,t) = (ε₁ t − ε₂ h ∫₀ˢ ζ^k ρ / (U (m²U² − h²)) dζ) / m
//! Ψ(s,t) = (x cos θ, x sin θ, z + hθ)
//! ```
//!
//! whose first fundamental form is `s^{2k} ds² + U² dt²` for every admissible `(h, m)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{Jet, JetError};
use crate::profile::{EdgeData, Interval, ProfileError};
use crate::quad::{integrate, QuadError, QuadOptions, DEFAULT_ABS_TOL};

/// Inside this radius `z` and `θ` come from the Taylor series at 0.
pub const SERIES_RADIUS: f64 = 1e-4;
/// `|s|` below this counts as the singular curve.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BourError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    dot(a, cross(b, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub s: f64,
    pub t: f64,
    pub singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalForm {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

/// Taylor data at `s = 0` shared by all evaluations of one datum.
#[derive(Debug, Clone)]
pub struct BourSeries {
    /// `x(s)`, sign included.
    pub x: Jet,
    /// `z(s)`, sign included.
    pub z: Jet,
    /// `I(s) = ∫₀ˢ ζ^k ρ / (U (m²U² − h²)) dζ`, so `θ = (ε₁t − ε₂ h I)/m`.
    pub theta_integral: Jet,
}

impl BourSeries {
    pub fn build(data: &EdgeData) -> Result<Self, BourError> {
        let p = data.profile();
        let (h, m, k) = (data.h(), data.m(), data.k());
        let v = p.v_jet().clone();
        let order = v.order();
        let u = p.u_jet().truncate(order);
        let mu2 = u.mul_jet(&u).scale(m * m);
        let w = mu2.add_const(-h * h);
        let radicand = &w - &mu2.mul_jet(&v.mul_jet(&v)).scale(m * m);
        let rho = radicand.sqrt()?;
        let x = w.sqrt()?.scale(data.eps0().value());
        let z_integrand = u.mul_jet(&rho).div_jet(&w)?.shift_up(k);
        let z = z_integrand.integrate().scale(data.eps2().value() * m);
        let th_integrand = rho.div_jet(&u.mul_jet(&w))?.shift_up(k);
        let theta_integral = th_integrand.integrate();
        Ok(BourSeries {
            x,
            z,
            theta_integral,
        })
    }

    /// Highest order available for `Ψ` jets.
    pub fn max_order(&self) -> usize {
        self.z.order().min(self.theta_integral.order())
    }
}

/// Cached Taylor data of a datum.
pub fn series(data: &EdgeData) -> Result<Arc<BourSeries>, BourError> {
    if let Some(s) = data.series.get() {
        return Ok(s.clone());
    }
    let built = Arc::new(BourSeries::build(data)?);
    Ok(data.series.get_or_init(|| built).clone())
}

/// `(U, ρ, m²U² − h²)` at `s`.
fn pieces(data: &EdgeData, s: f64) -> Result<(f64, f64, f64), BourError> {
    let (h, m) = (data.h(), data.m());
    let (u, v) = data.profile().u_and_v(s)?;
    let w = m * m * u * u - h * h;
    let r2 = w - m.powi(4) * u * u * v * v;
    if !(r2 > 0.0) {
        return Err(ProfileError::NegativeRadicand { s, value: r2 }.into());
    }
    Ok((u, r2.sqrt(), w))
}

fn z_integrand(data: &EdgeData, s: f64) -> Result<f64, BourError> {
    let (u, rho, w) = pieces(data, s)?;
    Ok(s.powi(data.k() as i32) * u * rho / w)
}

fn theta_integrand(data: &EdgeData, s: f64) -> Result<f64, BourError> {
    let (u, rho, w) = pieces(data, s)?;
    Ok(s.powi(data.k() as i32) * rho / (u * w))
}

fn quad_checked(
    data: &EdgeData,
    f: fn(&EdgeData, f64) -> Result<f64, BourError>,
    s: f64,
    tol: f64,
) -> Result<f64, BourError> {
    if !(tol > 0.0) {
        return Err(BourError::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let mut failure = None;
    let result = integrate(
        |x| match f(data, x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        s,
        &QuadOptions::with_tol(tol),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?.value)
}

pub fn x_of_s(data: &EdgeData, s: f64) -> Result<f64, BourError> {
    data.check_in_span(s)?;
    let (h, m) = (data.h(), data.m());
    let u = data.profile().u_at(s)?;
    let w = m * m * u * u - h * h;
    if !(w > 0.0) {
        return Err(ProfileError::NegativeRadicand { s, value: w }.into());
    }
    Ok(data.eps0().value() * w.sqrt())
}

pub fn z_of_s(data: &EdgeData, s: f64, tol: f64) -> Result<f64, BourError> {
    data.check_in_span(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    if s.abs() < SERIES_RADIUS {
        return Ok(series(data)?.z.eval(s));
    }
    let i = quad_checked(data, z_integrand, s, tol / data.m())?;
    Ok(data.eps2().value() * data.m() * i)
}

/// `I(s)` with `θ = (ε₁t − ε₂ h I)/m`.
pub fn theta_integral(data: &EdgeData, s: f64, tol: f64) -> Result<f64, BourError> {
    data.check_in_span(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    if s.abs() < SERIES_RADIUS {
        return Ok(series(data)?.theta_integral.eval(s));
    }
    quad_checked(data, theta_integrand, s, tol / data.h().abs().max(1.0))
}

pub fn theta(data: &EdgeData, s: f64, t: f64, tol: f64) -> Result<f64, BourError> {
    let i = if data.h() == 0.0 {
        data.check_in_span(s)?;
        0.0
    } else {
        theta_integral(data, s, tol)?
    };
    Ok(theta_from(data, t, i))
}

fn theta_from(data: &EdgeData, t: f64, integral: f64) -> f64 {
    (data.eps1().value() * t - data.eps2().value() * data.h() * integral) / data.m()
}

/// The s-only part of Ψ: `(x(s), z(s), I(s))`.
#[derive(Debug, Clone, Copy)]
struct Row {
    s: f64,
    x: f64,
    z: f64,
    integral: f64,
}

fn row(data: &EdgeData, s: f64, tol: f64) -> Result<Row, BourError> {
    Ok(Row {
        s,
        x: x_of_s(data, s)?,
        z: z_of_s(data, s, tol)?,
        integral: if data.h() == 0.0 {
            0.0
        } else {
            theta_integral(data, s, tol)?
        },
    })
}

fn point_on_row(data: &EdgeData, r: &Row, t: f64) -> SurfacePoint {
    let th = theta_from(data, t, r.integral);
    let (sin, cos) = th.sin_cos();
    SurfacePoint {
        position: [r.x * cos, r.x * sin, r.z + data.h() * th],
        s: r.s,
        t,
        singular: r.s.abs() < SINGULAR_THRESHOLD,
    }
}

pub fn psi(data: &EdgeData, s: f64, t: f64, tol: f64) -> Result<SurfacePoint, BourError> {
    Ok(point_on_row(data, &row(data, s, tol)?, t))
}

/// Taylor jets in `s` at `s = 0` of the three components of `s ↦ Ψ(s, t)`.
pub fn psi_jet_at_zero(data: &EdgeData, t: f64, order: usize) -> Result<[Jet; 3], BourError> {
    let ser = series(data)?;
    if order > ser.max_order() {
        return Err(JetError::OrderTooLarge(order).into());
    }
    let (h, m) = (data.h(), data.m());
    let x = ser.x.truncate(order);
    let theta = ser
        .theta_integral
        .truncate(order)
        .scale(-data.eps2().value() * h / m)
        .add_const(data.eps1().value() * t / m);
    let (sin, cos) = theta.sin_cos();
    Ok([
        x.mul_jet(&cos),
        x.mul_jet(&sin),
        &ser.z.truncate(order) + &theta.scale(h),
    ])
}

/// `(Ψ_s, Ψ_t)` from closed-form derivatives of the integrands.
pub fn tangents(data: &EdgeData, s: f64, t: f64, tol: f64) -> Result<(Vec3, Vec3), BourError> {
    let r = row(data, s, tol)?;
    tangents_on_row(data, &r, t)
}

fn tangents_on_row(data: &EdgeData, r: &Row, t: f64) -> Result<(Vec3, Vec3), BourError> {
    let (h, m, k) = (data.h(), data.m(), data.k() as i32);
    let s = r.s;
    let (u, rho, w) = pieces(data, s)?;
    let (_, v) = data.profile().u_and_v(s)?;
    let sk = s.powi(k);
    let dx = data.eps0().value() * m * m * u * sk * v / w.sqrt();
    let dz = data.eps2().value() * m * sk * u * rho / w;
    let th_s = -data.eps2().value() * h * sk * rho / (m * u * w);
    let th_t = data.eps1().value() / m;
    let th = theta_from(data, t, r.integral);
    let (sin, cos) = th.sin_cos();
    let x = r.x;
    let ps = [
        dx * cos - x * sin * th_s,
        dx * sin + x * cos * th_s,
        dz + h * th_s,
    ];
    let pt = [-x * sin * th_t, x * cos * th_t, h * th_t];
    Ok((ps, pt))
}

pub fn first_fundamental_form(
    data: &EdgeData,
    s: f64,
    t: f64,
) -> Result<FundamentalForm, BourError> {
    first_fundamental_form_tol(data, s, t, DEFAULT_ABS_TOL)
}

pub fn first_fundamental_form_tol(
    data: &EdgeData,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<FundamentalForm, BourError> {
    let (ps, pt) = tangents(data, s, t, tol)?;
    Ok(FundamentalForm {
        e: dot(ps, ps),
        f: dot(ps, pt),
        g: dot(pt, pt),
    })
}

/// Row-major grid of surface points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<SurfacePoint>,
    pub singular_row: Option<usize>,
}

impl Mesh {
    pub fn point(&self, row: usize, col: usize) -> &SurfacePoint {
        &self.points[row * self.cols + col]
    }

    pub fn s_values(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.point(r, 0).s).collect()
    }

    pub fn t_values(&self) -> Vec<f64> {
        (0..self.cols).map(|c| self.point(0, c).t).collect()
    }

    /// Quads as 0-based vertex indices, counter-clockwise in `(s, t)`.
    pub fn quads(&self) -> Vec<[usize; 4]> {
        let mut out = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for r in 0..self.rows - 1 {
            for c in 0..self.cols - 1 {
                let i = r * self.cols + c;
                out.push([i, i + self.cols, i + self.cols + 1, i + 1]);
            }
        }
        out
    }
}

/// Default `t` range `[0, 2πm]`.
pub fn default_t_range(data: &EdgeData) -> Interval {
    Interval::new(0.0, 2.0 * std::f64::consts::PI * data.m())
}

/// Row grid over `s_range`, with the row nearest 0 moved onto 0 when `0 ∈ s_range`.
pub fn mesh_rows(s_range: Interval, rows: usize) -> (Vec<f64>, Option<usize>) {
    let mut s = s_range.linspace(rows);
    if !s_range.contains(0.0) {
        return (s, None);
    }
    let nearest = (0..s.len())
        .min_by(|&a, &b| s[a].abs().total_cmp(&s[b].abs()))
        .expect("at least two rows");
    s[nearest] = 0.0;
    (s, Some(nearest))
}

pub fn sample_mesh(
    data: &EdgeData,
    s_range: Interval,
    t_range: Interval,
    rows: usize,
    cols: usize,
    tol: f64,
) -> Result<Mesh, BourError> {
    if rows < 2 || cols < 2 {
        return Err(BourError::InvalidArgument("mesh needs at least 2 rows and 2 columns".into()));
    }
    if !(s_range.lo < s_range.hi) || !(t_range.lo < t_range.hi) {
        return Err(BourError::InvalidArgument("ranges must be increasing".into()));
    }
    let j = data.span();
    if s_range.lo < j.lo || s_range.hi > j.hi {
        return Err(ProfileError::OutsideDomain {
            s: if s_range.lo < j.lo { s_range.lo } else { s_range.hi },
            lo: j.lo,
            hi: j.hi,
        }
        .into());
    }
    let (svals, singular_row) = mesh_rows(s_range, rows);
    let tvals = t_range.linspace(cols);
    let rows_out: Vec<Vec<SurfacePoint>> = svals
        .par_iter()
        .map(|&s| {
            let r = row(data, s, tol)?;
            Ok(tvals.iter().map(|&t| point_on_row(data, &r, t)).collect())
        })
        .collect::<Result<_, BourError>>()?;
    Ok(Mesh {
        rows,
        cols,
        points: rows_out.into_iter().flatten().collect(),
        singular_row,
    })
}

/// `(s, t, E, F, G)` over the same grid as [`sample_mesh`].
pub fn sample_fundamental_forms(
    data: &EdgeData,
    s_range: Interval,
    t_range: Interval,
    rows: usize,
    cols: usize,
    tol: f64,
) -> Result<Vec<(f64, f64, FundamentalForm)>, BourError> {
    let (svals, _) = mesh_rows(s_range, rows.max(2));
    let tvals = t_range.linspace(cols.max(2));
    let out: Vec<Vec<_>> = svals
        .par_iter()
        .map(|&s| {
            let r = row(data, s, tol)?;
            tvals
                .iter()
                .map(|&t| {
                    let (ps, pt) = tangents_on_row(data, &r, t)?;
                    Ok((
                        s,
                        t,
                        FundamentalForm {
                            e: dot(ps, ps),
                            f: dot(ps, pt),
                            g: dot(pt, pt),
                        },
                    ))
                })
                .collect::<Result<Vec<_>, BourError>>()
        })
        .collect::<Result<_, BourError>>()?;
    Ok(out.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::profile::{make_edge_data, Sign};

    fn sample_k1(h: f64, m: f64) -> EdgeData {
        make_edge_data(
            parse_expr("1 - s*cos(s) + sin(s)").unwrap(),
            h,
            m,
            Sign::Plus,
            Sign::Plus,
            Sign::Minus,
            1,
            Interval::new(-0.8, 0.8),
        )
        .unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let hstep = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * hstep);
        }
        acc * hstep / 3.0
    }

    #[test]
    fn singular_point_position() {
        let d = sample_k1(0.2, 1.0);
        let p = psi(&d, 0.0, 0.0, 1e-12).unwrap();
        assert!(p.singular);
        assert!((p.position[0] - 0.96f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.position[1], 0.0);
        assert_eq!(p.position[2], 0.0);
    }

    #[test]
    fn x_sign_and_h_zero() {
        let d = sample_k1(0.0, 1.3);
        for &s in &[-0.5, 0.0, 0.4] {
            let u = d.profile().u_at(s).unwrap();
            assert!((x_of_s(&d, s).unwrap() - 1.3 * u).abs() < 1e-14);
            let flipped = d.with_signs(Sign::Minus, Sign::Plus, Sign::Minus);
            assert_eq!(x_of_s(&flipped, s).unwrap(), -x_of_s(&d, s).unwrap());
        }
    }

    #[test]
    fn z_against_simpson() {
        let d = sample_k1(0.0, 1.0);
        // h = 0, m = 1: integrand is ζ ρ / U = ζ √(1 − sin²ζ) = ζ cos ζ
        let oracle = -simpson(|z| z * z.cos(), 0.0, 0.5, 2000);
        assert!((z_of_s(&d, 0.5, 1e-12).unwrap() - oracle).abs() < 1e-10);
        let d = sample_k1(0.2, 1.0);
        let f = |z: f64| {
            let u = 1.0 - z * z.cos() + z.sin();
            let w = u * u - 0.04;
            z * u * (w - u * u * z.sin().powi(2)).sqrt() / w
        };
        let oracle = -simpson(f, 0.0, 0.5, 4000);
        assert!((z_of_s(&d, 0.5, 1e-12).unwrap() - oracle).abs() < 1e-10);
        let g = |z: f64| {
            let u = 1.0 - z * z.cos() + z.sin();
            let w = u * u - 0.04;
            z * (w - u * u * z.sin().powi(2)).sqrt() / (u * w)
        };
        let th = theta(&d, 0.5, 0.0, 1e-12).unwrap();
        assert!(th != 0.0);
        assert!((th - 0.2 * simpson(g, 0.0, 0.5, 4000)).abs() < 1e-10);
    }

    #[test]
    fn theta_trivial_cases() {
        let d = sample_k1(0.2, 1.0);
        assert_eq!(theta(&d, 0.0, 1.3, 1e-12).unwrap(), 1.3);
        let flat = sample_k1(0.0, 0.5);
        assert_eq!(theta(&flat, 0.6, 1.0, 1e-12).unwrap(), 2.0);
    }

    #[test]
    fn z_parity_for_even_profiles() {
        // even U makes the z integrand s^k times an even function
        let cases = [("1.3 - 0.3*cos(s)", 1usize, 1.0), ("(-s^2+2)*cos(s) + 2*s*sin(s) - 1", 2, -1.0)];
        for (u, k, parity) in cases {
            let d = make_edge_data(
                parse_expr(u).unwrap(),
                0.1,
                1.0,
                Sign::Plus,
                Sign::Plus,
                Sign::Minus,
                k,
                Interval::new(-0.7, 0.7),
            )
            .unwrap();
            for &s in &[0.1, 0.37, 0.7] {
                let a = z_of_s(&d, s, 1e-12).unwrap();
                let b = z_of_s(&d, -s, 1e-12).unwrap();
                assert!((b - parity * a).abs() < 1e-11, "{u}: {a} {b}");
            }
        }
    }

    #[test]
    fn series_and_quadrature_agree_on_overlap() {
        let d = sample_k1(0.2, 1.0);
        let ser = series(&d).unwrap();
        for &s in &[1e-4, 2e-3, 1e-2, 0.05] {
            let zq = z_of_s(&d, s, 1e-14).unwrap();
            assert!((ser.z.eval(s) - zq).abs() < 1e-14, "s={s}");
            let iq = theta_integral(&d, s, 1e-14).unwrap();
            assert!((ser.theta_integral.eval(s) - iq).abs() < 1e-14, "s={s}");
        }
    }

    #[test]
    fn psi_jet_low_order_structure() {
        for k in [1usize, 2] {
            let d = if k == 1 {
                sample_k1(0.2, 1.0)
            } else {
                make_edge_data(
                    parse_expr("(-s^2+2)*cos(s) + 2*s*sin(s) - 1").unwrap(),
                    0.1,
                    1.0,
                    Sign::Plus,
                    Sign::Plus,
                    Sign::Minus,
                    2,
                    Interval::new(-0.7, 0.7),
                )
                .unwrap()
            };
            let t = 0.7;
            let jets = psi_jet_at_zero(&d, t, 10).unwrap();
            let p0 = psi(&d, 0.0, t, 1e-12).unwrap();
            for (jc, pc) in jets.iter().zip(p0.position) {
                assert!((jc.value() - pc).abs() < 1e-14);
                for i in 1..=k {
                    assert!(jc.coeff(i).abs() < 1e-10);
                }
            }
            let bar: Vec3 = [0, 1, 2].map(|c| jets[c].derivative(k + 1));
            let kf = crate::jet::factorial(k);
            assert!((norm(bar) - kf).abs() < 1e-9);
            let pt = tangents(&d, 0.0, t, 1e-12).unwrap().1;
            assert!(dot(bar, pt).abs() < 1e-9);
        }
    }

    #[test]
    fn metric_identity_spot() {
        let d = sample_k1(0.2, 1.0);
        let g = first_fundamental_form(&d, 0.3, 1.0).unwrap();
        let u = d.profile().u_at(0.3).unwrap();
        assert!((g.e - 0.09).abs() < 1e-8);
        assert!(g.f.abs() < 1e-8);
        assert!((g.g - u * u).abs() < 1e-8);
        let g0 = first_fundamental_form(&d, 0.0, 2.0).unwrap();
        assert_eq!(g0.e, 0.0);
        assert!(g0.f.abs() < 1e-15);
        assert!((g0.g - 1.0).abs() < 1e-14);
    }

    #[test]
    fn screw_equivariance() {
        let d = sample_k1(0.2, 1.3);
        let (s, t, delta) = (0.45, 0.3, 0.9);
        let a = psi(&d, s, t, 1e-12).unwrap().position;
        let b = psi(&d, s, t + delta, 1e-12).unwrap().position;
        let ang = delta / 1.3;
        let rot = [
            a[0] * ang.cos() - a[1] * ang.sin(),
            a[0] * ang.sin() + a[1] * ang.cos(),
            a[2] + 0.2 * ang,
        ];
        for c in 0..3 {
            assert!((rot[c] - b[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn minimal_mesh_and_singular_row() {
        let d = sample_k1(0.2, 1.0);
        let m = sample_mesh(&d, Interval::new(-0.5, 0.5), default_t_range(&d), 2, 2, 1e-12).unwrap();
        assert_eq!(m.points.len(), 4);
        assert_eq!(m.quads().len(), 1);
        let m = sample_mesh(&d, Interval::new(-0.5, 0.5), default_t_range(&d), 10, 5, 1e-12).unwrap();
        let s = m.s_values();
        assert_eq!(s.iter().filter(|&&x| x == 0.0).count(), 1);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let r = m.singular_row.unwrap();
        assert!(m.point(r, 3).singular);
    }
}
