//! Invariants along the singular curve `s = 0`.
//!
//! Every quantity has a closed form in terms of `U` and `(h, m)` and a numeric
//! oracle evaluated from the surface jets with `ξ = ∂_t`, `η = ∂_s`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bour::{cross, det3, dot, norm, psi_jet_at_zero, BourError, Vec3};
use crate::jet::{binomial, factorial};
use crate::profile::EdgeData;

/// Step of the central difference in `t` used by the torsion oracle.
pub const MIXED_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("ladder condition fails: U^({order})(0) = {value:e} is not zero")]
    LadderViolated { order: usize, value: f64 },
    #[error("index i = {i} outside 1..={max} for n = {n}")]
    IndexOutOfRange { i: usize, n: usize, max: usize },
    #[error(transparent)]
    Bour(#[from] BourError),
}

pub fn kappa_nu(data: &EdgeData) -> f64 {
    let u0 = data.u0();
    data.rho0() / (data.m() * data.m() * u0 * u0)
}

pub fn kappa_t(data: &EdgeData) -> f64 {
    let u0 = data.u0();
    data.h() / (data.m() * data.m() * u0 * u0)
}

/// Checks `U^(n+j)(0) = 0` for `j = 1..upto`.
fn check_ladder(data: &EdgeData, upto: usize) -> Result<(), InvariantError> {
    let p = data.profile();
    let band = p.zero_band();
    for j in 1..=upto {
        let order = data.n() + j;
        let value = p.u_derivative_at_zero(order);
        if value.abs() > band {
            return Err(InvariantError::LadderViolated { order, value });
        }
    }
    Ok(())
}

fn check_index(data: &EdgeData, i: usize) -> Result<(), InvariantError> {
    let n = data.n();
    if i == 0 || i >= n {
        return Err(InvariantError::IndexOutOfRange { i, n, max: n - 1 });
    }
    Ok(())
}

/// `(n, n+i)`-cuspidal curvature for `1 ≤ i ≤ n−1`.
pub fn omega(data: &EdgeData, i: usize) -> Result<f64, InvariantError> {
    check_index(data, i)?;
    check_ladder(data, i - 1)?;
    let n = data.n();
    let (m, u0) = (data.m(), data.u0());
    let sign = (data.eps1() * data.eps2()).value();
    let d = data.profile().u_derivative_at_zero(n + i);
    let norm_pow = factorial(n - 1).powf((n + i) as f64 / n as f64);
    Ok(sign * m * m * u0 * d / (norm_pow * data.rho0()))
}

/// `(n, 2n)`-bias; requires the whole ω ladder to vanish.
pub fn beta(data: &EdgeData) -> Result<f64, InvariantError> {
    let n = data.n();
    check_ladder(data, n - 1)?;
    let (h, m, u0) = (data.h(), data.m(), data.u0());
    let sign = (data.eps1() * data.eps2()).value();
    let d = data.profile().u_derivative_at_zero(2 * n);
    let kf = factorial(n - 1);
    let first = m * m * u0 * d / (kf * kf);
    let second = binomial(2 * n - 1, n) * h * h / (m * m * u0 * u0);
    Ok(sign * (first - second) / data.rho0())
}

/// Derivatives of `Ψ` at `(0, t)`: `s`-derivatives of orders `0..=order` and the
/// `t`-derivatives read off the screw structure.
struct SingularFrame {
    ds: Vec<Vec3>,
    psi_t: Vec3,
    psi_tt: Vec3,
}

fn frame(data: &EdgeData, t: f64, order: usize) -> Result<SingularFrame, InvariantError> {
    let jets = psi_jet_at_zero(data, t, order)?;
    let ds: Vec<Vec3> = (0..=order)
        .map(|i| [0, 1, 2].map(|c| jets[c].derivative(i)))
        .collect();
    // Ψ(s, t + δ) is Ψ(s, t) screwed by angle ε₁δ/m and lift hε₁δ/m
    let w = data.eps1().value() / data.m();
    let p = ds[0];
    Ok(SingularFrame {
        psi_t: [-w * p[1], w * p[0], w * data.h()],
        psi_tt: [-w * w * p[0], -w * w * p[1], 0.0],
        ds,
    })
}

/// `Ψ_{s^j}(0, t)` for `j = 0..=order`.
pub fn s_derivatives(data: &EdgeData, t: f64, order: usize) -> Result<Vec<Vec3>, InvariantError> {
    Ok(frame(data, t, order)?.ds)
}

/// Limiting normal curvature from `Ψ_tt·ν/‖Ψ_t‖²`, `ν = −ε₁ε₂ (Ψ_t × Ψ_{s^n})/‖Ψ_t × Ψ_{s^n}‖`.
pub fn kappa_nu_numeric_at(data: &EdgeData, t: f64) -> Result<f64, InvariantError> {
    let n = data.n();
    let f = frame(data, t, n)?;
    let c = cross(f.psi_t, f.ds[n]);
    let sign = -(data.eps1() * data.eps2()).value();
    let nu = c.map(|x| sign * x / norm(c));
    Ok(dot(f.psi_tt, nu) / dot(f.psi_t, f.psi_t))
}

pub fn kappa_nu_numeric(data: &EdgeData) -> Result<f64, InvariantError> {
    kappa_nu_numeric_at(data, 0.0)
}

/// Both terms of the torsion quotient; the mixed derivative `Ψ_{s^n t}` is a
/// Richardson-extrapolated central difference in `t` of the jet coefficients.
pub fn kappa_t_terms_at(data: &EdgeData, t: f64) -> Result<(f64, f64), InvariantError> {
    let n = data.n();
    let f = frame(data, t, n)?;
    let at = |tt: f64| -> Result<Vec3, InvariantError> { Ok(s_derivatives(data, tt, n)?[n]) };
    let central = |step: f64| -> Result<Vec3, InvariantError> {
        let (a, b) = (at(t + step)?, at(t - step)?);
        Ok([0, 1, 2].map(|c| (a[c] - b[c]) / (2.0 * step)))
    };
    let coarse = central(MIXED_STEP)?;
    let fine = central(MIXED_STEP / 2.0)?;
    let mixed = [0, 1, 2].map(|c| (4.0 * fine[c] - coarse[c]) / 3.0);
    let (xi, eta) = (f.psi_t, f.ds[n]);
    let cr = dot(cross(xi, eta), cross(xi, eta));
    let first = det3(xi, eta, mixed) / cr;
    let second = dot(xi, eta) * det3(xi, eta, f.psi_tt) / (dot(xi, xi) * cr);
    Ok((first, second))
}

pub fn kappa_t_numeric_at(data: &EdgeData, t: f64) -> Result<f64, InvariantError> {
    let (a, b) = kappa_t_terms_at(data, t)?;
    Ok(a - b)
}

pub fn kappa_t_numeric(data: &EdgeData) -> Result<f64, InvariantError> {
    kappa_t_numeric_at(data, 0.0)
}

/// General-definition quotient `‖ξf‖^{(n+i)/n} det(ξf, ηⁿf, η^{n+i}f) / ‖ξf × ηⁿf‖^{(2n+i)/n}`.
fn cuspidal_quotient(data: &EdgeData, t: f64, i: usize) -> Result<f64, InvariantError> {
    let n = data.n();
    let f = frame(data, t, n + i)?;
    let (xi, eta) = (f.psi_t, f.ds[n]);
    let ni = n as f64;
    let num = norm(xi).powf((n + i) as f64 / ni) * det3(xi, eta, f.ds[n + i]);
    Ok(num / norm(cross(xi, eta)).powf((2 * n + i) as f64 / ni))
}

pub fn omega_numeric_at(data: &EdgeData, i: usize, t: f64) -> Result<f64, InvariantError> {
    check_index(data, i)?;
    check_ladder(data, i - 1)?;
    cuspidal_quotient(data, t, i)
}

pub fn omega_numeric(data: &EdgeData, i: usize) -> Result<f64, InvariantError> {
    omega_numeric_at(data, i, 0.0)
}

pub fn beta_numeric_at(data: &EdgeData, t: f64) -> Result<f64, InvariantError> {
    check_ladder(data, data.n() - 1)?;
    cuspidal_quotient(data, t, data.n())
}

pub fn beta_numeric(data: &EdgeData) -> Result<f64, InvariantError> {
    beta_numeric_at(data, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub closed: f64,
    pub oracle: f64,
}

impl Pair {
    pub fn discrepancy(&self) -> f64 {
        (self.closed - self.oracle).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub kappa_nu: Pair,
    pub kappa_t: Pair,
    /// `(i, closed, oracle)` for every defined `ω_{n,n+i}`.
    pub omega: Vec<(usize, f64, f64)>,
    pub beta: Option<Pair>,
    pub max_discrepancy: f64,
}

impl InvariantReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// All invariants at `(0, t)`; ω entries stop at the first non-vanishing rung.
pub fn invariant_report_at(data: &EdgeData, t: f64) -> Result<InvariantReport, InvariantError> {
    let kn = Pair {
        closed: kappa_nu(data),
        oracle: kappa_nu_numeric_at(data, t)?,
    };
    let kt = Pair {
        closed: kappa_t(data),
        oracle: kappa_t_numeric_at(data, t)?,
    };
    let mut omegas = Vec::new();
    for i in 1..data.n() {
        match omega(data, i) {
            Ok(c) => omegas.push((i, c, omega_numeric_at(data, i, t)?)),
            Err(InvariantError::LadderViolated { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    let beta = match beta(data) {
        Ok(c) => Some(Pair {
            closed: c,
            oracle: beta_numeric_at(data, t)?,
        }),
        Err(InvariantError::LadderViolated { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut max = kn.discrepancy().max(kt.discrepancy());
    for &(_, c, o) in &omegas {
        max = max.max((c - o).abs());
    }
    if let Some(b) = &beta {
        max = max.max(b.discrepancy());
    }
    Ok(InvariantReport {
        kappa_nu: kn,
        kappa_t: kt,
        omega: omegas,
        beta,
        max_discrepancy: max,
    })
}

pub fn invariant_report(data: &EdgeData) -> Result<InvariantReport, InvariantError> {
    invariant_report_at(data, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::profile::{make_edge_data, Interval, Sign};

    fn datum(u: &str, k: usize, h: f64, m: f64, j: f64) -> EdgeData {
        make_edge_data(
            parse_expr(u).unwrap(),
            h,
            m,
            Sign::Plus,
            Sign::Plus,
            Sign::Minus,
            k,
            Interval::new(-j, j),
        )
        .unwrap()
    }

    fn sample_k1() -> EdgeData {
        datum("1 - s*cos(s) + sin(s)", 1, 0.2, 1.0, 0.8)
    }

    #[test]
    fn example_values() {
        let d = sample_k1();
        assert!((kappa_nu(&d) - 0.96f64.sqrt()).abs() < 1e-15);
        assert!((kappa_t(&d) - 0.2).abs() < 1e-15);
        let w = omega(&d, 1).unwrap();
        assert!((w + 2.0 / 0.96f64.sqrt()).abs() < 1e-12);
        assert!(matches!(omega(&d, 2), Err(InvariantError::IndexOutOfRange { .. })));
        assert!(matches!(omega(&d, 0), Err(InvariantError::IndexOutOfRange { .. })));
        assert!(matches!(beta(&d), Err(InvariantError::LadderViolated { order: 3, .. })));
    }

    #[test]
    fn oracles_agree_on_example() {
        let d = sample_k1();
        for t in [0.0, 1.0, 2.0] {
            assert!((kappa_nu_numeric_at(&d, t).unwrap() - kappa_nu(&d)).abs() < 1e-9);
            assert!((kappa_t_numeric_at(&d, t).unwrap() - kappa_t(&d)).abs() < 1e-6);
            assert!((omega_numeric_at(&d, 1, t).unwrap() - omega(&d, 1).unwrap()).abs() < 1e-6);
            let (_, second) = kappa_t_terms_at(&d, t).unwrap();
            assert!(second.abs() < 1e-9);
        }
    }

    #[test]
    fn k2_sample_omega() {
        let d = datum("(-s^2+2)*cos(s) + 2*s*sin(s) - 1", 2, 0.1, 1.0, 0.7);
        let rho0 = (1.0f64 - 0.01).sqrt();
        let expect = -6.0 / (2f64.powf(4.0 / 3.0) * rho0);
        assert!((omega(&d, 1).unwrap() - expect).abs() < 1e-9);
        assert!((omega_numeric(&d, 1).unwrap() - expect).abs() < 1e-6);
        let r = invariant_report(&d).unwrap();
        assert_eq!(r.omega.len(), 1);
        assert!(r.beta.is_none());
        assert!(r.max_discrepancy < 1e-6);
    }

    #[test]
    fn beta_against_oracle() {
        // U = 1 + c s⁴/24 has U'''(0) = 0, U⁽⁴⁾(0) = c
        for h in [0.0, 0.25] {
            let d = datum("1 + 0.5*s^4/24", 1, h, 1.1, 0.5);
            let b = beta(&d).unwrap();
            let closed = -(1.1f64.powi(2) * 0.5 - 3.0 * h * h / 1.1f64.powi(2)) / d.rho0();
            assert!((b - closed).abs() < 1e-12);
            assert!((beta_numeric(&d).unwrap() - b).abs() < 1e-6, "h={h}");
            let r = invariant_report(&d).unwrap();
            assert_eq!(r.omega.len(), 1);
            assert_eq!(r.omega[0].1, 0.0);
            assert!(r.beta.is_some());
        }
    }

    #[test]
    fn sign_variants() {
        let d = sample_k1();
        for (e1, e2) in [(Sign::Minus, Sign::Minus), (Sign::Minus, Sign::Plus), (Sign::Plus, Sign::Plus)] {
            let v = d.with_signs(Sign::Minus, e1, e2);
            assert_eq!(kappa_nu(&v), kappa_nu(&d));
            assert!((kappa_nu_numeric(&v).unwrap() - kappa_nu(&d)).abs() < 1e-9);
            assert!((kappa_t_numeric(&v).unwrap() - kappa_t(&d)).abs() < 1e-6);
            assert!((omega_numeric(&v, 1).unwrap() - omega(&v, 1).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn report_json_shape() {
        let r = invariant_report(&sample_k1()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(v["kappa_nu"]["closed"].is_f64());
        assert!(v["kappa_t"]["oracle"].is_f64());
        assert_eq!(v["omega"][0][0], 1);
        assert!(v["beta"].is_null());
        assert!(v["max_discrepancy"].as_f64().unwrap() < 1e-6);
    }
}
