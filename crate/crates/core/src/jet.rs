//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] stores Taylor coefficients `c[i] = f^(i)(base) / i!`, never raw
//! derivatives; [`Jet::derivative`] converts on demand.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::expr::{BinaryOp, Expr, SmoothFn, UnaryOp};

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 32;

/// Denominators smaller than this raise a domain error.
pub const DIVISION_GUARD: f64 = 1e-14;

/// Relative threshold used by [`Jet::divide_by_power_default`].
pub const DEFAULT_DIVISION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet order {0} exceeds the maximum of {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("division by (near) zero {value:e} at base {base}")]
    DivisionByZero { base: f64, value: f64 },
    #[error("square root of non-positive value {value:e} at base {base}")]
    Sqrt { base: f64, value: f64 },
    #[error("logarithm of non-positive value {value:e} at base {base}")]
    Log { base: f64, value: f64 },
    #[error("not divisible by s^{k}: coefficient {index} is {value:e}")]
    NotDivisible { k: usize, index: usize, value: f64 },
    #[error("jets have mismatched base points or orders")]
    Mismatch,
}

/// Truncated Taylor expansion of a scalar function about `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    base: f64,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn from_coeffs(base: f64, coeffs: Vec<f64>) -> Result<Self, JetError> {
        if coeffs.is_empty() {
            return Err(JetError::Mismatch);
        }
        if coeffs.len() - 1 > MAX_ORDER {
            return Err(JetError::OrderTooLarge(coeffs.len() - 1));
        }
        Ok(Jet { base, coeffs })
    }

    /// Builds a jet from raw derivatives `f^(i)(base)`.
    pub fn from_derivatives(base: f64, derivs: &[f64]) -> Result<Self, JetError> {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                if i > 0 {
                    fact *= i as f64;
                }
                d / fact
            })
            .collect();
        Jet::from_coeffs(base, coeffs)
    }

    pub fn constant(base: f64, value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Jet { base, coeffs }
    }

    /// The identity function `x ↦ x` expanded about `base`.
    pub fn variable(base: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = base;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Jet { base, coeffs }
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `f^(i)(base)`; zero beyond the stored order.
    pub fn derivative(&self, i: usize) -> f64 {
        self.coeff(i) * factorial(i)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|i| self.derivative(i)).collect()
    }

    /// Evaluates the truncated polynomial at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.base;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let n = order.min(self.order());
        Jet {
            base: self.base,
            coeffs: self.coeffs[..=n].to_vec(),
        }
    }

    /// Zero-pads or truncates to exactly `order`.
    pub fn resize(&self, order: usize) -> Jet {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, 0.0);
        Jet {
            base: self.base,
            coeffs,
        }
    }

    pub fn scale(&self, a: f64) -> Jet {
        self.map(|c| a * c)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet {
            base: self.base,
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn add_const(&self, a: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += a;
        out
    }

    fn check(&self, other: &Jet) -> usize {
        debug_assert!(
            self.base == other.base,
            "jet base mismatch: {} vs {}",
            self.base,
            other.base
        );
        self.order().min(other.order())
    }

    /// Derivative jet (order drops by one; an order-0 jet yields the zero jet).
    pub fn differentiate(&self) -> Jet {
        if self.order() == 0 {
            return Jet::constant(self.base, 0.0, 0);
        }
        let coeffs = (1..self.coeffs.len())
            .map(|i| i as f64 * self.coeffs[i])
            .collect();
        Jet {
            base: self.base,
            coeffs,
        }
    }

    /// Antiderivative vanishing at `base` (order rises by one, capped at [`MAX_ORDER`]).
    pub fn integrate(&self) -> Jet {
        let n = (self.order() + 1).min(MAX_ORDER);
        let mut coeffs = vec![0.0; n + 1];
        for (i, c) in coeffs.iter_mut().enumerate().skip(1) {
            *c = self.coeffs[i - 1] / i as f64;
        }
        Jet {
            base: self.base,
            coeffs,
        }
    }

    /// Multiplies by `(x - base)^k`, keeping the order.
    pub fn shift_up(&self, k: usize) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        let len = coeffs.len();
        if k < len {
            coeffs[k..].copy_from_slice(&self.coeffs[..len - k]);
        }
        Jet {
            base: self.base,
            coeffs,
        }
    }

    /// Jet of the smooth quotient `f(x) / (x - base)^k`.
    ///
    /// The first `k` coefficients must be at most `tol` in magnitude.
    pub fn divide_by_power(&self, k: usize, tol: f64) -> Result<Jet, JetError> {
        if k > self.order() {
            return Err(JetError::NotDivisible {
                k,
                index: self.order(),
                value: f64::NAN,
            });
        }
        if let Some((index, &value)) = self.coeffs[..k]
            .iter()
            .enumerate()
            .find(|(_, c)| c.abs() > tol)
        {
            return Err(JetError::NotDivisible { k, index, value });
        }
        Ok(Jet {
            base: self.base,
            coeffs: self.coeffs[k..].to_vec(),
        })
    }

    /// [`Jet::divide_by_power`] with a tolerance of 1e-9 times the largest retained coefficient.
    pub fn divide_by_power_default(&self, k: usize) -> Result<Jet, JetError> {
        let scale = self
            .coeffs
            .get(k..)
            .map(|c| c.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .unwrap_or(0.0);
        self.divide_by_power(k, DEFAULT_DIVISION_TOL * scale)
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let n = self.check(other);
        let mut coeffs = vec![0.0; n + 1];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = (0..=i).map(|j| self.coeffs[j] * other.coeffs[i - j]).sum();
        }
        Jet {
            base: self.base,
            coeffs,
        }
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        Jet::constant(self.base, 1.0, self.order()).div_jet(self)
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet, JetError> {
        let n = self.check(other);
        let b0 = other.coeffs[0];
        if b0.abs() < DIVISION_GUARD {
            return Err(JetError::DivisionByZero {
                base: self.base,
                value: b0,
            });
        }
        let mut q = vec![0.0; n + 1];
        for i in 0..=n {
            let acc: f64 = (1..=i).map(|j| other.coeffs[j] * q[i - j]).sum();
            q[i] = (self.coeffs[i] - acc) / b0;
        }
        Ok(Jet {
            base: self.base,
            coeffs: q,
        })
    }

    pub fn exp(&self) -> Jet {
        let n = self.order();
        let a = &self.coeffs;
        let mut e = vec![0.0; n + 1];
        e[0] = a[0].exp();
        for i in 1..=n {
            let acc: f64 = (1..=i).map(|j| j as f64 * a[j] * e[i - j]).sum();
            e[i] = acc / i as f64;
        }
        Jet {
            base: self.base,
            coeffs: e,
        }
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let n = self.order();
        let a = &self.coeffs;
        if a[0] <= 0.0 {
            return Err(JetError::Log {
                base: self.base,
                value: a[0],
            });
        }
        let mut l = vec![0.0; n + 1];
        l[0] = a[0].ln();
        for i in 1..=n {
            let acc: f64 = (1..i).map(|j| j as f64 * l[j] * a[i - j]).sum();
            l[i] = (a[i] - acc / i as f64) / a[0];
        }
        Ok(Jet {
            base: self.base,
            coeffs: l,
        })
    }

    /// `(sin f, cos f)` by the coupled recurrence.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.order();
        let a = &self.coeffs;
        let mut s = vec![0.0; n + 1];
        let mut c = vec![0.0; n + 1];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for i in 1..=n {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=i {
                let ja = j as f64 * a[j];
                ss += ja * c[i - j];
                cc += ja * s[i - j];
            }
            s[i] = ss / i as f64;
            c[i] = -cc / i as f64;
        }
        (
            Jet {
                base: self.base,
                coeffs: s,
            },
            Jet {
                base: self.base,
                coeffs: c,
            },
        )
    }

    pub fn sin(&self) -> Jet {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet {
        self.sin_cos().1
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let n = self.order();
        let a = &self.coeffs;
        if a[0] < 0.0 || (a[0] == 0.0 && n > 0) {
            return Err(JetError::Sqrt {
                base: self.base,
                value: a[0],
            });
        }
        let mut r = vec![0.0; n + 1];
        r[0] = a[0].sqrt();
        for i in 1..=n {
            let acc: f64 = (1..i).map(|j| r[j] * r[i - j]).sum();
            r[i] = (a[i] - acc) / (2.0 * r[0]);
        }
        Ok(Jet {
            base: self.base,
            coeffs: r,
        })
    }

    /// Real power with positive constant term.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        let n = self.order();
        let a = &self.coeffs;
        if a[0] <= 0.0 {
            return Err(JetError::Log {
                base: self.base,
                value: a[0],
            });
        }
        // (a^p)' a = p a' a^p, solved term by term
        let mut r = vec![0.0; n + 1];
        r[0] = a[0].powf(p);
        for i in 1..=n {
            let acc: f64 = (1..=i)
                .map(|j| (p * j as f64 - (i - j) as f64) * a[j] * r[i - j])
                .sum();
            r[i] = acc / (i as f64 * a[0]);
        }
        Ok(Jet {
            base: self.base,
            coeffs: r,
        })
    }

    pub fn powi(&self, n: i32) -> Result<Jet, JetError> {
        let mut result = Jet::constant(self.base, 1.0, self.order());
        let mut sq = self.clone();
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul_jet(&sq);
            }
        }
        if n < 0 {
            result.recip()
        } else {
            Ok(result)
        }
    }

    /// `self ∘ inner`, where `inner(inner.base) = self.base` (up to `tol`).
    ///
    /// The result is expanded about `inner.base` at the order of `inner`.
    pub fn compose(&self, inner: &Jet) -> Jet {
        let n = inner.order();
        let mut delta = inner.clone();
        delta.coeffs[0] -= self.base;
        let mut acc = Jet::constant(inner.base, 0.0, n);
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul_jet(&delta).add_const(c);
        }
        acc
    }

    /// Series reversion: the jet of the inverse function about `self.value()`.
    ///
    /// Requires a non-zero first coefficient.
    pub fn reversion(&self) -> Result<Jet, JetError> {
        let n = self.order();
        let a1 = self.coeff(1);
        if a1.abs() < DIVISION_GUARD {
            return Err(JetError::DivisionByZero {
                base: self.base,
                value: a1,
            });
        }
        let y0 = self.coeffs[0];
        // Newton-free fixed point: g <- g + (id - f∘g)/f'(x0); each sweep fixes one more order.
        let mut g = Jet::variable(y0, n);
        g.coeffs[0] = self.base;
        if n >= 1 {
            g.coeffs[1] = 1.0 / a1;
        }
        let id = Jet::variable(y0, n);
        for _ in 0..n {
            let fg = self.compose(&g);
            let r = &id - &fg;
            g = &g + &r.scale(1.0 / a1);
        }
        Ok(g)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let n = self.check(rhs);
        Jet {
            base: self.base,
            coeffs: (0..=n).map(|i| self.coeffs[i] + rhs.coeffs[i]).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.check(rhs);
        Jet {
            base: self.base,
            coeffs: (0..=n).map(|i| self.coeffs[i] - rhs.coeffs[i]).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Taylor coefficients of `f` about `base` up to `order`.
pub fn jet_eval(f: &SmoothFn, base: f64, order: usize) -> Result<Jet, JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderTooLarge(order));
    }
    eval_node(f.root(), &Jet::variable(base, order))
}

/// Evaluates `f` on an arbitrary input jet, i.e. the jet of `f ∘ input`.
pub fn jet_eval_on(f: &SmoothFn, input: &Jet) -> Result<Jet, JetError> {
    eval_node(f.root(), input)
}

fn eval_node(e: &Expr, x: &Jet) -> Result<Jet, JetError> {
    Ok(match e {
        Expr::Const(c) => Jet::constant(x.base, *c, x.order()),
        Expr::Var => x.clone(),
        Expr::Unary(op, a) => {
            let a = eval_node(a, x)?;
            match op {
                UnaryOp::Neg => -&a,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Sqrt => a.sqrt()?,
            }
        }
        Expr::Binary(op, a, b) => {
            let a = eval_node(a, x)?;
            let b = eval_node(b, x)?;
            match op {
                BinaryOp::Add => &a + &b,
                BinaryOp::Sub => &a - &b,
                BinaryOp::Mul => &a * &b,
                BinaryOp::Div => a.div_jet(&b)?,
            }
        }
        Expr::Pow(a, n) => eval_node(a, x)?.powi(*n)?,
    })
}
