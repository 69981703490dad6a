//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("tolerance {tol:e} not reached after {subdivisions} subdivisions (error estimate {estimate:e})")]
    Failure {
        tol: f64,
        subdivisions: usize,
        estimate: f64,
    },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: DEFAULT_ABS_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

// Kronrod abscissae (positive half, descending) and weights; every other node is a Gauss node.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[a, b]` (either orientation) to absolute tolerance `opts.abs_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        return integrate(f, b, a, opts).map(|r| QuadResult {
            value: -r.value,
            ..r
        });
    }
    let first = kronrod15(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;
    while err > opts.abs_tol {
        if subdivisions >= opts.max_subdivisions {
            return Err(QuadError::Failure {
                tol: opts.abs_tol,
                subdivisions,
                estimate: err,
            });
        }
        let worst = heap.pop().expect("heap holds every live segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            return Err(QuadError::Failure {
                tol: opts.abs_tol,
                subdivisions,
                estimate: err,
            });
        }
        let left = kronrod15(&mut f, worst.a, mid)?;
        let right = kronrod15(&mut f, mid, worst.b)?;
        evaluations += 30;
        subdivisions += 1;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // refresh the running estimate to shed accumulated cancellation
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(QuadResult {
        value: heap.iter().map(|s| s.value).sum(),
        abs_error: err,
        evaluations,
    })
}
