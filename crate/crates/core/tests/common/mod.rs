#![allow(dead_code)]

use bour_core::expr::parse_expr;
use bour_core::profile::{make_edge_data, EdgeData, Interval, Sign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const U_K1: &str = "1 - s*cos(s) + sin(s)";
pub const U_K2: &str = "(-s^2+2)*cos(s) + 2*s*sin(s) - 1";

pub fn sample_k1_with(h: f64, m: f64) -> EdgeData {
    make_edge_data(
        parse_expr(U_K1).unwrap(),
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

pub fn sample_k1() -> EdgeData {
    sample_k1_with(0.2, 1.0)
}

pub fn sample_k2() -> EdgeData {
    make_edge_data(
        parse_expr(U_K2).unwrap(),
        0.1,
        1.0,
        Sign::Plus,
        Sign::Plus,
        Sign::Minus,
        2,
        Interval::new(-0.7, 0.7),
    )
    .unwrap()
}

fn sign(rng: &mut ChaCha8Rng) -> Sign {
    if rng.gen_bool(0.5) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Trigonometric profile with `U'(0) = … = U^(k)(0) = 0`.
pub fn random_u(rng: &mut ChaCha8Rng, k: usize) -> String {
    let c0 = rng.gen_range(0.8..1.5);
    let a = rng.gen_range(-1.0..1.0);
    let b = rng.gen_range(-1.0..1.0);
    let w = rng.gen_range(0.5..2.0);
    match k {
        1 => format!("{c0} + ({a})*(1 - cos({w}*s)) + ({b})*(s - sin(s))"),
        _ => format!("{c0} + ({a})*(s - sin(s)) + ({b})*(s^2 - 2 + 2*cos(s)) + 0.1*({w})*(s - sin(s))^2"),
    }
}

pub fn random_datum(rng: &mut ChaCha8Rng) -> EdgeData {
    loop {
        let k = rng.gen_range(1..=2);
        let u = random_u(rng, k);
        let h = rng.gen_range(-0.3..0.3);
        let m = rng.gen_range(0.7..1.3);
        let half = rng.gen_range(0.2..0.3);
        let (e0, e1, e2) = (sign(rng), sign(rng), sign(rng));
        if let Ok(d) = make_edge_data(parse_expr(&u).unwrap(), h, m, e0, e1, e2, k, Interval::new(-half, half)) {
            return d;
        }
    }
}

pub fn corpus(seed: u64, n: usize) -> Vec<EdgeData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_datum(&mut rng)).collect()
}

/// `corpus(seed, 20)` plus both sample data.
pub fn full_corpus(seed: u64) -> Vec<EdgeData> {
    let mut v = corpus(seed, 20);
    v.push(sample_k1());
    v.push(sample_k2());
    v
}
