//! Independent reference computations used by the statistics tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use telewaypoint_stats::{Effect, Participant};

/// Sums of squares of one effect and its error term.
#[derive(Debug, Clone, Copy)]
pub struct OracleSs {
    pub ss: f64,
    pub ss_error: f64,
}

/// Brute-force sums of squares from cell, marginal and subject means over
/// every observation y[i][j][k] (participant, control, delay).
pub fn brute_force_ss(ps: &[Participant]) -> Vec<(Effect, OracleSs)> {
    let n = ps.len();
    let y = |i: usize, j: usize, k: usize| ps[i].cells[j][k];
    let g = |i: usize| ps[i].group as usize;
    let mean_over = |filter: &dyn Fn(usize, usize, usize) -> bool| {
        let (mut s, mut c) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..2 {
                for k in 0..2 {
                    if filter(i, j, k) {
                        s += y(i, j, k);
                        c += 1.0;
                    }
                }
            }
        }
        s / c
    };
    let grand = mean_over(&|_, _, _| true);
    let mj: Vec<f64> = (0..2).map(|j| mean_over(&|_, jj, _| jj == j)).collect();
    let mk: Vec<f64> = (0..2).map(|k| mean_over(&|_, _, kk| kk == k)).collect();
    let mjk: Vec<Vec<f64>> =
        (0..2).map(|j| (0..2).map(|k| mean_over(&|_, jj, kk| jj == j && kk == k)).collect()).collect();
    let mg: Vec<f64> = (0..2).map(|h| mean_over(&|i, _, _| g(i) == h)).collect();
    let mgj: Vec<Vec<f64>> =
        (0..2).map(|h| (0..2).map(|j| mean_over(&|i, jj, _| g(i) == h && jj == j)).collect()).collect();
    let mgk: Vec<Vec<f64>> =
        (0..2).map(|h| (0..2).map(|k| mean_over(&|i, _, kk| g(i) == h && kk == k)).collect()).collect();
    let mgjk: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|h| {
            (0..2)
                .map(|j| (0..2).map(|k| mean_over(&|i, jj, kk| g(i) == h && jj == j && kk == k)).collect())
                .collect()
        })
        .collect();
    let mi: Vec<f64> = (0..n).map(|i| (0..4).map(|c| y(i, c / 2, c % 2)).sum::<f64>() / 4.0).collect();
    let mij = |i: usize, j: usize| (y(i, j, 0) + y(i, j, 1)) / 2.0;
    let mik = |i: usize, k: usize| (y(i, 0, k) + y(i, 1, k)) / 2.0;

    let mut acc = [0.0f64; 11];
    for i in 0..n {
        let h = g(i);
        for j in 0..2 {
            for k in 0..2 {
                let terms = [
                    mj[j] - grand,
                    mk[k] - grand,
                    mg[h] - grand,
                    mjk[j][k] - mj[j] - mk[k] + grand,
                    mgj[h][j] - mg[h] - mj[j] + grand,
                    mgk[h][k] - mg[h] - mk[k] + grand,
                    mgjk[h][j][k] - mgj[h][j] - mgk[h][k] - mjk[j][k] + mg[h] + mj[j] + mk[k] - grand,
                    mi[i] - mg[h],
                    mij(i, j) - mi[i] - mgj[h][j] + mg[h],
                    mik(i, k) - mi[i] - mgk[h][k] + mg[h],
                    y(i, j, k) - mij(i, j) - mik(i, k) + mi[i] - mgjk[h][j][k] + mgj[h][j] + mgk[h][k]
                        - mg[h],
                ];
                for (a, t) in acc.iter_mut().zip(terms) {
                    *a += t * t;
                }
            }
        }
    }
    let e = |ss, ss_error| OracleSs { ss, ss_error };
    vec![
        (Effect::Control, e(acc[0], acc[8])),
        (Effect::Delay, e(acc[1], acc[9])),
        (Effect::Order, e(acc[2], acc[7])),
        (Effect::ControlDelay, e(acc[3], acc[10])),
        (Effect::ControlOrder, e(acc[4], acc[8])),
        (Effect::DelayOrder, e(acc[5], acc[9])),
        (Effect::ControlDelayOrder, e(acc[6], acc[10])),
    ]
}

/// F ratio for one-df effects with N − 2 error df.
pub fn oracle_f(s: OracleSs, n: usize) -> f64 {
    s.ss / (s.ss_error / (n - 2) as f64)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature with Richardson correction. The range is
/// presplit into panels so narrow peaks are not missed by the first estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 64;
    if a == b {
        return 0.0;
    }
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 50)
        })
        .sum()
}

/// Student t CDF by quadrature. With t = √ν·tan θ the density becomes
/// proportional to cos^(ν−1) θ on (−π/2, π/2).
pub fn t_cdf_quadrature(x: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().powf(df - 1.0);
    cdf_by_angle(&f, -FRAC_PI_2, (x / df.sqrt()).atan(), FRAC_PI_2)
}

/// F CDF by quadrature. Through w = d1 x / (d1 x + d2) and w = sin² θ the
/// density becomes proportional to sin^(d1−1) θ · cos^(d2−1) θ on (0, π/2).
pub fn f_cdf_quadrature(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let f = |th: f64| th.sin().powf(d1 - 1.0) * th.cos().powf(d2 - 1.0);
    let w = d1 * x / (d1 * x + d2);
    cdf_by_angle(&f, 0.0, w.sqrt().asin(), FRAC_PI_2)
}

/// ∫_lo^at f / ∫_lo^hi f. The tolerance is relative to the total mass (the
/// densities can be tiny in absolute terms) and the smaller side is
/// integrated so a CDF near 1 keeps its accuracy.
fn cdf_by_angle(f: &dyn Fn(f64) -> f64, lo: f64, at: f64, hi: f64) -> f64 {
    // composite Simpson on a fixed grid is enough to fix the scale
    const N: usize = 4096;
    let h = (hi - lo) / N as f64;
    let scale: f64 = (0..=N)
        .map(|i| {
            let w = if i == 0 || i == N { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(lo + h * i as f64)
        })
        .sum::<f64>()
        * h
        / 3.0;
    let tol = scale.abs() * 1e-14;
    let total = integrate(f, lo, hi, tol);
    let left = integrate(f, lo, at, tol);
    if left <= 0.5 * total {
        left / total
    } else {
        1.0 - integrate(f, at, hi, tol) / total
    }
}
