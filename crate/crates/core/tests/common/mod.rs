//! Independent oracles and random instance generators shared by the
//! integration and acceptance suites. Nothing here calls the solver.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sonclust_core::{Dataset, Points};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

pub fn gaussian_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    Dataset::from_rows(&gaussian_rows(rng, n, d, 1.0)).unwrap()
}

/// A few well-spread blobs, so random instances contain nontrivial clusters.
pub fn blob_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let blobs = rng.random_range(1..=4);
    let centers = gaussian_rows(rng, blobs, d, 4.0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let c = &centers[rng.random_range(0..blobs)];
            c.iter()
                .map(|m| m + 0.7 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Dataset::from_rows(&rows).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Two points move `lambda` toward each other along their difference, or
/// meet at the midpoint once `2 lambda >= |a1 - a2|`.
pub fn two_point_closed_form(a1: &[f64], a2: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let gap = dist(a1, a2);
    if 2.0 * lambda >= gap {
        let mid: Vec<f64> = a1.iter().zip(a2).map(|(x, y)| 0.5 * (x + y)).collect();
        (mid.clone(), mid)
    } else {
        let unit: Vec<f64> = a1.iter().zip(a2).map(|(x, y)| (y - x) / gap).collect();
        (
            a1.iter().zip(&unit).map(|(x, u)| x + lambda * u).collect(),
            a2.iter().zip(&unit).map(|(x, u)| x - lambda * u).collect(),
        )
    }
}

pub fn objective_1d(a: &[f64], x: &[f64], lambda: f64) -> f64 {
    let fit: f64 = a.iter().zip(x).map(|(a, x)| 0.5 * (x - a).powi(2)).sum();
    let mut fuse = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            fuse += (x[i] - x[j]).abs();
        }
    }
    fit + lambda * fuse
}

/// Grid search over the data's bounding interval followed by pattern search
/// along all 26 directions of `{-1, 0, 1}^3` with step halving.
pub fn grid_descent_oracle_3(a: [f64; 3], lambda: f64) -> ([f64; 3], f64) {
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cells = 40;
    let h = ((hi - lo) / cells as f64).max(1e-12);
    let f = |x: &[f64; 3]| objective_1d(&a, x, lambda);

    let mut best = a;
    let mut best_val = f(&best);
    for i in 0..=cells {
        for j in 0..=cells {
            for k in 0..=cells {
                let x = [lo + i as f64 * h, lo + j as f64 * h, lo + k as f64 * h];
                let v = f(&x);
                if v < best_val {
                    best = x;
                    best_val = v;
                }
            }
        }
    }

    let dirs: Vec<[f64; 3]> = (0..27)
        .map(|c| {
            [
                (c % 3) as f64 - 1.0,
                ((c / 3) % 3) as f64 - 1.0,
                (c / 9) as f64 - 1.0,
            ]
        })
        .filter(|d| d.iter().any(|v| *v != 0.0))
        .collect();
    let mut step = h;
    while step > 1e-13 {
        let mut improved = false;
        for d in &dirs {
            let cand = [
                best[0] + step * d[0],
                best[1] + step * d[1],
                best[2] + step * d[2],
            ];
            let v = f(&cand);
            if v < best_val {
                best = cand;
                best_val = v;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_val)
}

/// Exact 1-D optimum for three points: the optimizer preserves order and each
/// fused run sits at `mean(run) - lambda * (below - above)`, so the best of
/// the four contiguous fusion patterns is the optimum.
pub fn enumeration_oracle_3(a: [f64; 3], lambda: f64) -> f64 {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let sorted = [a[order[0]], a[order[1]], a[order[2]]];
    let patterns: [&[&[usize]]; 4] = [
        &[&[0], &[1], &[2]],
        &[&[0, 1], &[2]],
        &[&[0], &[1, 2]],
        &[&[0, 1, 2]],
    ];
    patterns
        .iter()
        .map(|groups| {
            let mut x = [0.0; 3];
            let mut below = 0;
            for g in groups.iter() {
                let above = 3 - below - g.len();
                let mean = g.iter().map(|&i| sorted[i]).sum::<f64>() / g.len() as f64;
                for &i in g.iter() {
                    x[i] = mean - lambda * (below as f64 - above as f64);
                }
                below += g.len();
            }
            objective_1d(&sorted, &x, lambda)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn points_1d(values: &[f64]) -> Points {
    Points::from_scalars(values).unwrap()
}
