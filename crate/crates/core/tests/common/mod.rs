//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the estimators under test; linear algebra is
//! plain Gauss–Jordan on `Vec<Vec<f64>>`.

#![allow(dead_code)]

pub mod pipeline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenekit::panel_fe::{PanelDataset, PanelRow};

/// Inverse of a square matrix by Gauss–Jordan with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[row][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn xtx(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = x[0].len();
    let mut out = vec![vec![0.0; p]; p];
    for row in x {
        for i in 0..p {
            for j in 0..p {
                out[i][j] += row[i] * row[j];
            }
        }
    }
    out
}

fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Dummy-variable OLS: regressors plus one indicator per entity.
pub struct Lsdv {
    pub beta: Vec<f64>,
    /// Cluster-robust (by entity) standard errors with the CR1 factor
    /// `G/(G−1) · (N−1)/(N−K−G+1)`, K counting slope regressors only.
    pub se: Vec<f64>,
}

pub fn lsdv(data: &PanelDataset) -> Lsdv {
    let rows = data.rows();
    let mut entities: Vec<&str> = rows.iter().map(|r| r.entity_id.as_str()).collect();
    entities.sort();
    entities.dedup();
    let k = data.regressor_names().len();
    let g = entities.len();
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = r.regressors.clone();
            v.extend(entities.iter().map(|e| if *e == r.entity_id { 1.0 } else { 0.0 }));
            v
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.response).collect();
    let inv = invert(&xtx(&design));
    let xty: Vec<f64> = (0..k + g)
        .map(|j| design.iter().zip(&y).map(|(row, yi)| row[j] * yi).sum())
        .collect();
    let coef = matvec(&inv, &xty);
    let resid: Vec<f64> = design
        .iter()
        .zip(&y)
        .map(|(row, yi)| yi - row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>())
        .collect();

    let p = k + g;
    let mut meat = vec![vec![0.0; p]; p];
    for e in &entities {
        let mut s = vec![0.0; p];
        for (i, r) in rows.iter().enumerate() {
            if r.entity_id == *e {
                for j in 0..p {
                    s[j] += design[i][j] * resid[i];
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                meat[i][j] += s[i] * s[j];
            }
        }
    }
    let n = rows.len() as f64;
    let (kf, gf) = (k as f64, g as f64);
    let c = gf / (gf - 1.0) * (n - 1.0) / (n - kf - gf + 1.0);
    let se = (0..k)
        .map(|j| {
            let v: f64 = (0..p)
                .map(|a| (0..p).map(|b| inv[j][a] * meat[a][b] * inv[b][j]).sum::<f64>())
                .sum();
            (c * v).max(0.0).sqrt()
        })
        .collect();
    Lsdv {
        beta: coef[..k].to_vec(),
        se,
    }
}

/// A random balanced-or-not panel where every entity has at least two
/// periods, with a linear signal, entity effects and noise.
pub fn random_panel(rng: &mut ChaCha8Rng, max_entities: usize, max_periods: usize, max_regressors: usize) -> PanelDataset {
    let n_ent = rng.random_range(3..=max_entities);
    let k = rng.random_range(1..=max_regressors);
    let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut rows = Vec::new();
    for e in 0..n_ent {
        let alpha = rng.random_range(-5.0..5.0);
        let t = rng.random_range(2..=max_periods);
        for p in 0..t {
            let xs: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y = alpha + xs.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + rng.random_range(-1.0..1.0);
            rows.push(PanelRow {
                entity_id: format!("e{e:02}"),
                period: 2000 + p as i32,
                response: y,
                regressors: xs,
            });
        }
    }
    let names = (0..k).map(|j| format!("x{j}")).collect();
    PanelDataset::new("y", names, rows).expect("valid panel")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum within-class sum of squares over every split of the sorted
/// values into `k` non-empty contiguous runs.
pub fn jenks_exhaustive(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let ss = |a: usize, b: usize| {
        let s = &v[a..b];
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    fn rec(start: usize, left: usize, n: usize, ss: &dyn Fn(usize, usize) -> f64) -> f64 {
        if left == 1 {
            return ss(start, n);
        }
        (start + 1..=n - (left - 1))
            .map(|cut| ss(start, cut) + rec(cut, left - 1, n, ss))
            .fold(f64::INFINITY, f64::min)
    }
    rec(0, k, n, &ss)
}

/// Residual sum of squares of `f` on `points`.
pub fn rss(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    points.iter().map(|(t, y)| (y - f(*t)).powi(2)).sum()
}

/// Brute-force best logistic `1/(1+exp(−k(t−t0)))` over a dense grid.
pub fn logistic_grid(points: &[(f64, f64)], ks: &[f64], t0s: &[f64]) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &k in ks {
        for &t0 in t0s {
            let r = rss(points, |t| 1.0 / (1.0 + (-k * (t - t0)).exp()));
            if r < best.0 {
                best = (r, k, t0);
            }
        }
    }
    best
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Pearson correlation, written out longhand.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
