//! Definition-by-definition transcriptions used as test oracles. These avoid
//! the library's matrix helpers and enumerate pixels and pairs directly.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;

const EPS: f64 = f64::EPSILON;

fn lg(p: f64) -> f64 {
    (p + EPS).log2()
}

/// Levels as `grid[y][x]`, 0 meaning outside the region.
pub type Grid = Vec<Vec<usize>>;

fn at(g: &Grid, y: isize, x: isize) -> usize {
    if y < 0 || x < 0 || y as usize >= g.len() || x as usize >= g[0].len() {
        0
    } else {
        g[y as usize][x as usize]
    }
}

const DIRS: [(isize, isize); 4] = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

// ---------------------------------------------------------------- first order

pub fn numpy_percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = q / 100.0 * (sorted.len() as f64 - 1.0);
    let (f, c) = (idx.floor(), idx.ceil());
    if f == c {
        sorted[idx as usize]
    } else {
        sorted[f as usize] * (c - idx) + sorted[c as usize] * (idx - f)
    }
}

pub fn first_order(values: &[f64], n_bins: usize) -> Vec<f64> {
    let n = values.len() as f64;
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = values.iter().sum::<f64>() / n;
    let energy: f64 = values.iter().map(|v| v * v).sum();
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let mut hist = BTreeMap::new();
    for &v in values {
        let b = if hi == lo {
            1
        } else {
            (((v - lo) / (hi - lo) * n_bins as f64).floor() as usize + 1).min(n_bins)
        };
        *hist.entry(b).or_insert(0.0) += 1.0;
    }
    let entropy: f64 = hist.values().map(|c| -(c / n) * lg(c / n)).sum();
    let uniformity: f64 = hist.values().map(|c| (c / n) * (c / n)).sum();
    let p10 = numpy_percentile(&s, 10.0);
    let p90 = numpy_percentile(&s, 90.0);
    let kept: Vec<f64> = values.iter().copied().filter(|v| *v >= p10 && *v <= p90).collect();
    let km = kept.iter().sum::<f64>() / kept.len() as f64;
    let m2 = var;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    vec![
        energy,
        energy,
        entropy,
        lo,
        p10,
        p90,
        hi,
        mean,
        numpy_percentile(&s, 50.0),
        numpy_percentile(&s, 75.0) - numpy_percentile(&s, 25.0),
        hi - lo,
        values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n,
        kept.iter().map(|v| (v - km).abs()).sum::<f64>() / kept.len() as f64,
        (energy / n).sqrt(),
        if m2 == 0.0 { 0.0 } else { m3 / m2.powf(1.5) },
        if m2 == 0.0 { 0.0 } else { m4 / (m2 * m2) },
        var,
        uniformity,
    ]
}

// ----------------------------------------------------------------------- GLCM

fn glcm_one(g: &Grid, ng: usize, (dy, dx): (isize, isize)) -> Option<Vec<f64>> {
    let mut p = vec![vec![0.0; ng + 1]; ng + 1];
    let mut total = 0.0;
    for y in 0..g.len() as isize {
        for x in 0..g[0].len() as isize {
            let (a, b) = (at(g, y, x), at(g, y + dy, x + dx));
            if a > 0 && b > 0 {
                p[a][b] += 1.0;
                p[b][a] += 1.0;
                total += 2.0;
            }
        }
    }
    if total == 0.0 {
        return None;
    }
    let r = 1..=ng;
    for i in r.clone() {
        for j in r.clone() {
            p[i][j] /= total;
        }
    }
    let px: Vec<f64> = (0..=ng).map(|i| if i == 0 { 0.0 } else { (1..=ng).map(|j| p[i][j]).sum() }).collect();
    let py: Vec<f64> = (0..=ng).map(|j| if j == 0 { 0.0 } else { (1..=ng).map(|i| p[i][j]).sum() }).collect();
    let ux: f64 = r.clone().map(|i| i as f64 * px[i]).sum();
    let uy: f64 = r.clone().map(|j| j as f64 * py[j]).sum();
    let sx = r.clone().map(|i| (i as f64 - ux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sy = r.clone().map(|j| (j as f64 - uy).powi(2) * py[j]).sum::<f64>().sqrt();
    let pairs: Vec<(usize, usize)> = r.clone().flat_map(|i| r.clone().map(move |j| (i, j))).collect();
    let sum = |f: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
        pairs.iter().map(|&(i, j)| f(i as f64, j as f64, p[i][j])).sum()
    };
    let pxpy = |k: usize, sign: bool| -> f64 {
        pairs
            .iter()
            .filter(|&&(i, j)| if sign { i + j == k } else { i.abs_diff(j) == k })
            .map(|&(i, j)| p[i][j])
            .sum()
    };
    let psum: Vec<f64> = (2..=2 * ng).map(|k| pxpy(k, true)).collect();
    let pdiff: Vec<f64> = (0..ng).map(|k| pxpy(k, false)).collect();
    let da: f64 = pdiff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let hx: f64 = r.clone().map(|i| -px[i] * lg(px[i])).sum();
    let hy: f64 = r.clone().map(|j| -py[j] * lg(py[j])).sum();
    let hxy = sum(&|_, _, v| -v * lg(v));
    let hxy1: f64 = pairs.iter().map(|&(i, j)| -p[i][j] * lg(px[i] * py[j])).sum();
    let hxy2: f64 = pairs.iter().map(|&(i, j)| -px[i] * py[j] * lg(px[i] * py[j])).sum();
    let ngf = ng as f64;

    // maximal correlation via the (non-symmetric) transition matrix
    let act: Vec<usize> = r.clone().filter(|&i| px[i] > 0.0).collect();
    let mcc = if act.len() < 2 {
        1.0
    } else {
        let q = DMatrix::from_fn(act.len(), act.len(), |a, b| {
            let (i, j) = (act[a], act[b]);
            (1..=ng)
                .filter(|&k| py[k] > 0.0)
                .map(|k| p[i][k] * p[j][k] / (px[i] * py[k]))
                .sum()
        });
        let mut ev: Vec<f64> = q.complex_eigenvalues().iter().map(|c| c.re).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev[1].max(0.0).sqrt()
    };

    Some(vec![
        sum(&|i, j, v| i * j * v),
        ux,
        sum(&|i, j, v| (i + j - ux - uy).powi(4) * v),
        sum(&|i, j, v| (i + j - ux - uy).powi(3) * v),
        sum(&|i, j, v| (i + j - ux - uy).powi(2) * v),
        sum(&|i, j, v| (i - j).powi(2) * v),
        if sx * sy == 0.0 { 1.0 } else { (sum(&|i, j, v| i * j * v) - ux * uy) / (sx * sy) },
        da,
        pdiff.iter().map(|&v| -v * lg(v)).sum(),
        pdiff.iter().enumerate().map(|(k, v)| (k as f64 - da).powi(2) * v).sum(),
        sum(&|_, _, v| v * v),
        hxy,
        if hx.max(hy) == 0.0 { 0.0 } else { (hxy - hxy1) / hx.max(hy) },
        if hxy > hxy2 { 0.0 } else { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt() },
        sum(&|i, j, v| v / (1.0 + (i - j).powi(2))),
        mcc,
        sum(&|i, j, v| v / (1.0 + (i - j).powi(2) / (ngf * ngf))),
        sum(&|i, j, v| v / (1.0 + (i - j).abs())),
        sum(&|i, j, v| v / (1.0 + (i - j).abs() / ngf)),
        sum(&|i, j, v| if i == j { 0.0 } else { v / (i - j).powi(2) }),
        pairs.iter().map(|&(i, j)| p[i][j]).fold(0.0, f64::max),
        psum.iter().map(|&v| -v * lg(v)).sum(),
        sum(&|i, _, v| (i - ux).powi(2) * v),
    ])
}

pub fn glcm(g: &Grid, ng: usize) -> Vec<f64> {
    let per: Vec<Vec<f64>> = DIRS.iter().filter_map(|&d| glcm_one(g, ng, d)).collect();
    (0..23).map(|k| per.iter().map(|f| f[k]).sum::<f64>() / per.len() as f64).collect()
}

// -------------------------------------------------------- level/size matrices

/// Features from a list of `(level, size)` entries in zone-matrix order.
fn size_family(entries: &[(usize, usize)], n_pixels: usize) -> Vec<f64> {
    let mut m: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &e in entries {
        *m.entry(e).or_insert(0.0) += 1.0;
    }
    let nz: f64 = entries.len() as f64;
    let s = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
        m.iter().map(|(&(i, j), &c)| c * f(i as f64, j as f64)).sum::<f64>() / nz
    };
    let mut by_i: BTreeMap<usize, f64> = BTreeMap::new();
    let mut by_j: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(i, j), &c) in &m {
        *by_i.entry(i).or_insert(0.0) += c;
        *by_j.entry(j).or_insert(0.0) += c;
    }
    let gln: f64 = by_i.values().map(|c| c * c).sum();
    let sn: f64 = by_j.values().map(|c| c * c).sum();
    let mu_i = s(&|i, _| i);
    let mu_j = s(&|_, j| j);
    vec![
        s(&|_, j| 1.0 / (j * j)),
        s(&|_, j| j * j),
        gln / nz,
        gln / (nz * nz),
        sn / nz,
        sn / (nz * nz),
        nz / n_pixels as f64,
        s(&|i, _| (i - mu_i).powi(2)),
        s(&|_, j| (j - mu_j).powi(2)),
        m.values().map(|&c| -(c / nz) * lg(c / nz)).sum(),
        s(&|i, _| 1.0 / (i * i)),
        s(&|i, _| i * i),
        s(&|i, j| 1.0 / (i * i * j * j)),
        s(&|i, j| i * i / (j * j)),
        s(&|i, j| j * j / (i * i)),
        s(&|i, j| i * i * j * j),
    ]
}

fn n_pixels(g: &Grid) -> usize {
    g.iter().flatten().filter(|&&l| l > 0).count()
}

pub fn glszm(g: &Grid) -> Vec<f64> {
    let (h, w) = (g.len(), g[0].len());
    let mut seen = vec![vec![false; w]; h];
    let mut zones = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if g[sy][sx] == 0 || seen[sy][sx] {
                continue;
            }
            let level = g[sy][sx];
            let mut queue = VecDeque::from([(sy, sx)]);
            seen[sy][sx] = true;
            let mut size = 0;
            while let Some((y, x)) = queue.pop_front() {
                size += 1;
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        if !seen[ny][nx] && g[ny][nx] == level {
                            seen[ny][nx] = true;
                            queue.push_back((ny, nx));
                        }
                    }
                }
            }
            zones.push((level, size));
        }
    }
    size_family(&zones, n_pixels(g))
}

/// Runs along one direction found by walking every full line of the grid.
pub fn runs(g: &Grid, (dy, dx): (isize, isize)) -> Vec<(usize, usize)> {
    let (h, w) = (g.len() as isize, g[0].len() as isize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            // (y, x) starts a line when stepping back leaves the grid
            let (py, px) = (y - dy, x - dx);
            if py >= 0 && px >= 0 && py < h && px < w {
                continue;
            }
            let mut line = Vec::new();
            let (mut cy, mut cx) = (y, x);
            while cy >= 0 && cx >= 0 && cy < h && cx < w {
                line.push(g[cy as usize][cx as usize]);
                cy += dy;
                cx += dx;
            }
            let mut k = 0;
            while k < line.len() {
                let mut e = k;
                while e + 1 < line.len() && line[e + 1] == line[k] {
                    e += 1;
                }
                if line[k] > 0 {
                    out.push((line[k], e - k + 1));
                }
                k = e + 1;
            }
        }
    }
    out
}

pub fn glrlm(g: &Grid) -> Vec<f64> {
    let per: Vec<Vec<f64>> = DIRS.iter().map(|&d| size_family(&runs(g, d), n_pixels(g))).collect();
    (0..16).map(|k| per.iter().map(|f| f[k]).sum::<f64>() / 4.0).collect()
}

pub fn gldm(g: &Grid) -> Vec<f64> {
    let mut entries = Vec::new();
    for y in 0..g.len() as isize {
        for x in 0..g[0].len() as isize {
            let l = at(g, y, x);
            if l == 0 {
                continue;
            }
            let same = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
                .iter()
                .filter(|(a, b)| at(g, y + a, x + b) == l)
                .count();
            entries.push((l, same + 1));
        }
    }
    let f = size_family(&entries, n_pixels(g));
    [0, 1, 2, 4, 5, 7, 8, 9, 10, 11, 12, 13, 14, 15].iter().map(|&k| f[k]).collect()
}

// ---------------------------------------------------------------------- NGTDM

pub fn ngtdm(g: &Grid, ng: usize) -> Vec<f64> {
    let mut n = vec![0.0; ng + 1];
    let mut s = vec![0.0; ng + 1];
    for y in 0..g.len() as isize {
        for x in 0..g[0].len() as isize {
            let l = at(g, y, x);
            if l == 0 {
                continue;
            }
            let nb: Vec<f64> = (-1..=1)
                .flat_map(|a| (-1..=1).map(move |b| (a, b)))
                .filter(|&(a, b)| (a, b) != (0, 0) && at(g, y + a, x + b) > 0)
                .map(|(a, b)| at(g, y + a, x + b) as f64)
                .collect();
            if nb.is_empty() {
                continue;
            }
            let avg = nb.iter().sum::<f64>() / nb.len() as f64;
            n[l] += 1.0;
            s[l] += (l as f64 - avg).abs();
        }
    }
    let nvp: f64 = n.iter().sum();
    let p: Vec<f64> = n.iter().map(|c| c / nvp).collect();
    let lv: Vec<usize> = (1..=ng).filter(|&i| p[i] > 0.0).collect();
    let ngp = lv.len() as f64;
    let ps: f64 = lv.iter().map(|&i| p[i] * s[i]).sum();
    let st: f64 = s.iter().sum();
    let mut c = 0.0;
    let mut bd = 0.0;
    let mut cx = 0.0;
    let mut sn = 0.0;
    for &i in &lv {
        for &j in &lv {
            let (fi, fj) = (i as f64, j as f64);
            c += p[i] * p[j] * (fi - fj).powi(2);
            bd += (fi * p[i] - fj * p[j]).abs();
            cx += (fi - fj).abs() * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j]);
            sn += (p[i] + p[j]) * (fi - fj).powi(2);
        }
    }
    vec![
        if ps == 0.0 { 1e6 } else { (1.0 / ps).min(1e6) },
        if ngp > 1.0 { c / (ngp * (ngp - 1.0)) * st / nvp } else { 0.0 },
        if bd == 0.0 { 0.0 } else { ps / bd },
        cx / nvp,
        if st == 0.0 { 0.0 } else { sn / st },
    ]
}

// ------------------------------------------------------------------ frequency

pub fn dft_magnitude(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, n) = (f.len(), f[0].len());
    let mut out = vec![vec![0.0; n]; m];
    for (u, row) in out.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for x in 0..m {
                for y in 0..n {
                    let a = -2.0 * std::f64::consts::PI * ((x * u) as f64 / m as f64 + (y * v) as f64 / n as f64);
                    re += f[x][y] * a.cos();
                    im += f[x][y] * a.sin();
                }
            }
            *cell = re.hypot(im);
        }
    }
    out
}

pub fn dct_direct(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, n) = (f.len(), f[0].len());
    let c = |k: usize| if k == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
    let pi = std::f64::consts::PI;
    (0..m)
        .map(|u| {
            (0..n)
                .map(|v| {
                    let mut s = 0.0;
                    for x in 0..m {
                        for y in 0..n {
                            s += f[x][y]
                                * (((2 * x + 1) * u) as f64 * pi / (2 * m) as f64).cos()
                                * (((2 * y + 1) * v) as f64 * pi / (2 * n) as f64).cos();
                        }
                    }
                    2.0 / ((m * n) as f64).sqrt() * c(u) * c(v) * s
                })
                .collect()
        })
        .collect()
}

pub fn frequency_stats(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let mut hist = vec![0.0; 32];
    for &v in values {
        let b = if hi == lo { 0 } else { ((((v - lo) / (hi - lo)) * 32.0).floor() as usize).min(31) };
        hist[b] += 1.0;
    }
    let energy: f64 = values.iter().map(|v| v * v).sum();
    let med = numpy_percentile(&s, 50.0);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vec![
        mean,
        hi,
        var,
        if var == 0.0 { 0.0 } else { m3 / var.powf(1.5) },
        if var == 0.0 { 0.0 } else { m4 / (var * var) },
        hist.iter().filter(|&&c| c > 0.0).map(|c| -(c / n) * lg(c / n)).sum(),
        energy,
        (energy / n).sqrt(),
        hist.iter().map(|c| (c / n) * (c / n)).sum(),
        lo,
        med,
        hi - lo,
        numpy_percentile(&s, 75.0) - numpy_percentile(&s, 25.0),
        values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n,
        numpy_percentile(&dev, 50.0),
    ]
}
