use super::quantize::QuantizedImage;
use super::stats::log2_safe;
use super::DIRECTIONS;
use crate::error::{Error, Result};

pub const NAMES: [&str; 23] = [
    "Autocorrelation",
    "Joint Average",
    "Cluster Prominence",
    "Cluster Shade",
    "Cluster Tendency",
    "Contrast",
    "Correlation",
    "Difference Average",
    "Difference Entropy",
    "Difference Variance",
    "Joint Energy",
    "Joint Entropy",
    "Informational Measure of Correlation 1",
    "Informational Measure of Correlation 2",
    "Inverse Difference Moment",
    "Maximal Correlation Coefficient",
    "Inverse Difference Moment Normalized",
    "Inverse Difference",
    "Inverse Difference Normalized",
    "Inverse Variance",
    "Maximum Probability",
    "Sum Entropy",
    "Sum Squares",
];

/// Symmetric co-occurrence counts at distance 1 along `(dy, dx)`, as an
/// `n_bins × n_bins` row-major matrix indexed by `level - 1`.
pub fn glcm_counts(q: &QuantizedImage, (dy, dx): (isize, isize)) -> Vec<f64> {
    let ng = q.n_bins();
    let mut m = vec![0.0; ng * ng];
    for y in 0..q.height() as isize {
        for x in 0..q.width() as isize {
            if let (Some(a), Some(b)) = (q.level(y, x), q.level(y + dy, x + dx)) {
                m[(a - 1) * ng + (b - 1)] += 1.0;
                m[(b - 1) * ng + (a - 1)] += 1.0;
            }
        }
    }
    m
}

/// Normalized co-occurrence matrix, or `None` when the direction has no pairs.
pub fn glcm_matrix(q: &QuantizedImage, dir: (isize, isize)) -> Option<Vec<f64>> {
    let mut m = glcm_counts(q, dir);
    let total: f64 = m.iter().sum();
    if total == 0.0 {
        return None;
    }
    m.iter_mut().for_each(|v| *v /= total);
    Some(m)
}

/// The 23 features averaged over the directions that have at least one pair.
pub fn glcm_features(q: &QuantizedImage) -> Result<[f64; 23]> {
    let mut acc = [0.0; 23];
    let mut used = 0;
    for &dir in &DIRECTIONS {
        if let Some(p) = glcm_matrix(q, dir) {
            let f = features_of(&p, q.n_bins());
            acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("no co-occurring pixel pairs".into()));
    }
    acc.iter_mut().for_each(|a| *a /= used as f64);
    Ok(acc)
}

/// Features of one normalized matrix; levels are `1..=ng`.
pub fn features_of(p: &[f64], ng: usize) -> [f64; 23] {
    let at = |i: usize, j: usize| p[i * ng + j];
    let lv = |i: usize| (i + 1) as f64;

    let mut px = vec![0.0; ng];
    let mut py = vec![0.0; ng];
    let mut psum = vec![0.0; 2 * ng + 1];
    let mut pdiff = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            let v = at(i, j);
            px[i] += v;
            py[j] += v;
            psum[i + j + 2] += v;
            pdiff[i.abs_diff(j)] += v;
        }
    }
    let mux: f64 = (0..ng).map(|i| lv(i) * px[i]).sum();
    let muy: f64 = (0..ng).map(|j| lv(j) * py[j]).sum();
    let sx = (0..ng).map(|i| (lv(i) - mux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sy = (0..ng).map(|j| (lv(j) - muy).powi(2) * py[j]).sum::<f64>().sqrt();

    let mut autocorr = 0.0;
    let mut prom = 0.0;
    let mut shade = 0.0;
    let mut tend = 0.0;
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut hxy = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    let mut maxp: f64 = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..ng {
        for j in 0..ng {
            let v = at(i, j);
            let (a, b) = (lv(i), lv(j));
            let c = a + b - mux - muy;
            autocorr += a * b * v;
            prom += c.powi(4) * v;
            shade += c.powi(3) * v;
            tend += c * c * v;
            contrast += (a - b).powi(2) * v;
            energy += v * v;
            hxy -= v * log2_safe(v);
            hxy1 -= v * log2_safe(px[i] * py[j]);
            hxy2 -= px[i] * py[j] * log2_safe(px[i] * py[j]);
            maxp = maxp.max(v);
            sum_sq += (a - mux).powi(2) * v;
        }
    }
    let correlation = if sx == 0.0 || sy == 0.0 {
        1.0
    } else {
        (autocorr - mux * muy) / (sx * sy)
    };
    let hx: f64 = -px.iter().map(|&v| v * log2_safe(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| v * log2_safe(v)).sum::<f64>();
    let imc1 = if hx.max(hy) == 0.0 {
        0.0
    } else {
        (hxy - hxy1) / hx.max(hy)
    };
    let imc2 = if hxy2 <= hxy {
        0.0
    } else {
        (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt()
    };

    let mut diff_avg = 0.0;
    let mut diff_ent = 0.0;
    let mut idm = 0.0;
    let mut idmn = 0.0;
    let mut id = 0.0;
    let mut idn = 0.0;
    let mut inv_var = 0.0;
    let ngf = ng as f64;
    for (k, &v) in pdiff.iter().enumerate() {
        let kf = k as f64;
        diff_avg += kf * v;
        diff_ent -= v * log2_safe(v);
        idm += v / (1.0 + kf * kf);
        idmn += v / (1.0 + kf * kf / (ngf * ngf));
        id += v / (1.0 + kf);
        idn += v / (1.0 + kf / ngf);
        if k > 0 {
            inv_var += v / (kf * kf);
        }
    }
    let diff_var: f64 = pdiff
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - diff_avg).powi(2) * v)
        .sum();
    let sum_ent: f64 = -psum.iter().map(|&v| v * log2_safe(v)).sum::<f64>();

    [
        autocorr,
        mux,
        prom,
        shade,
        tend,
        contrast,
        correlation,
        diff_avg,
        diff_ent,
        diff_var,
        energy,
        hxy,
        imc1,
        imc2,
        idm,
        maximal_correlation(p, &px, &py, ng),
        idmn,
        id,
        idn,
        inv_var,
        maxp,
        sum_ent,
        sum_sq,
    ]
}

/// Square root of the second-largest eigenvalue of
/// `Q(i,j) = Σ_k P(i,k) P(j,k) / (px(i) py(k))`, computed through the similar
/// symmetric matrix `A Aᵀ` with `A = Dx^-½ P Dy^-½`. 1 when fewer than two
/// levels occur.
fn maximal_correlation(p: &[f64], px: &[f64], py: &[f64], ng: usize) -> f64 {
    let rows: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..ng).filter(|&j| py[j] > 0.0).collect();
    if rows.len() < 2 {
        return 1.0;
    }
    let a: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            cols.iter()
                .map(|&k| p[i * ng + k] / (px[i] * py[k]).sqrt())
                .collect()
        })
        .collect();
    let n = rows.len();
    let mut s = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            s[r * n + c] = a[r].iter().zip(&a[c]).map(|(x, y)| x * y).sum();
        }
    }
    let mut eig = symmetric_eigenvalues(&mut s, n);
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[1].max(0.0).sqrt()
}

/// Cyclic Jacobi eigenvalue iteration; destroys `a`.
pub(crate) fn symmetric_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
