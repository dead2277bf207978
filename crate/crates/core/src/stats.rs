//! Small statistical helpers shared by the estimators and the test suites:
//! means with standard errors, (weighted) least squares, two-sample KS and
//! chi-squared tests, product Epanechnikov kernels, uniform meshes and
//! Poisson-bootstrap weights.

use crate::rng::StreamKey;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// (mean, standard error of the mean)
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Binomial standard error for a frequency estimate.
pub fn binomial_stderr(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Ordinary least squares line fit `y = a + b x`; returns (a, b, stderr_b).
pub fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let xm = mean(xs);
    let ym = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let b = sxy / sxx;
    let a = ym - b * xm;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| {
        let e = y - (a + b * x);
        e * e
    }).sum();
    let se_b = if xs.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (a, b, se_b)
}

/// Weighted least squares for the pooled-decay model
/// `y_{g,i} = a_g - lambda * t_{g,i}`: one intercept per group, one shared
/// slope. Returns `(lambda, stderr_lambda)`.
pub fn pooled_decay_fit(groups: &[Vec<(f64, f64, f64)>]) -> (f64, f64) {
    // entries are (t, y, weight); eliminate intercepts by weighted centering
    let mut num = 0.0;
    let mut den = 0.0;
    for g in groups {
        let wsum: f64 = g.iter().map(|e| e.2).sum();
        let tbar: f64 = g.iter().map(|e| e.2 * e.0).sum::<f64>() / wsum;
        let ybar: f64 = g.iter().map(|e| e.2 * e.1).sum::<f64>() / wsum;
        for &(t, y, w) in g {
            num += w * (t - tbar) * (y - ybar);
            den += w * (t - tbar) * (t - tbar);
        }
    }
    let slope = num / den;
    // weights are 1/var(y); the WLS slope variance is 1/den
    (-slope, (1.0 / den).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic; inputs must be sorted.
pub fn ks_two_sample_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Pearson chi-squared test p-value for observed counts vs expected
/// probabilities (cells with tiny expectation are pooled into the last).
pub fn chi2_pvalue(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    let mut dof = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e < 5.0 {
            pool_o += o;
            pool_e += e;
        } else {
            stat += (o - e) * (o - e) / e;
            dof += 1;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
        dof += 1;
    }
    if dof < 2 {
        return 1.0;
    }
    let chi = ChiSquared::new((dof - 1) as f64).unwrap();
    1.0 - chi.cdf(stat)
}

/// Product Epanechnikov kernel with per-coordinate bandwidth `eps`:
/// `K(u) = ∏ (3/4)(1-(u_k/eps)^2)_+ / eps`.
#[inline]
pub fn epanechnikov_product(diff: &[f64], eps: f64) -> f64 {
    let mut k = 1.0;
    for &d in diff {
        let u = d / eps;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        k *= 0.75 * (1.0 - u * u) / eps;
    }
    k
}

/// Default KDE bandwidth: `0.8 t^{1/α} n^{-1/(d+4)}` per coordinate,
/// scale-matched to the process spread at time t.
pub fn default_bandwidth(alpha: f64, t: f64, n: usize, dim: usize) -> f64 {
    0.8 * t.powf(1.0 / alpha) * (n as f64).powf(-1.0 / (dim as f64 + 4.0))
}

/// Poisson(1) weight for path `i` in bootstrap resample `b`, as a pure
/// function of the stream key. Knuth's method; the mean-1 tail is short.
pub fn poisson1_weight(key: StreamKey, resample: u64, i: u64) -> u32 {
    let s = key.substream(resample).substream(i);
    let target = (-1.0f64).exp();
    let mut prod = 1.0;
    let mut k = 0u32;
    let mut ctr = 0u64;
    loop {
        prod *= s.uniform_at(ctr);
        ctr += 1;
        if prod <= target {
            return k;
        }
        k += 1;
    }
}

/// Uniform rectangular mesh over a bounding box, used for occupation and
/// exit histograms.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n_cells: Vec<usize>,
}

impl Mesh {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n_cells: Vec<usize>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert_eq!(lo.len(), n_cells.len());
        Mesh { lo, hi, n_cells }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.n_cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]) / self.n_cells[k] as f64)
            .product()
    }

    /// Flat index of the cell containing `x`, or None if outside the box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..self.dim() {
            let w = (self.hi[k] - self.lo[k]) / self.n_cells[k] as f64;
            let i = ((x[k] - self.lo[k]) / w).floor();
            if i < 0.0 || i >= self.n_cells[k] as f64 {
                return None;
            }
            idx = idx * self.n_cells[k] + i as usize;
        }
        Some(idx)
    }

    pub fn center_of(&self, mut idx: usize) -> Vec<f64> {
        let d = self.dim();
        let mut c = vec![0.0; d];
        for k in (0..d).rev() {
            let i = idx % self.n_cells[k];
            idx /= self.n_cells[k];
            let w = (self.hi[k] - self.lo[k]) / self.n_cells[k] as f64;
            c[k] = self.lo[k] + (i as f64 + 0.5) * w;
        }
        c
    }
}
