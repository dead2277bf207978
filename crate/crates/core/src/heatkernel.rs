//! Point estimators for the Dirichlet heat kernel `p_D(t,x,y)` and derived
//! spectral quantities.
//!
//! Three routes with complementary failure modes:
//!
//! - survivor KDE: smooth the endpoint cloud of paths killed on D,
//! - bridge: run two killed half-time ensembles from x and from y and count
//!   kernel-weighted near-collisions over all cross pairs (symmetry plus
//!   Chapman-Kolmogorov turn the pair density into `p_D(t,x,y)`); the
//!   all-pairs form removes the hit shot noise that makes the naive paired
//!   bridge useless for small kernels,
//! - subtraction: `p_D = p - r_D` with the remainder
//!   `r_D = E_x[p(t-tau, X_tau, y); tau < t]` evaluated at the exit bracket
//!   midpoint; exact kernel evaluations, no bandwidth, best near the
//!   diagonal where KDE bias dominates.

use crate::geometry::Domain;
use crate::rng::StreamKey;
use crate::simulate::{endpoint_ensemble, exit_records, survival_curve_blocked, SimConfig, SimError};
use crate::stable::{product_kernel, AlphaParam, StableError};
use crate::stats::{self, epanechnikov_product};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("no surviving paths at t; either p_D ~ 0 here (check connectivity) or n_paths is too small")]
    ZeroSurvivors,
    #[error("survival decay not resolved over the time grid: {0}")]
    DecayNotResolved(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Kernel(#[from] StableError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SurvivorKde,
    Bridge,
    Subtraction,
}

/// Point estimate of `p_D(t,x,y)` with its sampling error and the
/// discretization parameters that produced it.
#[derive(Clone, Debug, serde::Serialize)]
pub struct KernelEstimate {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub bandwidth: f64,
    pub dt: f64,
    pub n_paths: usize,
}

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Poisson bootstrap of a sparse mean: `values` are the nonzero per-path
/// contributions out of `n` paths.
fn bootstrap_sparse_stderr(values: &[(u32, f64)], n: usize, key: StreamKey) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut acc = 0.0;
        for &(i, v) in values {
            acc += stats::poisson1_weight(key, b as u64, i as u64) as f64 * v;
        }
        means.push(acc / n as f64);
    }
    // stderr of the estimate = spread of the resampled means
    let m = stats::mean(&means);
    (means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (BOOTSTRAP_RESAMPLES as f64 - 1.0)).sqrt()
}

/// Survivor-cloud KDE estimate of `p_D(t,x,y)` from `cfg.n_paths` paths
/// started at x. `bandwidth` defaults to the scale-matched rule.
pub fn estimate_pd_survivor_kde(
    domain: &Domain,
    params: &AlphaParam,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &SimConfig,
    bandwidth: Option<f64>,
) -> Result<KernelEstimate, EstimatorError> {
    let eps = bandwidth.unwrap_or_else(|| stats::default_bandwidth(params.alpha(), t, cfg.n_paths, params.dim()));
    let ens = endpoint_ensemble(Some(domain), params, x, cfg, &[t])?;
    if ens.alive_counts[0] == 0 {
        return Err(EstimatorError::ZeroSurvivors);
    }
    let mut hits: Vec<(u32, f64)> = Vec::new();
    let mut acc = 0.0;
    let mut diff = vec![0.0; params.dim()];
    for p in 0..ens.n_paths {
        if let Some(st) = ens.state(0, p) {
            for k in 0..params.dim() {
                diff[k] = st[k] - y[k];
            }
            let kv = epanechnikov_product(&diff, eps);
            if kv > 0.0 {
                hits.push((p as u32, kv));
                acc += kv;
            }
        }
    }
    let value = acc / cfg.n_paths as f64;
    let boot_key = StreamKey::new(cfg.seed).substream(0xB0075).substream(1);
    let stderr = bootstrap_sparse_stderr(&hits, cfg.n_paths, boot_key);
    Ok(KernelEstimate {
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        value,
        stderr,
        method: Method::SurvivorKde,
        bandwidth: eps,
        dt: cfg.dt,
        n_paths: cfg.n_paths,
    })
}

// cell-list pair accumulation for the bridge; supports dim <= 4
const MAX_BRIDGE_DIM: usize = 4;
const BRIDGE_BLOCKS: usize = 128;

struct CellList {
    map: HashMap<[i64; MAX_BRIDGE_DIM], Vec<u32>>,
    eps: f64,
    dim: usize,
}

impl CellList {
    fn build(coords: &[f64], alive: &[bool], dim: usize, eps: f64) -> Self {
        let mut map: HashMap<[i64; MAX_BRIDGE_DIM], Vec<u32>> = HashMap::new();
        for (p, ok) in alive.iter().enumerate() {
            if !ok {
                continue;
            }
            let mut key = [0i64; MAX_BRIDGE_DIM];
            for k in 0..dim {
                key[k] = (coords[p * dim + k] / eps).floor() as i64;
            }
            map.entry(key).or_default().push(p as u32);
        }
        CellList { map, eps, dim }
    }

    /// Visit every alive y-point within kernel range of `x` (superset).
    fn for_neighbors<F: FnMut(u32)>(&self, x: &[f64], mut f: F) {
        let mut base = [0i64; MAX_BRIDGE_DIM];
        for k in 0..self.dim {
            base[k] = (x[k] / self.eps).floor() as i64;
        }
        let mut offs = [0i64; MAX_BRIDGE_DIM];
        self.visit(&mut offs, 0, &base, &mut f);
    }

    fn visit<F: FnMut(u32)>(&self, offs: &mut [i64; MAX_BRIDGE_DIM], k: usize, base: &[i64; MAX_BRIDGE_DIM], f: &mut F) {
        if k == self.dim {
            let mut key = [0i64; MAX_BRIDGE_DIM];
            for i in 0..self.dim {
                key[i] = base[i] + offs[i];
            }
            if let Some(v) = self.map.get(&key) {
                for &j in v {
                    f(j);
                }
            }
            return;
        }
        for o in -1..=1 {
            offs[k] = o;
            self.visit(offs, k + 1, base, f);
        }
    }
}

/// Bridge estimate of `p_D(t,x,y)`: two killed ensembles to t/2, then the
/// all-pairs kernel mean `Σ_ij K_eps(Xx_i - Xy_j) / (n m)`.
///
/// The standard error comes from a Poisson bootstrap over 128x128 path
/// blocks (the pair sum is kept as a block-pair matrix, so resampling costs
/// nothing per pair).
pub fn estimate_pd_bridge(
    domain: &Domain,
    params: &AlphaParam,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &SimConfig,
    bandwidth: Option<f64>,
) -> Result<KernelEstimate, EstimatorError> {
    assert!(params.dim() <= MAX_BRIDGE_DIM, "bridge cell list supports dim <= 4");
    let eps = bandwidth.unwrap_or_else(|| stats::default_bandwidth(params.alpha(), t, cfg.n_paths, params.dim()));
    let mut half_cfg = cfg.clone();
    half_cfg.t_end = t / 2.0;
    if half_cfg.dt > half_cfg.t_end {
        half_cfg.dt = half_cfg.t_end;
    }
    let ex = endpoint_ensemble(Some(domain), params, x, &half_cfg, &[t / 2.0])?;
    let mut y_cfg = half_cfg.clone();
    y_cfg.seed = cfg.seed.wrapping_add(0x9e3779b97f4a7c15);
    let ey = endpoint_ensemble(Some(domain), params, y, &y_cfg, &[t / 2.0])?;
    if ex.alive_counts[0] == 0 || ey.alive_counts[0] == 0 {
        return Err(EstimatorError::ZeroSurvivors);
    }

    let dim = params.dim();
    let cells = CellList::build(&ey.coords[0], &ey.alive[0], dim, eps);
    let n = ex.n_paths;
    let m = ey.n_paths;
    let blk = |p: usize, total: usize| -> usize { p * BRIDGE_BLOCKS / total };

    // block-pair sums, accumulated in fixed chunk order
    let parts = crate::simulate::chunked_reduce(n, |range| {
        let mut mat = vec![0.0f64; BRIDGE_BLOCKS * BRIDGE_BLOCKS];
        let mut diff = vec![0.0; dim];
        for p in range {
            if let Some(sx) = ex.state(0, p) {
                let bx = blk(p, n);
                cells.for_neighbors(sx, |j| {
                    let sy = &ey.coords[0][j as usize * dim..(j as usize + 1) * dim];
                    for k in 0..dim {
                        diff[k] = sx[k] - sy[k];
                    }
                    let kv = epanechnikov_product(&diff, eps);
                    if kv > 0.0 {
                        mat[bx * BRIDGE_BLOCKS + blk(j as usize, m)] += kv;
                    }
                });
            }
        }
        mat
    });
    let mut mat = vec![0.0f64; BRIDGE_BLOCKS * BRIDGE_BLOCKS];
    for part in parts {
        for (a, b) in mat.iter_mut().zip(part) {
            *a += b;
        }
    }
    let total: f64 = mat.iter().sum();
    let value = total / (n as f64 * m as f64);

    // block Poisson bootstrap
    let key = StreamKey::new(cfg.seed).substream(0xB0075).substream(2);
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let wx: Vec<f64> =
            (0..BRIDGE_BLOCKS).map(|i| stats::poisson1_weight(key, b as u64, i as u64) as f64).collect();
        let wy: Vec<f64> = (0..BRIDGE_BLOCKS)
            .map(|i| stats::poisson1_weight(key, b as u64, (BRIDGE_BLOCKS + i) as u64) as f64)
            .collect();
        let mut acc = 0.0;
        for bx in 0..BRIDGE_BLOCKS {
            if wx[bx] == 0.0 {
                continue;
            }
            for by in 0..BRIDGE_BLOCKS {
                acc += wx[bx] * wy[by] * mat[bx * BRIDGE_BLOCKS + by];
            }
        }
        means.push(acc / (n as f64 * m as f64));
    }
    let mm = stats::mean(&means);
    let stderr = (means.iter().map(|v| (v - mm) * (v - mm)).sum::<f64>()
        / (BOOTSTRAP_RESAMPLES as f64 - 1.0))
        .sqrt();

    Ok(KernelEstimate {
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        value,
        stderr,
        method: Method::Bridge,
        bandwidth: eps,
        dt: half_cfg.dt,
        n_paths: cfg.n_paths,
    })
}

/// Subtraction estimate `p_D(t,x,y) = p(t,x,y) - mean_i p(t - tau_i, e_i, y)`
/// over paths killed before t. Exact kernel evaluations, no bandwidth; may
/// go slightly negative near its noise floor.
pub fn estimate_pd_subtraction(
    domain: &Domain,
    params: &AlphaParam,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &SimConfig,
) -> Result<KernelEstimate, EstimatorError> {
    let mut run_cfg = cfg.clone();
    run_cfg.t_end = t;
    let records = exit_records(domain, params, x, &run_cfg)?;
    let free = product_kernel(params, t, x, y)?;
    let mut remainders: Vec<(u32, f64)> = Vec::with_capacity(records.taus.len());
    let mut acc = 0.0;
    for (i, (&tau, e)) in records.taus.iter().zip(&records.exit_points).enumerate() {
        let dt_left = t - tau;
        // tau is the bracket midpoint so dt_left >= dt/2 > 0
        let r = product_kernel(params, dt_left, e, y)?;
        remainders.push((i as u32, r));
        acc += r;
    }
    let r_mean = acc / cfg.n_paths as f64;
    let key = StreamKey::new(cfg.seed).substream(0xB0075).substream(3);
    let stderr = bootstrap_sparse_stderr(&remainders, cfg.n_paths, key);
    Ok(KernelEstimate {
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        value: free - r_mean,
        stderr,
        method: Method::Subtraction,
        bandwidth: 0.0,
        dt: cfg.dt,
        n_paths: cfg.n_paths,
    })
}

/// Principal-eigenvalue estimate from pooled log-survival decay.
///
/// Fits `ln S(x, t) = a_x - λ1 t` by weighted least squares over the time
/// grid, pooling all starting points with per-point binomial weights. The
/// standard error comes from the spread of per-block refits over 32 path
/// blocks, because points of one survival curve share paths and their
/// errors are strongly correlated.
pub fn estimate_lambda1(
    domain: &Domain,
    params: &AlphaParam,
    x_list: &[Vec<f64>],
    t_grid: &[f64],
    cfg: &SimConfig,
) -> Result<(f64, f64), EstimatorError> {
    assert!(t_grid.len() >= 2 && !x_list.is_empty());
    const N_BLOCKS: usize = 32;
    let mut groups = Vec::with_capacity(x_list.len());
    let mut block_groups: Vec<Vec<Vec<(f64, f64, f64)>>> = vec![Vec::new(); N_BLOCKS];
    for x in x_list {
        let mut run_cfg = cfg.clone();
        run_cfg.t_end = *t_grid.last().unwrap();
        let (curve, blocks) =
            survival_curve_blocked(domain, params, x, t_grid, &run_cfg, N_BLOCKS)?;
        let n = cfg.n_paths as f64;
        let floor = 25.0 / n;
        let s_first = curve.first().unwrap().1;
        let s_last = curve.last().unwrap().1;
        if s_last <= floor {
            return Err(EstimatorError::DecayNotResolved(format!(
                "survival at t_max is at the noise floor ({s_last:.2e} with {n} paths)"
            )));
        }
        if s_first / s_last < 1.6 {
            return Err(EstimatorError::DecayNotResolved(format!(
                "grid spans less than half an e-fold: S({:.3})={s_first:.3} vs S({:.3})={s_last:.3}",
                t_grid[0],
                t_grid.last().unwrap()
            )));
        }
        let weights: Vec<f64> =
            curve.iter().map(|&(_, s, _)| n * s / (1.0 - s).max(1e-12)).collect();
        groups.push(
            curve
                .iter()
                .zip(&weights)
                .map(|(&(t, s, _), &w)| (t, s.ln(), w))
                .collect::<Vec<_>>(),
        );
        for (b, bc) in blocks.iter().enumerate() {
            let entries: Vec<(f64, f64, f64)> = t_grid
                .iter()
                .zip(bc)
                .zip(&weights)
                .filter(|((_, &s), _)| s > 0.0)
                .map(|((&t, &s), &w)| (t, s.ln(), w))
                .collect();
            if entries.len() >= 2 {
                block_groups[b].push(entries);
            }
        }
    }
    let (lambda, _) = stats::pooled_decay_fit(&groups);
    let block_lambdas: Vec<f64> = block_groups
        .iter()
        .filter(|g| g.len() == x_list.len())
        .map(|g| stats::pooled_decay_fit(g).0)
        .collect();
    if block_lambdas.len() < 8 {
        return Err(EstimatorError::DecayNotResolved(
            "too few usable path blocks for a stderr".to_string(),
        ));
    }
    let (_, se_mean) = stats::mean_stderr(&block_lambdas);
    Ok((lambda, se_mean))
}

/// Pick a lambda1 time grid `[t0, 3 t0]` where t0 brings survival into
/// [0.05, 0.5], by doubling pilot runs.
pub fn choose_lambda1_grid(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    cfg: &SimConfig,
    n_points: usize,
) -> Result<Vec<f64>, EstimatorError> {
    let mut pilot = cfg.clone();
    pilot.n_paths = cfg.n_paths.min(20_000);
    let mut t0 = 16.0 * cfg.dt;
    for _ in 0..24 {
        let mut run_cfg = pilot.clone();
        run_cfg.t_end = t0;
        let (s, _) = crate::simulate::survival_probability(domain, params, x, t0, &run_cfg)?;
        if s <= 0.5 {
            break;
        }
        t0 *= 2.0;
    }
    let grid: Vec<f64> = (0..n_points)
        .map(|i| t0 + 2.0 * t0 * i as f64 / (n_points - 1) as f64)
        .collect();
    Ok(grid)
}

/// Boundary weight `w_t(z) = 1 ∧ δ_D(z)^{α/2} / √t` from the two-sided
/// small-time estimate.
pub fn boundary_weight(domain: &Domain, alpha: f64, t: f64, z: &[f64]) -> f64 {
    let d = domain.signed_distance(z).max(0.0);
    (d.powf(alpha / 2.0) / t.sqrt()).min(1.0)
}

/// One grid entry of the two-sided-bound diagnostics.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RatioEntry {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub estimate: f64,
    pub stderr: f64,
    /// estimate / (w_t(x) w_t(y) p(t,x,y)); 0 when the estimate is 0.
    pub ratio: f64,
}

/// Empirical form of the two-sided comparison: the spread of
/// `p̂_D / (w w p)` over a (t,x,y) grid. A finite positive band is the
/// desk-scale analogue of the theorem's comparability; zero estimates are
/// reported as ratio 0 and flagged by `n_zero`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundDiagnostics {
    pub entries: Vec<RatioEntry>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub n_zero: usize,
}

/// Compute the ratio diagnostics over a grid using the survivor KDE
/// (ensembles are shared across all (t, y) for a common x).
/// `bandwidth_mult` scales the default per-(t) bandwidth; the near-boundary
/// grid points need a wider kernel than the free-spread default to keep the
/// extreme ratios out of shot noise.
pub fn bound_ratio_diagnostics(
    domain: &Domain,
    params: &AlphaParam,
    grid: &[(f64, Vec<f64>, Vec<f64>)],
    cfg: &SimConfig,
    bandwidth_mult: f64,
) -> Result<BoundDiagnostics, EstimatorError> {
    // group the grid by x to share path ensembles
    let mut by_x: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (i, (_, x, _)) in grid.iter().enumerate() {
        if let Some(e) = by_x.iter_mut().find(|(gx, _)| gx == x) {
            e.1.push(i);
        } else {
            by_x.push((x.clone(), vec![i]));
        }
    }
    let mut entries: Vec<Option<RatioEntry>> = vec![None; grid.len()];
    for (x, idxs) in &by_x {
        let mut ts: Vec<f64> = idxs.iter().map(|&i| grid[i].0).collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        let mut run_cfg = cfg.clone();
        run_cfg.t_end = *ts.last().unwrap();
        let ens = endpoint_ensemble(Some(domain), params, x, &run_cfg, &ts)?;
        for &i in idxs {
            let (t, _, ref y) = grid[i];
            let ci = ts.iter().position(|&tt| (tt - t).abs() < 1e-12).unwrap();
            let eps = bandwidth_mult * stats::default_bandwidth(params.alpha(), t, cfg.n_paths, params.dim());
            let mut hits: Vec<(u32, f64)> = Vec::new();
            let mut acc = 0.0;
            let mut diff = vec![0.0; params.dim()];
            for p in 0..ens.n_paths {
                if let Some(st) = ens.state(ci, p) {
                    for k in 0..params.dim() {
                        diff[k] = st[k] - y[k];
                    }
                    let kv = epanechnikov_product(&diff, eps);
                    if kv > 0.0 {
                        hits.push((p as u32, kv));
                        acc += kv;
                    }
                }
            }
            let value = acc / cfg.n_paths as f64;
            let key = StreamKey::new(cfg.seed).substream(0xB0075).substream(4 + i as u64);
            let stderr = bootstrap_sparse_stderr(&hits, cfg.n_paths, key);
            let w = boundary_weight(domain, params.alpha(), t, x)
                * boundary_weight(domain, params.alpha(), t, y);
            let free = product_kernel(params, t, x, y)?;
            let ratio = if value > 0.0 { value / (w * free) } else { 0.0 };
            entries[i] = Some(RatioEntry {
                t,
                x: x.clone(),
                y: y.clone(),
                estimate: value,
                stderr,
                ratio,
            });
        }
    }
    let entries: Vec<RatioEntry> = entries.into_iter().map(|e| e.unwrap()).collect();
    let n_zero = entries.iter().filter(|e| e.ratio == 0.0).count();
    let positive: Vec<f64> = entries.iter().map(|e| e.ratio).filter(|&r| r > 0.0).collect();
    let ratio_min = positive.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_max = positive.iter().cloned().fold(0.0f64, f64::max);
    Ok(BoundDiagnostics { entries, ratio_min, ratio_max, n_zero })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{paper_domain, CatalogId};

    fn params2(alpha: f64) -> AlphaParam {
        AlphaParam::new(alpha, 2).unwrap()
    }

    #[test]
    fn kde_whole_space_control() {
        // domain so large the killing never triggers: estimate ~ free kernel
        let params = params2(1.0);
        let huge = crate::geometry::Domain::new(crate::geometry::Shape::Ball {
            center: vec![0.0, 0.0],
            radius: 500.0,
        })
        .unwrap();
        let cfg = SimConfig::new(5e-3, 0.5, 60_000, 12).unwrap();
        let y = [0.3, -0.1];
        let est = estimate_pd_survivor_kde(&huge, &params, 0.5, &[0.0, 0.0], &y, &cfg, None).unwrap();
        let free = product_kernel(&params, 0.5, &[0.0, 0.0], &y).unwrap();
        assert!(
            (est.value - free).abs() < 3.0 * est.stderr + 0.03 * free,
            "kde {} +- {} vs free {}",
            est.value,
            est.stderr,
            free
        );
    }

    #[test]
    fn bridge_whole_space_control() {
        let params = params2(1.0);
        let huge = crate::geometry::Domain::new(crate::geometry::Shape::Ball {
            center: vec![0.0, 0.0],
            radius: 500.0,
        })
        .unwrap();
        let cfg = SimConfig::new(5e-3, 0.5, 30_000, 21).unwrap();
        let y = [0.4, 0.2];
        let est = estimate_pd_bridge(&huge, &params, 0.5, &[0.0, 0.0], &y, &cfg, None).unwrap();
        let free = product_kernel(&params, 0.5, &[0.0, 0.0], &y).unwrap();
        assert!(
            (est.value - free).abs() < 4.0 * est.stderr + 0.04 * free,
            "bridge {} +- {} vs free {}",
            est.value,
            est.stderr,
            free
        );
    }

    #[test]
    fn subtraction_free_domain_limit() {
        let params = params2(1.2);
        let huge = crate::geometry::Domain::new(crate::geometry::Shape::Ball {
            center: vec![0.0, 0.0],
            radius: 1e4,
        })
        .unwrap();
        let cfg = SimConfig::new(1e-2, 0.3, 2_000, 3).unwrap();
        let y = [0.5, 0.5];
        let est = estimate_pd_subtraction(&huge, &params, 0.3, &[0.0, 0.0], &y, &cfg).unwrap();
        let free = product_kernel(&params, 0.3, &[0.0, 0.0], &y).unwrap();
        assert!((est.value - free).abs() < 1e-6 + 3.0 * est.stderr);
    }

    #[test]
    fn subtraction_short_time_interior_equivalence() {
        // t -> 0 at fixed interior x=y: estimate / free -> 1
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(1e-4, 0.01, 20_000, 9).unwrap();
        let est = estimate_pd_subtraction(&d, &params, 0.01, &[0.0, 0.0], &[0.0, 0.0], &cfg).unwrap();
        let free = product_kernel(&params, 0.01, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let ratio = est.value / free;
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn bridge_and_kde_agree_on_ball() {
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(2e-3, 0.5, 50_000, 33).unwrap();
        let (x, y) = ([0.0, 0.0], [0.3, 0.0]);
        let kde = estimate_pd_survivor_kde(&d, &params, 0.5, &x, &y, &cfg, None).unwrap();
        let bridge = estimate_pd_bridge(&d, &params, 0.5, &x, &y, &cfg, None).unwrap();
        let tol = 3.0 * (kde.stderr.powi(2) + bridge.stderr.powi(2)).sqrt() + 0.03 * kde.value;
        assert!(
            (kde.value - bridge.value).abs() < tol,
            "kde {} vs bridge {} (tol {tol})",
            kde.value,
            bridge.value
        );
    }

    #[test]
    fn bridge_symmetry_in_xy() {
        let params = params2(1.3);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(2e-3, 0.4, 30_000, 44).unwrap();
        let (x, y) = ([0.2, 0.1], [-0.4, 0.3]);
        let a = estimate_pd_bridge(&d, &params, 0.4, &x, &y, &cfg, None).unwrap();
        let b = estimate_pd_bridge(&d, &params, 0.4, &y, &x, &cfg, None).unwrap();
        assert!(
            (a.value - b.value).abs() < 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt() + 0.03 * a.value,
            "{} vs {}",
            a.value,
            b.value
        );
    }

    #[test]
    fn diagonal_balls_cross_estimate_vanishes() {
        // x, y in different components: survivor hits at y are (up to
        // tunneling) zero
        let params = params2(1.0);
        let d = paper_domain(CatalogId::DiagonalBalls63, 1.0).unwrap();
        let cfg = SimConfig::new(1e-3, 1.0, 100_000, 7).unwrap();
        let est = estimate_pd_survivor_kde(&d, &params, 1.0, &[-1.1, -1.1], &[1.1, 1.1], &cfg, None);
        match est {
            Ok(e) => assert!(e.value < 1e-3, "cross-component estimate {}", e.value),
            Err(EstimatorError::ZeroSurvivors) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn kde_near_diagonal_short_time_band() {
        // small t at the center of the ball: the estimate sits within the
        // calibrated envelope factor of t^{-d/alpha}
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let t = 0.05;
        let cfg = SimConfig::new(2e-4, t, 50_000, 19).unwrap();
        let est =
            estimate_pd_survivor_kde(&d, &params, t, &[0.0, 0.0], &[0.0, 0.0], &cfg, None).unwrap();
        let env = crate::stable::Envelope::calibrate(1.0).unwrap();
        let c = env.c1().powi(2);
        let peak = t.powi(-2);
        assert!(
            est.value > peak / c && est.value < peak * c,
            "estimate {} outside [{}, {}]",
            est.value,
            peak / c,
            peak * c
        );
    }

    #[test]
    fn lambda1_two_starts_agree() {
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(2e-3, 1.5, 40_000, 55).unwrap();
        let grid = vec![0.5, 0.75, 1.0, 1.25, 1.5];
        let (l1, s1) =
            estimate_lambda1(&d, &params, &[vec![0.0, 0.0]], &grid, &cfg).unwrap();
        let (l2, s2) =
            estimate_lambda1(&d, &params, &[vec![0.4, 0.0]], &grid, &cfg).unwrap();
        let joint = (s1 * s1 + s2 * s2).sqrt();
        assert!((l1 - l2).abs() < 2.0 * joint + 0.06 * l1, "{l1} vs {l2} (joint {joint})");
        assert!(l1 > 0.0 && l1.is_finite());
    }

    #[test]
    fn lambda1_decay_not_resolved_detected() {
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(1e-3, 0.02, 2_000, 5).unwrap();
        // grid far too short to resolve the decay
        let r = estimate_lambda1(&d, &params, &[vec![0.0, 0.0]], &[0.01, 0.02], &cfg);
        assert!(matches!(r, Err(EstimatorError::DecayNotResolved(_))));
    }

    #[test]
    fn boundary_weight_forms() {
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        // interior point, small t: weight saturates at 1
        assert_eq!(boundary_weight(&d, 1.0, 0.01, &[0.0, 0.0]), 1.0);
        // near-boundary point: w = delta^{alpha/2}/sqrt(t)
        let w = boundary_weight(&d, 1.0, 1.0, &[0.96, 0.0]);
        assert!((w - 0.04f64.powf(0.5)).abs() < 1e-12);
    }
}
