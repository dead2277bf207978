//! Time-discretized simulation of the cylindrical process and its killed
//! version.
//!
//! The scheme takes exact stable increments at grid times and kills at the
//! first grid time outside the domain, so it overestimates survival by the
//! excursions it cannot see; estimators therefore expose dt-refinement
//! studies rather than claiming continuum values. The exit time is reported
//! as the bracket `[tau_lo, tau_hi] = [last inside, first outside]` whose
//! width is exactly one step.
//!
//! Paths are embarrassingly parallel. Reductions split the path range into
//! fixed 4096-path chunks, reduce each chunk sequentially in path order and
//! merge chunk results in chunk order, so every statistic is bit-identical
//! for any worker count.

use crate::geometry::Domain;
use crate::rng::{Stream, StreamKey};
use crate::stable::{standard_stable, AlphaParam};
use crate::stats::Mesh;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("starting point {0:?} is outside the domain")]
    StartOutsideDomain(Vec<f64>),
    #[error("{alive_frac:.4} of paths still alive after extending to t = {t_reached}; raise the budget")]
    TruncationBudgetExceeded { alive_frac: f64, t_reached: f64 },
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RecordMode {
    EndpointOnly,
    FullPath,
    ExitOnly,
}

/// Simulation parameters. `dt` is the grid step, `t_end` the horizon,
/// `seed` the root of all random streams.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub record_mode: RecordMode,
    /// Exit-time estimation may extend the horizon up to this multiple of
    /// `t_end` to reach the 99.9% killed mark.
    pub max_extension_factor: f64,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, n_paths: usize, seed: u64) -> Result<Self, SimError> {
        if !(dt > 0.0) || !(t_end > 0.0) || dt > t_end {
            return Err(SimError::BadConfig(format!("need 0 < dt <= t_end, got dt={dt}, t_end={t_end}")));
        }
        if n_paths == 0 {
            return Err(SimError::BadConfig("n_paths must be >= 1".into()));
        }
        Ok(SimConfig {
            dt,
            t_end,
            n_paths,
            seed,
            record_mode: RecordMode::EndpointOnly,
            max_extension_factor: 64.0,
        })
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// One discretized trajectory.
#[derive(Clone, Debug)]
pub struct PathSample {
    /// Grid times, present in `FullPath` mode.
    pub times: Vec<f64>,
    /// States at grid times, row-major `[step][coord]`, present in
    /// `FullPath` mode (in other modes only the last state is kept).
    pub states: Vec<Vec<f64>>,
    pub killed: bool,
    /// Last grid time inside the domain (killed paths only).
    pub tau_lo: f64,
    /// First grid time outside the domain (killed paths only);
    /// `tau_hi - tau_lo = dt` exactly.
    pub tau_hi: f64,
    /// First outside grid state; the discrete exit law evaluates here.
    pub exit_point: Option<Vec<f64>>,
    /// State at `t_end` for surviving paths, last inside state otherwise.
    pub final_state: Vec<f64>,
}

/// Stepper for one path: exact per-coordinate stable increments on
/// counter-based streams keyed by `(seed, path_index, coordinate)`.
pub struct Walker {
    alpha: f64,
    scale: f64,
    streams: Vec<Stream>,
    pub state: Vec<f64>,
}

impl Walker {
    pub fn new(params: &AlphaParam, x0: &[f64], dt: f64, seed: u64, path_index: u64) -> Self {
        let root = StreamKey::new(seed).substream(path_index);
        let streams = (0..params.dim()).map(|j| Stream::new(root.substream(j as u64))).collect();
        Walker {
            alpha: params.alpha(),
            scale: dt.powf(1.0 / params.alpha()),
            streams,
            state: x0.to_vec(),
        }
    }

    /// Advance one grid step.
    #[inline]
    pub fn advance(&mut self) {
        for (j, s) in self.streams.iter_mut().enumerate() {
            self.state[j] += self.scale * standard_stable(self.alpha, s);
        }
    }
}

/// Simulate one path, killed on `domain` when supplied. Deterministic given
/// `(cfg.seed, path_index)`.
pub fn simulate_path(
    params: &AlphaParam,
    x0: &[f64],
    cfg: &SimConfig,
    path_index: u64,
    domain: Option<&Domain>,
) -> Result<PathSample, SimError> {
    if let Some(d) = domain {
        if !d.contains(x0) {
            return Err(SimError::StartOutsideDomain(x0.to_vec()));
        }
    }
    let n_steps = cfg.n_steps();
    let full = cfg.record_mode == RecordMode::FullPath;
    let mut w = Walker::new(params, x0, cfg.dt, cfg.seed, path_index);
    let mut times = Vec::new();
    let mut states = Vec::new();
    if full {
        times.push(0.0);
        states.push(w.state.clone());
    }
    let mut last_inside = w.state.clone();
    for k in 0..n_steps {
        w.advance();
        let t = (k + 1) as f64 * cfg.dt;
        if full {
            times.push(t);
            states.push(w.state.clone());
        }
        if let Some(d) = domain {
            if !d.contains(&w.state) {
                return Ok(PathSample {
                    times,
                    states,
                    killed: true,
                    tau_lo: t - cfg.dt,
                    tau_hi: t,
                    exit_point: Some(w.state.clone()),
                    final_state: last_inside,
                });
            }
        }
        last_inside.copy_from_slice(&w.state);
    }
    Ok(PathSample {
        times,
        states,
        killed: false,
        tau_lo: f64::NAN,
        tau_hi: f64::NAN,
        exit_point: None,
        final_state: w.state,
    })
}

const CHUNK: usize = 4096;

/// Order-preserving parallel map-reduce over fixed path chunks.
pub fn chunked_reduce<T, M>(n_paths: usize, map: M) -> Vec<T>
where
    T: Send,
    M: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let ranges: Vec<std::ops::Range<usize>> = (0..n_paths)
        .step_by(CHUNK)
        .map(|lo| lo..(lo + CHUNK).min(n_paths))
        .collect();
    ranges.into_par_iter().map(map).collect()
}

/// Endpoint snapshots of a (possibly killed) ensemble at several times,
/// stored flat: per checkpoint, `coords` holds `n_paths * dim` reals and
/// `alive` the survival mask.
pub struct EndpointEnsemble {
    pub checkpoints: Vec<f64>,
    pub dim: usize,
    pub n_paths: usize,
    pub coords: Vec<Vec<f64>>,
    pub alive: Vec<Vec<bool>>,
    pub alive_counts: Vec<usize>,
}

impl EndpointEnsemble {
    /// State of path `p` at checkpoint `ci`, None once killed.
    #[inline]
    pub fn state(&self, ci: usize, p: usize) -> Option<&[f64]> {
        if self.alive[ci][p] {
            Some(&self.coords[ci][p * self.dim..(p + 1) * self.dim])
        } else {
            None
        }
    }

    /// Iterator over alive states at checkpoint `ci`.
    pub fn alive_states(&self, ci: usize) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_paths).filter_map(move |p| self.state(ci, p))
    }
}

/// Run `cfg.n_paths` paths from `x0`, killed on `domain` if supplied, and
/// snapshot states at `checkpoints` (rounded to grid times).
pub fn endpoint_ensemble(
    domain: Option<&Domain>,
    params: &AlphaParam,
    x0: &[f64],
    cfg: &SimConfig,
    checkpoints: &[f64],
) -> Result<EndpointEnsemble, SimError> {
    if let Some(d) = domain {
        if !d.contains(x0) {
            return Err(SimError::StartOutsideDomain(x0.to_vec()));
        }
    }
    let dim = params.dim();
    let steps: Vec<usize> = checkpoints.iter().map(|&t| (t / cfg.dt).round().max(1.0) as usize).collect();
    let max_step = *steps.iter().max().unwrap_or(&1);

    struct Part {
        coords: Vec<Vec<f64>>,
        alive: Vec<Vec<bool>>,
        counts: Vec<usize>,
    }
    let parts = chunked_reduce(cfg.n_paths, |range| {
        let mut part = Part {
            coords: vec![Vec::with_capacity(range.len() * dim); steps.len()],
            alive: vec![Vec::with_capacity(range.len()); steps.len()],
            counts: vec![0; steps.len()],
        };
        for p in range {
            let mut w = Walker::new(params, x0, cfg.dt, cfg.seed, p as u64);
            let mut alive = true;
            for k in 1..=max_step {
                if alive {
                    w.advance();
                    if let Some(d) = domain {
                        if !d.contains(&w.state) {
                            alive = false;
                        }
                    }
                }
                for (ci, &s) in steps.iter().enumerate() {
                    if s == k {
                        part.coords[ci].extend_from_slice(&w.state);
                        part.alive[ci].push(alive);
                        part.counts[ci] += alive as usize;
                    }
                }
            }
        }
        part
    });

    let mut out = EndpointEnsemble {
        checkpoints: steps.iter().map(|&s| s as f64 * cfg.dt).collect(),
        dim,
        n_paths: cfg.n_paths,
        coords: vec![Vec::with_capacity(cfg.n_paths * dim); steps.len()],
        alive: vec![Vec::with_capacity(cfg.n_paths); steps.len()],
        alive_counts: vec![0; steps.len()],
    };
    for part in parts {
        for ci in 0..steps.len() {
            out.coords[ci].extend_from_slice(&part.coords[ci]);
            out.alive[ci].extend_from_slice(&part.alive[ci]);
            out.alive_counts[ci] += part.counts[ci];
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of `P_x(t < tau_D)` with binomial standard error.
pub fn survival_probability(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    t: f64,
    cfg: &SimConfig,
) -> Result<(f64, f64), SimError> {
    let curve = survival_curve(domain, params, x, &[t], cfg)?;
    Ok((curve[0].1, curve[0].2))
}

/// Survival curve plus per-block curves over `n_blocks` fixed path blocks
/// (for path-level error bars on decay fits: points of one curve share
/// paths and are strongly correlated, so only block spread gives an honest
/// stderr).
pub fn survival_curve_blocked(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    ts: &[f64],
    cfg: &SimConfig,
    n_blocks: usize,
) -> Result<(Vec<(f64, f64, f64)>, Vec<Vec<f64>>), SimError> {
    if !domain.contains(x) {
        return Err(SimError::StartOutsideDomain(x.to_vec()));
    }
    let steps: Vec<usize> = ts.iter().map(|&t| (t / cfg.dt).round().max(1.0) as usize).collect();
    let max_step = *steps.iter().max().unwrap();
    let nb = n_blocks.max(1);
    let parts = chunked_reduce(cfg.n_paths, |range| {
        let mut alive_counts = vec![0usize; steps.len()];
        let mut block_counts = vec![vec![0usize; steps.len()]; nb];
        for p in range {
            let b = p * nb / cfg.n_paths;
            let mut w = Walker::new(params, x, cfg.dt, cfg.seed, p as u64);
            'steps: for k in 1..=max_step {
                w.advance();
                if !domain.contains(&w.state) {
                    break 'steps;
                }
                for (ci, &s) in steps.iter().enumerate() {
                    if s == k {
                        alive_counts[ci] += 1;
                        block_counts[b][ci] += 1;
                    }
                }
            }
        }
        (alive_counts, block_counts)
    });
    let mut alive = vec![0usize; steps.len()];
    let mut blocks = vec![vec![0usize; steps.len()]; nb];
    for (a, bc) in parts {
        for (t, v) in alive.iter_mut().zip(a) {
            *t += v;
        }
        for (tb, vb) in blocks.iter_mut().zip(bc) {
            for (t, v) in tb.iter_mut().zip(vb) {
                *t += v;
            }
        }
    }
    let block_size = cfg.n_paths as f64 / nb as f64;
    let curve = steps
        .iter()
        .zip(&alive)
        .map(|(&s, &a)| {
            let p_hat = a as f64 / cfg.n_paths as f64;
            (s as f64 * cfg.dt, p_hat, crate::stats::binomial_stderr(p_hat, cfg.n_paths))
        })
        .collect();
    let block_curves = blocks
        .into_iter()
        .map(|bc| bc.into_iter().map(|c| c as f64 / block_size).collect())
        .collect();
    Ok((curve, block_curves))
}

/// Survival probabilities at several times from one shared path ensemble;
/// returns `(grid time, estimate, stderr)` per requested time.
pub fn survival_curve(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    ts: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<(f64, f64, f64)>, SimError> {
    if !domain.contains(x) {
        return Err(SimError::StartOutsideDomain(x.to_vec()));
    }
    let steps: Vec<usize> = ts.iter().map(|&t| (t / cfg.dt).round().max(1.0) as usize).collect();
    let max_step = *steps.iter().max().unwrap();
    let parts = chunked_reduce(cfg.n_paths, |range| {
        let mut alive_counts = vec![0usize; steps.len()];
        for p in range {
            let mut w = Walker::new(params, x, cfg.dt, cfg.seed, p as u64);
            let mut alive = true;
            'steps: for k in 1..=max_step {
                w.advance();
                if !domain.contains(&w.state) {
                    alive = false;
                }
                for (ci, &s) in steps.iter().enumerate() {
                    if s == k && alive {
                        alive_counts[ci] += 1;
                    }
                }
                if !alive {
                    break 'steps;
                }
            }
        }
        alive_counts
    });
    let mut alive = vec![0usize; steps.len()];
    for part in parts {
        for (a, p) in alive.iter_mut().zip(part) {
            *a += p;
        }
    }
    Ok(steps
        .iter()
        .zip(alive)
        .map(|(&s, a)| {
            let p_hat = a as f64 / cfg.n_paths as f64;
            (s as f64 * cfg.dt, p_hat, crate::stats::binomial_stderr(p_hat, cfg.n_paths))
        })
        .collect())
}

/// Mean first-exit time, `tau` taken as the bracket midpoint (bias <= dt/2
/// per path). Extends the horizon until 99.9% of paths are killed or the
/// extension budget runs out.
pub fn mean_exit_time(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    cfg: &SimConfig,
) -> Result<(f64, f64), SimError> {
    if !domain.contains(x) {
        return Err(SimError::StartOutsideDomain(x.to_vec()));
    }
    let max_steps = (cfg.n_steps() as f64 * cfg.max_extension_factor) as usize;
    struct Part {
        taus: Vec<f64>,
        survivors: usize,
    }
    let parts = chunked_reduce(cfg.n_paths, |range| {
        let mut taus = Vec::with_capacity(range.len());
        let mut survivors = 0usize;
        for p in range {
            let mut w = Walker::new(params, x, cfg.dt, cfg.seed, p as u64);
            let mut killed_at = None;
            for k in 1..=max_steps {
                w.advance();
                if !domain.contains(&w.state) {
                    killed_at = Some(k);
                    break;
                }
            }
            match killed_at {
                Some(k) => taus.push((k as f64 - 0.5) * cfg.dt),
                None => {
                    survivors += 1;
                    taus.push(max_steps as f64 * cfg.dt);
                }
            }
        }
        Part { taus, survivors }
    });
    let mut taus = Vec::with_capacity(cfg.n_paths);
    let mut survivors = 0usize;
    for p in parts {
        taus.extend(p.taus);
        survivors += p.survivors;
    }
    let alive_frac = survivors as f64 / cfg.n_paths as f64;
    if alive_frac > 1e-3 {
        return Err(SimError::TruncationBudgetExceeded {
            alive_frac,
            t_reached: max_steps as f64 * cfg.dt,
        });
    }
    Ok(crate::stats::mean_stderr(&taus))
}

/// Exit records of killed paths up to `t_end`.
pub struct ExitEnsemble {
    pub n_paths: usize,
    pub dt: f64,
    /// Midpoint exit-time estimates for killed paths.
    pub taus: Vec<f64>,
    pub exit_points: Vec<Vec<f64>>,
    /// Last inside state preceding each exit.
    pub pre_exit: Vec<Vec<f64>>,
    pub n_survivors: usize,
}

pub fn exit_records(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    cfg: &SimConfig,
) -> Result<ExitEnsemble, SimError> {
    if !domain.contains(x) {
        return Err(SimError::StartOutsideDomain(x.to_vec()));
    }
    let n_steps = cfg.n_steps();
    struct Part {
        taus: Vec<f64>,
        exits: Vec<Vec<f64>>,
        pre: Vec<Vec<f64>>,
        survivors: usize,
    }
    let parts = chunked_reduce(cfg.n_paths, |range| {
        let mut part = Part { taus: vec![], exits: vec![], pre: vec![], survivors: 0 };
        for p in range {
            let mut w = Walker::new(params, x, cfg.dt, cfg.seed, p as u64);
            let mut prev = w.state.clone();
            let mut killed = false;
            for k in 1..=n_steps {
                w.advance();
                if !domain.contains(&w.state) {
                    part.taus.push((k as f64 - 0.5) * cfg.dt);
                    part.exits.push(w.state.clone());
                    part.pre.push(prev.clone());
                    killed = true;
                    break;
                }
                prev.copy_from_slice(&w.state);
            }
            if !killed {
                part.survivors += 1;
            }
        }
        part
    });
    let mut out = ExitEnsemble {
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        taus: vec![],
        exit_points: vec![],
        pre_exit: vec![],
        n_survivors: 0,
    };
    for p in parts {
        out.taus.extend(p.taus);
        out.exit_points.extend(p.exits);
        out.pre_exit.extend(p.pre);
        out.n_survivors += p.survivors;
    }
    Ok(out)
}

/// Empirical exit law over mesh cells (covering part of the complement),
/// plus the per-exit displacement diagnostic: the second-largest coordinate
/// displacement over the killing step, whose median is O(dt^{1/alpha})
/// because genuine jumps move one coordinate at a time.
pub struct ExitHistogram {
    pub mesh: Mesh,
    pub mass: Vec<f64>,
    pub n_killed: usize,
    pub n_paths: usize,
    pub median_second_displacement: f64,
}

pub fn exit_distribution(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    cfg: &SimConfig,
    mesh: &Mesh,
) -> Result<ExitHistogram, SimError> {
    let records = exit_records(domain, params, x, cfg)?;
    let mut mass = vec![0.0; mesh.len()];
    let w = 1.0 / cfg.n_paths as f64;
    let mut second_disp = Vec::with_capacity(records.exit_points.len());
    for (e, pre) in records.exit_points.iter().zip(&records.pre_exit) {
        if let Some(c) = mesh.cell_of(e) {
            mass[c] += w;
        }
        let mut d: Vec<f64> = e.iter().zip(pre).map(|(a, b)| (a - b).abs()).collect();
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if d.len() > 1 {
            second_disp.push(d[1]);
        }
    }
    second_disp.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if second_disp.is_empty() {
        0.0
    } else {
        second_disp[second_disp.len() / 2]
    };
    Ok(ExitHistogram {
        mesh: mesh.clone(),
        mass,
        n_killed: records.exit_points.len(),
        n_paths: cfg.n_paths,
        median_second_displacement: median,
    })
}

/// Normalized occupation histogram: cell-averaged Green-function estimate.
/// The total mass equals the per-path mean of `min(tau_hat, t_end)`.
pub struct OccupationRecord {
    pub mesh: Mesh,
    /// Expected time spent per cell before exit (per path).
    pub mass: Vec<f64>,
    pub total_mass: f64,
    pub n_paths: usize,
}

impl OccupationRecord {
    /// Cell-averaged Green function value: mass / cell volume.
    pub fn green_density(&self, cell: usize) -> f64 {
        self.mass[cell] / self.mesh.cell_volume()
    }
}

pub fn occupation_green(
    domain: &Domain,
    params: &AlphaParam,
    x: &[f64],
    cfg: &SimConfig,
    mesh: &Mesh,
) -> Result<OccupationRecord, SimError> {
    if !domain.contains(x) {
        return Err(SimError::StartOutsideDomain(x.to_vec()));
    }
    let n_steps = cfg.n_steps();
    let w = cfg.dt / cfg.n_paths as f64;
    let parts = chunked_reduce(cfg.n_paths, |range| {
        let mut mass = vec![0.0f64; mesh.len()];
        let mut total = 0.0f64;
        for p in range {
            let mut walker = Walker::new(params, x, cfg.dt, cfg.seed, p as u64);
            // weight dt for every inside state except the last before a
            // kill, which gets dt/2 so the path total is the midpoint tau
            let mut prev_cell = mesh.cell_of(&walker.state);
            for _k in 1..=n_steps {
                walker.advance();
                let inside = domain.contains(&walker.state);
                if inside {
                    if let Some(c) = prev_cell {
                        mass[c] += w;
                    }
                    total += w;
                    prev_cell = mesh.cell_of(&walker.state);
                } else {
                    if let Some(c) = prev_cell {
                        mass[c] += 0.5 * w;
                    }
                    total += 0.5 * w;
                    break;
                }
            }
        }
        (mass, total)
    });
    let mut mass = vec![0.0; mesh.len()];
    let mut total = 0.0;
    for (m, t) in parts {
        for (a, b) in mass.iter_mut().zip(m) {
            *a += b;
        }
        total += t;
    }
    Ok(OccupationRecord { mesh: mesh.clone(), mass, total_mass: total, n_paths: cfg.n_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{paper_domain, CatalogId};

    fn params2(alpha: f64) -> AlphaParam {
        AlphaParam::new(alpha, 2).unwrap()
    }

    #[test]
    fn path_determinism_bitwise() {
        let params = params2(1.3);
        let cfg = SimConfig::new(1e-3, 0.1, 4, 42).unwrap();
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let a = simulate_path(&params, &[0.1, 0.2], &cfg, 7, Some(&d)).unwrap();
        let b = simulate_path(&params, &[0.1, 0.2], &cfg, 7, Some(&d)).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.killed, b.killed);
        assert_eq!(a.exit_point, b.exit_point);
    }

    #[test]
    fn start_outside_domain_rejected() {
        let params = params2(1.0);
        let cfg = SimConfig::new(1e-2, 0.1, 1, 1).unwrap();
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        assert!(matches!(
            simulate_path(&params, &[2.0, 0.0], &cfg, 0, Some(&d)),
            Err(SimError::StartOutsideDomain(_))
        ));
    }

    #[test]
    fn killing_bracket_is_one_step() {
        let params = params2(0.9);
        let mut cfg = SimConfig::new(1e-2, 2.0, 64, 3).unwrap();
        cfg.record_mode = RecordMode::FullPath;
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let mut seen_killed = 0;
        for p in 0..64 {
            let s = simulate_path(&params, &[0.0, 0.0], &cfg, p, Some(&d)).unwrap();
            if s.killed {
                seen_killed += 1;
                assert!((s.tau_hi - s.tau_lo - cfg.dt).abs() < 1e-15);
                let e = s.exit_point.as_ref().unwrap();
                assert!(!d.contains(e));
                // state at tau_lo is inside
                let k = (s.tau_lo / cfg.dt).round() as usize;
                assert!(d.contains(&s.states[k]));
            }
        }
        assert!(seen_killed > 10, "expected most of 64 paths killed by t=2");
    }

    #[test]
    fn coordinate_streams_are_independent_of_dim() {
        // coordinate j's increments depend only on (seed, path, j)
        let p2 = params2(1.1);
        let p3 = AlphaParam::new(1.1, 3).unwrap();
        let cfg = SimConfig::new(1e-2, 0.05, 1, 9).unwrap();
        let a = simulate_path(&p2, &[0.0, 0.0], &cfg, 3, None).unwrap();
        let b = simulate_path(&p3, &[0.0, 0.0, 0.0], &cfg, 3, None).unwrap();
        assert_eq!(a.final_state[0], b.final_state[0]);
        assert_eq!(a.final_state[1], b.final_state[1]);
    }

    #[test]
    fn free_endpoint_matches_product_cauchy_chi2() {
        // alpha=1, d=2, t=1: endpoint ~ product Cauchy; chi-squared on a
        // 20x20 cell grid at level 0.01
        let params = params2(1.0);
        let cfg = SimConfig::new(1e-2, 1.0, 100_000, 2024).unwrap();
        let ens = endpoint_ensemble(None, &params, &[0.0, 0.0], &cfg, &[1.0]).unwrap();
        let mesh = Mesh::new(vec![-5.0, -5.0], vec![5.0, 5.0], vec![20, 20]);
        let mut observed = vec![0.0; mesh.len() + 1];
        for st in ens.alive_states(0) {
            match mesh.cell_of(st) {
                Some(c) => observed[c] += 1.0,
                None => observed[mesh.len()] += 1.0,
            }
        }
        // expected cell probabilities from the Cauchy CDF per coordinate
        let cell_prob_1d = |a: f64, b: f64| {
            (b.atan() - a.atan()) / std::f64::consts::PI
        };
        let mut expected = vec![0.0; mesh.len() + 1];
        let w = 0.25; // half the 0.5 cell width
        for c in 0..mesh.len() {
            let center = mesh.center_of(c);
            let px = cell_prob_1d(center[0] - w, center[0] + w);
            let py = cell_prob_1d(center[1] - w, center[1] + w);
            expected[c] = px * py * cfg.n_paths as f64;
        }
        let inside: f64 = expected[..mesh.len()].iter().sum();
        expected[mesh.len()] = cfg.n_paths as f64 - inside;
        let p = crate::stats::chi2_pvalue(&observed, &expected);
        assert!(p > 0.01, "chi2 p-value {p}");
    }

    #[test]
    fn survival_continuity_at_zero() {
        let params = params2(1.2);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(1e-3, 1e-3, 20_000, 5).unwrap();
        let (s, _) = survival_probability(&d, &params, &[0.0, 0.0], 1e-3, &cfg).unwrap();
        assert!(s > 0.99, "one-step survival from the center: {s}");
    }

    #[test]
    fn survival_monotone_in_domain_with_common_seed() {
        // nested balls, identical seeds: pathwise coupling makes survival
        // monotone nondecreasing in the domain
        let params = params2(1.4);
        let small = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let big = paper_domain(CatalogId::Disc, 2.0).unwrap();
        let cfg = SimConfig::new(2e-3, 0.5, 20_000, 77).unwrap();
        let (s_small, _) = survival_probability(&small, &params, &[0.0, 0.0], 0.5, &cfg).unwrap();
        let (s_big, _) = survival_probability(&big, &params, &[0.0, 0.0], 0.5, &cfg).unwrap();
        assert!(s_big >= s_small);
    }

    #[test]
    fn exit_time_truncation_error() {
        let params = params2(0.8);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let mut cfg = SimConfig::new(1e-2, 0.01, 500, 8).unwrap();
        cfg.max_extension_factor = 2.0; // absurdly small budget
        assert!(matches!(
            mean_exit_time(&d, &params, &[0.0, 0.0], &cfg),
            Err(SimError::TruncationBudgetExceeded { .. })
        ));
    }

    #[test]
    fn occupation_total_mass_is_mean_exit_time() {
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(2e-3, 8.0, 4_000, 13).unwrap();
        let mesh = Mesh::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![24, 24]);
        let occ = occupation_green(&d, &params, &[0.0, 0.0], &cfg, &mesh).unwrap();
        // horizon long enough that nearly all paths die: total mass ~ E[tau]
        let mut cfg2 = cfg.clone();
        cfg2.max_extension_factor = 8.0;
        let (et, se) = mean_exit_time(&d, &params, &[0.0, 0.0], &cfg2).unwrap();
        assert!(
            (occ.total_mass - et).abs() < 4.0 * se + 5e-3,
            "occupation mass {} vs mean exit time {}",
            occ.total_mass,
            et
        );
        // and the in-mesh cell mass sums to (almost) the total
        let cell_sum: f64 = occ.mass.iter().sum();
        assert!((cell_sum - occ.total_mass).abs() < 0.05 * occ.total_mass);
    }

    #[test]
    fn free_marginal_matches_kernel_ks() {
        // killed=never: coordinate marginal at t matches the 1-D density by
        // comparing empirical CDF spacing against kernel quadrature mass
        let params = params2(1.5);
        let cfg = SimConfig::new(1e-2, 0.7, 50_000, 31).unwrap();
        let ens = endpoint_ensemble(None, &params, &[0.0, 0.0], &cfg, &[0.7]).unwrap();
        let mut xs: Vec<f64> = ens.alive_states(0).map(|s| s[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // CDF via kernel integration on a grid
        let t = 0.7;
        let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        // left tail below -10 analytically ~ C t |z|^-a / a
        acc += crate::stable::c1_alpha(1.5) * t * 10f64.powf(-1.5) / 1.5;
        for w in grid.windows(2) {
            let m = crate::quad::integrate(
                &|z: f64| crate::stable::density_1d(1.5, t, z).unwrap(),
                w[0],
                w[1],
                1e-10,
                20,
                10_000,
            );
            cdf.push(acc);
            acc += m.value;
        }
        cdf.push(acc);
        // KS distance between empirical and quadrature CDF at grid points
        let n = xs.len() as f64;
        let mut d_stat: f64 = 0.0;
        for (g, c) in grid.iter().zip(&cdf) {
            let emp = xs.partition_point(|v| *v <= *g) as f64 / n;
            d_stat = d_stat.max((emp - c).abs());
        }
        // one-sample KS critical value at 1%: 1.63/sqrt(n)
        assert!(d_stat < 1.63 / n.sqrt() + 2e-3, "KS {d_stat}");
    }

    #[test]
    fn exit_mass_matches_jump_intensity_accounting() {
        // expected exits into {|z| > 2} equal the occupation integral of the
        // per-axis jump intensity beyond the chord, evaluated in closed form
        // from the tail antiderivative of j
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(1e-3, 6.0, 20_000, 23).unwrap();
        let records = exit_records(&d, &params, &[0.0, 0.0], &cfg).unwrap();
        assert!(records.n_survivors < 40);
        let observed = records
            .exit_points
            .iter()
            .filter(|e| e[0] * e[0] + e[1] * e[1] > 4.0)
            .count() as f64
            / cfg.n_paths as f64;

        let mesh = Mesh::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![30, 30]);
        let occ = occupation_green(&d, &params, &[0.0, 0.0], &cfg, &mesh).unwrap();
        let c1 = crate::stable::c1_alpha(1.0);
        let mut predicted = 0.0;
        for (cell, &mass) in occ.mass.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let u = mesh.center_of(cell);
            // per axis i, jumps land beyond radius 2 iff |theta| exceeds the
            // chord bound m_i = sqrt(4 - u_other^2)
            for i in 0..2 {
                let m = (4.0 - u[1 - i] * u[1 - i]).sqrt();
                predicted += mass * c1 * (1.0 / (m - u[i]) + 1.0 / (m + u[i]));
            }
        }
        let rel = (observed - predicted).abs() / predicted;
        assert!(rel < 0.10, "observed {observed:.4} vs predicted {predicted:.4} (rel {rel:.3})");
    }

    #[test]
    fn green_mass_scaling_between_balls() {
        // occupation mass per cell scales like lambda^alpha between B(0,1)
        // and B(0,2) when cells are matched under y -> 2y
        let params = params2(1.0);
        let n = 30_000;
        let b1 = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let b2 = paper_domain(CatalogId::Disc, 2.0).unwrap();
        let m1 = Mesh::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![16, 16]);
        let m2 = Mesh::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![16, 16]);
        let cfg1 = SimConfig::new(1e-3, 6.0, n, 29).unwrap();
        let cfg2 = SimConfig::new(1e-3, 12.0, n, 31).unwrap();
        let o1 = occupation_green(&b1, &params, &[0.0, 0.0], &cfg1, &m1).unwrap();
        let o2 = occupation_green(&b2, &params, &[0.0, 0.0], &cfg2, &m2).unwrap();
        // central 6x6 block, compared as a block sum
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for ix in 5..11 {
            for iy in 5..11 {
                let c = ix * 16 + iy;
                s1 += o1.mass[c];
                s2 += o2.mass[c];
            }
        }
        let ratio = s2 / s1;
        assert!((ratio - 2.0).abs() < 0.2, "block mass ratio {ratio} vs 2^alpha = 2");
    }

    #[test]
    fn green_density_vanishes_toward_boundary() {
        let params = params2(1.2);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let mesh = Mesh::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![24, 24]);
        let cfg = SimConfig::new(1e-3, 6.0, 20_000, 37).unwrap();
        let occ = occupation_green(&d, &params, &[0.0, 0.0], &cfg, &mesh).unwrap();
        // radial band averages of the green density
        let mut bands = [(0.0, 0usize); 3]; // [0,0.3), [0.5,0.7), [0.85,0.97)
        for c in 0..mesh.len() {
            let u = mesh.center_of(c);
            let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
            let g = occ.green_density(c);
            if r < 0.3 {
                bands[0].0 += g;
                bands[0].1 += 1;
            } else if (0.5..0.7).contains(&r) {
                bands[1].0 += g;
                bands[1].1 += 1;
            } else if (0.85..0.97).contains(&r) {
                bands[2].0 += g;
                bands[2].1 += 1;
            }
        }
        let avg: Vec<f64> = bands.iter().map(|(s, n)| s / *n as f64).collect();
        assert!(avg[0] > avg[1] && avg[1] > avg[2], "bands {avg:?}");
        assert!(avg[2] < 0.4 * avg[0], "boundary band {:.4} vs center {:.4}", avg[2], avg[0]);
    }

    #[test]
    fn exit_distribution_axis_alignment() {
        // the second-largest coordinate displacement over the killing step
        // is O(dt^{1/alpha}); the largest is O(1)
        let params = params2(1.0);
        let d = paper_domain(CatalogId::Disc, 1.0).unwrap();
        let cfg = SimConfig::new(1e-3, 4.0, 4_000, 17).unwrap();
        let mesh = Mesh::new(vec![-4.0, -4.0], vec![4.0, 4.0], vec![16, 16]);
        let h = exit_distribution(&d, &params, &[0.0, 0.0], &cfg, &mesh).unwrap();
        assert!(h.n_killed > 3_900);
        assert!(
            h.median_second_displacement < 50.0 * cfg.dt,
            "median second displacement {} should be O(dt)",
            h.median_second_displacement
        );
    }
}
