//! Geometry of the limit metric: branching random walk maxima, IO-distances
//! of nested copies on the cascade tree, the phase criterion, the geodesic
//! selection chain and the percolation-with-replacement toy model.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brickgraph::{enumerate_simple_paths, BrickGraph, PathFunctional, ThetaPolynomial};
use crate::critical::{DriftEstimate, StationaryLaw};
use crate::dist::{scaled_length, EmpiricalDistribution, FactorLaw};
use crate::error::{Error, Result};
use crate::io::fmt9;
use crate::renorm::tree_node_count;
use crate::rng::{stage, StreamKey};
use crate::stats::{linear_fit, mean, std_error};

pub const DEFAULT_PRUNE_WIDTH: usize = 100_000;
pub const MAX_FULL_BRW_NODES: u128 = 100_000_000;
pub const MAX_STORED_CASCADE_NODES: u128 = 10_000_000;
pub const MAX_CASCADE_NODES: u128 = 2_000_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrwEstimate {
    pub gamma: f64,
    pub slope_window: (usize, usize),
    pub reps: usize,
    pub stderr: f64,
    /// Particles kept per level; `None` for the full tree.
    pub pruning_width: Option<usize>,
    /// Mean of `M_n` over repetitions, `n = 0..=n_max`.
    pub mean_maxima: Vec<f64>,
}

fn brw_maxima(law: &FactorLaw, b: usize, n_max: usize, prune: Option<usize>, key: StreamKey) -> Vec<f64> {
    let mut particles = vec![0.0f64];
    let mut maxima = Vec::with_capacity(n_max + 1);
    maxima.push(0.0);
    let mut next = Vec::new();
    for level in 1..=n_max {
        let k = key.with_generation(level as u64);
        next.clear();
        for (j, &x) in particles.iter().enumerate() {
            let mut rng = k.with_index(j as u64).rng();
            for _ in 0..b {
                next.push(x + law.sample_log(&mut rng));
            }
        }
        if let Some(width) = prune {
            if next.len() > width {
                next.select_nth_unstable_by(width - 1, |a, b| b.total_cmp(a));
                next.truncate(width);
            }
        }
        maxima.push(next.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        std::mem::swap(&mut particles, &mut next);
    }
    maxima
}

/// Drift of `M_n`, the maximum over depth-`n` nodes of the summed
/// log-factors along the root path, by least squares over `window`.
pub fn brw_max_drift(
    law: &FactorLaw,
    b: usize,
    n_max: usize,
    window: (usize, usize),
    reps: usize,
    prune: Option<usize>,
    key: StreamKey,
) -> Result<BrwEstimate> {
    law.validate()?;
    if b < 2 || reps == 0 {
        return Err(Error::InvalidArgument("need b >= 2 and reps >= 1".into()));
    }
    if !(window.0 < window.1 && window.1 <= n_max) {
        return Err(Error::InvalidArgument(format!("bad slope window {window:?}")));
    }
    if prune == Some(0) {
        return Err(Error::InvalidArgument("pruning width must be positive".into()));
    }
    let leaves = (b as u128).saturating_pow(n_max as u32);
    if prune.is_none() && leaves > MAX_FULL_BRW_NODES {
        return Err(Error::Guard {
            what: "branching random walk leaves",
            value: leaves,
            limit: MAX_FULL_BRW_NODES,
        });
    }
    let key = key.with_stage(stage::BRW);
    let runs: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| brw_maxima(law, b, n_max, prune, key.subspace(r as u64)))
        .collect();
    let xs: Vec<f64> = (window.0..=window.1).map(|n| n as f64).collect();
    let slopes: Vec<f64> = runs
        .iter()
        .map(|m| linear_fit(&xs, &m[window.0..=window.1]).slope)
        .collect();
    let mean_maxima = (0..=n_max)
        .map(|n| runs.iter().map(|m| m[n]).sum::<f64>() / reps as f64)
        .collect();
    Ok(BrwEstimate {
        gamma: mean(&slopes),
        slope_window: window,
        reps,
        stderr: std_error(&slopes),
        pruning_width: prune,
        mean_maxima,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum LeafLaw {
    /// Every leaf copy has intrinsic IO-distance 1.
    Unit,
    /// Leaves drawn uniformly from a stationary sample.
    Stationary(EmpiricalDistribution),
}

impl LeafLaw {
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LeafLaw::Unit => 1.0,
            LeafLaw::Stationary(d) => d.samples()[rng.random_range(0..d.len())],
        }
    }
}

/// A depth-`n` cascade: `y[l][j]` is the IO-distance inside copy `(l, j)`
/// measured in the root metric, `prefix[l][j]` the product of `lambda xi`
/// over its strict ancestors and `factors[l][j]` its own factor.
#[derive(Clone, Debug)]
pub struct CascadeTree {
    pub branching: usize,
    pub lambda: f64,
    pub y: Vec<Vec<f64>>,
    pub prefix: Vec<Vec<f64>>,
    pub factors: Vec<Vec<f64>>,
}

impl CascadeTree {
    pub fn depth(&self) -> usize {
        self.y.len() - 1
    }

    /// `D'_l`: the largest copy IO-distance at each level.
    pub fn level_maxima(&self) -> Vec<f64> {
        self.y
            .iter()
            .map(|lvl| lvl.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// Intrinsic distance of copy `(l, j)`.
    pub fn intrinsic(&self, l: usize, j: usize) -> f64 {
        self.y[l][j] / self.prefix[l][j]
    }
}

fn check_cascade(pf: &PathFunctional, m: &FactorLaw, lambda: f64, depth: usize, limit: u128) -> Result<()> {
    m.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    let nodes = tree_node_count(pf.edge_count(), depth);
    if nodes > limit {
        return Err(Error::Guard {
            what: "cascade nodes",
            value: nodes,
            limit,
        });
    }
    Ok(())
}

/// Node `(l, j)` takes its randomness from `key.with_generation(l).with_index(j)`:
/// internal nodes draw a factor, leaves draw an intrinsic distance.
pub fn cascade_io_distances(
    pf: &PathFunctional,
    m: &FactorLaw,
    lambda: f64,
    depth: usize,
    leaf: &LeafLaw,
    key: StreamKey,
) -> Result<CascadeTree> {
    check_cascade(pf, m, lambda, depth, MAX_STORED_CASCADE_NODES)?;
    let b = pf.edge_count();
    let node_rng = |l: usize, j: usize| key.with_generation(l as u64).with_index(j as u64).rng();
    let factors: Vec<Vec<f64>> = (0..depth)
        .map(|l| (0..b.pow(l as u32)).map(|j| m.sample(&mut node_rng(l, j))).collect())
        .collect();
    let mut prefix = vec![vec![1.0]];
    for l in 0..depth {
        let next = (0..b.pow(l as u32 + 1))
            .map(|c| prefix[l][c / b] * (lambda * factors[l][c / b]))
            .collect();
        prefix.push(next);
    }
    let leaves: Vec<f64> = (0..b.pow(depth as u32))
        .map(|j| leaf.draw(&mut node_rng(depth, j)) * prefix[depth][j])
        .collect();
    let mut y = vec![leaves];
    for _ in 0..depth {
        let up = y.last().expect("nonempty").chunks_exact(b).map(|c| pf.eval(c)).collect();
        y.push(up);
    }
    y.reverse();
    Ok(CascadeTree {
        branching: b,
        lambda,
        y,
        prefix,
        factors,
    })
}

/// Same numbers as [`cascade_io_distances`], keeping only the level maxima
/// (memory linear in the depth).
pub fn cascade_level_maxima(
    pf: &PathFunctional,
    m: &FactorLaw,
    lambda: f64,
    depth: usize,
    leaf: &LeafLaw,
    key: StreamKey,
) -> Result<Vec<f64>> {
    check_cascade(pf, m, lambda, depth, MAX_CASCADE_NODES)?;
    struct Walk<'a> {
        pf: &'a PathFunctional,
        m: &'a FactorLaw,
        lambda: f64,
        depth: usize,
        leaf: &'a LeafLaw,
        key: StreamKey,
        maxima: Vec<f64>,
    }
    impl Walk<'_> {
        fn visit(&mut self, l: usize, j: usize, prefix: f64) -> f64 {
            let mut rng = self.key.with_generation(l as u64).with_index(j as u64).rng();
            let y = if l == self.depth {
                self.leaf.draw(&mut rng) * prefix
            } else {
                let b = self.pf.edge_count();
                let child_prefix = prefix * (self.lambda * self.m.sample(&mut rng));
                let mut children = [0.0f64; crate::brickgraph::MAX_EDGES];
                for (i, c) in children[..b].iter_mut().enumerate() {
                    *c = self.visit(l + 1, j * b + i, child_prefix);
                }
                self.pf.eval(&children[..b])
            };
            self.maxima[l] = self.maxima[l].max(y);
            y
        }
    }
    let mut walk = Walk {
        pf,
        m,
        lambda,
        depth,
        leaf,
        key,
        maxima: vec![0.0; depth + 1],
    };
    walk.visit(0, 0, 1.0);
    Ok(walk.maxima)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeCheck {
    /// Internal nodes where `Y_t` differs from the functional of its children.
    pub combination_mismatches: usize,
    /// Largest relative deviation of `X_t` from `lambda xi_t rho(X_children)`.
    pub intrinsic_rel_error: f64,
}

/// Re-evaluates both recursions on a stored cascade.
pub fn verify_cascade(pf: &PathFunctional, tree: &CascadeTree) -> CascadeCheck {
    let b = tree.branching;
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    let mut xs = vec![0.0; b];
    for l in 0..tree.depth() {
        for (j, &yt) in tree.y[l].iter().enumerate() {
            let children = &tree.y[l + 1][j * b..(j + 1) * b];
            if pf.eval(children) != yt {
                mismatches += 1;
            }
            for (i, x) in xs.iter_mut().enumerate() {
                *x = tree.intrinsic(l + 1, j * b + i);
            }
            let direct = scaled_length(tree.lambda, tree.factors[l][j], pf.eval(&xs));
            let xt = tree.intrinsic(l, j);
            if xt > 0.0 && xt.is_finite() {
                worst = worst.max((direct - xt).abs() / xt);
            }
        }
    }
    CascadeCheck {
        combination_mismatches: mismatches,
        intrinsic_rel_error: worst,
    }
}

pub fn levels_csv(values: &[f64]) -> String {
    let mut out = String::from("level,value\n");
    for (l, v) in values.iter().enumerate() {
        out.push_str(&format!("{l},{}\n", fmt9(*v)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Subcritical,
    Supercritical,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub gamma_brw: f64,
    pub log_lambda_cr: f64,
    pub criterion: f64,
    /// Three joint standard errors of the criterion.
    pub uncertainty: f64,
    pub phase: Phase,
    pub hausdorff_bound: Option<f64>,
}

/// Phase from `gamma_brw + log lambda_cr` on a `b`-ary cascade.
pub fn phase_from_parts(gamma_brw: f64, gamma_stderr: f64, branching: usize, estimate: &DriftEstimate) -> PhaseReport {
    let criterion = gamma_brw + estimate.log_lambda_cr;
    let uncertainty = 3.0 * (gamma_stderr.powi(2) + estimate.stderr.powi(2)).sqrt();
    let phase = if criterion.abs() <= uncertainty {
        Phase::Indeterminate
    } else if criterion < 0.0 {
        Phase::Subcritical
    } else {
        Phase::Supercritical
    };
    let hausdorff_bound = (phase == Phase::Subcritical).then(|| (branching as f64).ln() / criterion.abs());
    PhaseReport {
        gamma_brw,
        log_lambda_cr: estimate.log_lambda_cr,
        criterion,
        uncertainty,
        phase,
        hausdorff_bound,
    }
}

/// Figure-eight with log-normal factors: `gamma_brw = sqrt(2 log 4) sigma`.
pub fn phase_classify(sigma: f64, estimate: &DriftEstimate) -> Result<PhaseReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be positive")));
    }
    Ok(phase_from_parts((2.0 * 4f64.ln()).sqrt() * sigma, 0.0, 4, estimate))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicTrace {
    pub depth: usize,
    /// `Z_0 .. Z_n`: intrinsic distance of the selected copy at each step.
    pub z: Vec<f64>,
    /// `r_1 .. r_n`: larger over smaller half-distance at each split.
    pub ratios: Vec<f64>,
    /// Each split as (parent, first half, second half) in block-root units.
    pub halves: Vec<(f64, f64, f64)>,
    /// `[log q25, log q75]` of the stationary sample.
    pub window: (f64, f64),
    pub window_visits: usize,
}

impl GeodesicTrace {
    pub fn in_window(&self, z: f64) -> bool {
        let lz = z.ln();
        lz >= self.window.0 && lz <= self.window.1
    }

    /// Visits of `log Z_k` to the window for `k = 1..=steps`.
    pub fn visits_upto(&self, steps: usize) -> usize {
        self.z[1..=steps.min(self.depth)].iter().filter(|&&z| self.in_window(z)).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,Z,ratio\n");
        for (k, z) in self.z.iter().enumerate() {
            let r = if k == 0 { String::new() } else { fmt9(self.ratios[k - 1]) };
            out.push_str(&format!("{k},{},{r}\n", fmt9(*z)));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicRun {
    pub traces: Vec<GeodesicTrace>,
    pub block_depth: usize,
    pub approximation: String,
}

pub const GEODESIC_BLOCK: usize = 8;
const REGENERATION_NOTE: &str = "each block of levels is redrawn below the selected copy with \
leaves from the stationary sample instead of the exact conditional law given that copy's distance";

/// One block: a fresh subtree below the current copy, walked top-down along
/// the larger half at each split.
fn geodesic_block(
    pairs: ([usize; 2], [usize; 2]),
    stationary: &EmpiricalDistribution,
    m: &FactorLaw,
    lambda: f64,
    depth: usize,
    key: StreamKey,
    trace: &mut GeodesicTrace,
) {
    let b = 4usize;
    let node_rng = |l: usize, j: usize| key.with_generation(l as u64).with_index(j as u64).rng();
    let leaf = LeafLaw::Stationary(stationary.clone());
    // prefix products level by level, then Y bottom-up
    let mut prefix = vec![vec![1.0]];
    for l in 0..depth {
        let f: Vec<f64> = (0..b.pow(l as u32)).map(|j| lambda * m.sample(&mut node_rng(l, j))).collect();
        let next = (0..b.pow(l as u32 + 1)).map(|c| prefix[l][c / b] * f[c / b]).collect();
        prefix.push(next);
    }
    let mut y: Vec<Vec<f64>> = vec![(0..b.pow(depth as u32))
        .map(|j| leaf.draw(&mut node_rng(depth, j)) * prefix[depth][j])
        .collect()];
    for _ in 0..depth {
        let up = y
            .last()
            .expect("nonempty")
            .chunks_exact(b)
            .map(|c| c[pairs.0[0]].min(c[pairs.0[1]]) + c[pairs.1[0]].min(c[pairs.1[1]]))
            .collect();
        y.push(up);
    }
    y.reverse();
    if trace.z.is_empty() {
        trace.z.push(y[0][0]);
    } else {
        // re-rooted copy: its distance now comes from the fresh subtree
        *trace.z.last_mut().expect("nonempty") = y[0][0];
    }
    let mut j = 0usize;
    for l in 0..depth {
        let c = &y[l + 1][j * b..(j + 1) * b];
        let pick = |p: [usize; 2]| if c[p[0]] <= c[p[1]] { p[0] } else { p[1] };
        let (s1, s2) = (pick(pairs.0), pick(pairs.1));
        let (h1, h2) = (c[s1], c[s2]);
        trace.halves.push((y[l][j], h1, h2));
        trace.ratios.push(h1.max(h2) / h1.min(h2));
        let sel = if h1 >= h2 { s1 } else { s2 };
        j = j * b + sel;
        trace.z.push(y[l + 1][j] / prefix[l + 1][j]);
    }
}

/// Top-down walk along the larger half of the IO-geodesic on the
/// figure-eight cascade, regenerated every [`GEODESIC_BLOCK`] levels.
pub fn geodesic_chain(
    pf: &PathFunctional,
    stationary: &StationaryLaw,
    m: &FactorLaw,
    lambda: f64,
    depth: usize,
    reps: usize,
    key: StreamKey,
) -> Result<GeodesicRun> {
    let pairs = pf
        .graph()
        .eight_pairs()
        .ok_or_else(|| Error::InvalidArgument("the geodesic chain needs the figure-eight brick".into()))?;
    m.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) || depth == 0 || reps == 0 {
        return Err(Error::InvalidArgument("need lambda > 0, depth >= 1, reps >= 1".into()));
    }
    let sample = &stationary.samples;
    let window = (sample.quantile(0.25).ln(), sample.quantile(0.75).ln());
    let key = key.with_stage(stage::GEODESIC);
    let traces = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rkey = key.subspace(r as u64);
            let mut trace = GeodesicTrace {
                depth,
                z: Vec::with_capacity(depth + 1),
                ratios: Vec::with_capacity(depth),
                halves: Vec::with_capacity(depth),
                window,
                window_visits: 0,
            };
            let mut done = 0;
            let mut block = 0u64;
            while done < depth {
                let d = GEODESIC_BLOCK.min(depth - done);
                let bkey = rkey.subspace(block);
                geodesic_block(pairs, sample, m, lambda, d, bkey, &mut trace);
                done += d;
                block += 1;
            }
            trace.window_visits = trace.visits_upto(depth);
            trace
        })
        .collect();
    Ok(GeodesicRun {
        traces,
        block_depth: GEODESIC_BLOCK,
        approximation: REGENERATION_NOTE.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercolationToy {
    pub q_inf: f64,
    pub p_star: f64,
    pub x_star: f64,
    /// Largest root of `p theta(x) = x` on `[x_star, 1]`, if any.
    pub root: Option<f64>,
    pub iterations: u64,
    pub converged: bool,
}

const TOY_MAX_ITER: u64 = 100_000_000;

/// Percolation with replacement on the figure-eight: `q_{n+1} = p theta(q_n)`
/// from `q_0 = 1`.
pub fn percolation_replacement(p: f64, tol: f64) -> Result<PercolationToy> {
    if !(0.0..=1.0).contains(&p) || !(tol > 0.0) {
        return Err(Error::InvalidArgument("need p in [0, 1] and tol > 0".into()));
    }
    let eight = enumerate_simple_paths(&BrickGraph::preset("eight")?)?;
    let theta = ThetaPolynomial::new(&eight);
    let (p_star, x_star) = (27.0 / 32.0, 2.0 / 3.0);

    let mut q = 1.0f64;
    let mut prev_step = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < TOY_MAX_ITER {
        let next = p * theta.eval(q);
        iterations += 1;
        let step = (q - next).abs();
        q = next;
        if q < tol {
            q = 0.0;
            converged = true;
            break;
        }
        // geometric tail estimate of the remaining distance
        let rate = step / prev_step;
        let remaining = if rate < 1.0 { step * rate / (1.0 - rate) } else { f64::INFINITY };
        if step == 0.0 || remaining < tol / 10.0 {
            converged = true;
            break;
        }
        prev_step = step;
    }

    let g = |x: f64| p * theta.eval(x) / x - 1.0;
    let root = if p < p_star {
        None
    } else if g(x_star) <= 0.0 {
        // tangency at p_star (up to rounding)
        Some(x_star)
    } else {
        let (mut lo, mut hi) = (x_star, 1.0);
        while hi - lo > tol.min(1e-12) {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    Ok(PercolationToy {
        q_inf: q,
        p_star,
        x_star,
        root,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(name: &str) -> PathFunctional {
        enumerate_simple_paths(&BrickGraph::preset(name).unwrap()).unwrap()
    }

    #[test]
    fn brw_dirac_is_exact() {
        let c: f64 = 1.7;
        let e = brw_max_drift(&FactorLaw::dirac(c), 3, 12, (2, 12), 2, Some(50), StreamKey::new(1)).unwrap();
        for (n, m) in e.mean_maxima.iter().enumerate() {
            assert!((m - n as f64 * c.ln()).abs() < 1e-12);
        }
        assert!((e.gamma - c.ln()).abs() < 1e-12);
        assert!(brw_max_drift(&FactorLaw::dirac(1.0), 4, 20, (1, 20), 1, None, StreamKey::new(1)).is_err());
    }

    #[test]
    fn cascade_deterministic_halving() {
        let t = cascade_io_distances(&pf("eight"), &FactorLaw::dirac(1.0), 0.5, 5, &LeafLaw::Unit, StreamKey::new(1))
            .unwrap();
        for l in 0..=5 {
            assert!(t.y[l].iter().all(|&y| y == 2f64.powi(-(l as i32))));
        }
        assert_eq!(t.y[0][0], 1.0);
    }

    #[test]
    fn cascade_recursions_hold() {
        let eight = pf("eight");
        for seed in 0..50 {
            let t = cascade_io_distances(&eight, &FactorLaw::lognormal(0.8), 0.6, 4, &LeafLaw::Unit, StreamKey::new(seed))
                .unwrap();
            let check = verify_cascade(&eight, &t);
            assert_eq!(check.combination_mismatches, 0);
            assert!(check.intrinsic_rel_error < 1e-12);
        }
    }

    #[test]
    fn streaming_maxima_match_stored_tree() {
        let d = pf("diamond");
        let leaf = LeafLaw::Stationary(EmpiricalDistribution::new(vec![0.5, 1.0, 2.0]).unwrap());
        let key = StreamKey::new(3);
        let t = cascade_io_distances(&d, &FactorLaw::lognormal(0.4), 0.55, 6, &leaf, key).unwrap();
        let streamed = cascade_level_maxima(&d, &FactorLaw::lognormal(0.4), 0.55, 6, &leaf, key).unwrap();
        assert_eq!(t.level_maxima(), streamed);
        assert!(levels_csv(&streamed).starts_with("level,value\n0,"));
    }

    fn estimate(log_lambda_cr: f64, stderr: f64) -> DriftEstimate {
        DriftEstimate {
            log_lambda_cr,
            stderr,
            generations: 1,
            sample_size: 1,
            warmup: 0,
            repetitions: 1,
        }
    }

    #[test]
    fn phase_labels() {
        let g = (2.0 * 4f64.ln()).sqrt();
        let r = phase_classify(0.1, &estimate(-0.6, 0.001)).unwrap();
        assert_eq!(r.phase, Phase::Subcritical);
        let expect = 4f64.ln() / (0.6 - 0.1 * g);
        assert!((r.hausdorff_bound.unwrap() - expect).abs() < 1e-12);
        let r = phase_classify(0.6, &estimate(-0.5, 0.001)).unwrap();
        assert_eq!(r.phase, Phase::Supercritical);
        assert_eq!(r.hausdorff_bound, None);
        let r = phase_classify(0.5, &estimate(-0.5 * g, 0.0)).unwrap();
        assert_eq!(r.criterion, 0.0);
        assert_eq!(r.phase, Phase::Indeterminate);
    }

    #[test]
    fn geodesic_symmetric_case() {
        let stat = StationaryLaw {
            samples: EmpiricalDistribution::dirac(1.0, 10).unwrap(),
            log_lambda_cr: -(2f64.ln()),
            residual_drift: 0.0,
        };
        let run = geodesic_chain(&pf("eight"), &stat, &FactorLaw::dirac(1.0), 0.5, 20, 2, StreamKey::new(1)).unwrap();
        for t in &run.traces {
            assert_eq!(t.z.len(), 21);
            assert!(t.ratios.iter().all(|&r| r == 1.0));
            assert!(t.halves.iter().all(|&(p, a, b)| p == a + b));
            assert!(t.to_csv().starts_with("step,Z,ratio\n0,1,\n1,1,1\n"));
        }
        assert!(geodesic_chain(&pf("diamond"), &stat, &FactorLaw::dirac(1.0), 0.5, 5, 1, StreamKey::new(1)).is_err());
    }

    #[test]
    fn geodesic_conserves_length() {
        let samples = EmpiricalDistribution::new((1..200).map(|i| i as f64 / 50.0).collect()).unwrap();
        let stat = StationaryLaw {
            samples,
            log_lambda_cr: -0.5,
            residual_drift: 0.0,
        };
        let run = geodesic_chain(&pf("eight"), &stat, &FactorLaw::lognormal(0.6), 0.6, 30, 5, StreamKey::new(2)).unwrap();
        for t in &run.traces {
            assert_eq!(t.ratios.len(), 30);
            assert!(t.ratios.iter().all(|&r| r >= 1.0));
            assert!(t.z.iter().all(|&z| z > 0.0));
            assert!(t.halves.iter().all(|&(p, a, b)| p == a + b));
        }
        assert!(!run.approximation.is_empty());
    }

    #[test]
    fn percolation_toy_values() {
        let at = percolation_replacement(27.0 / 32.0, 1e-6).unwrap();
        assert!((at.q_inf - 2.0 / 3.0).abs() < 1e-4);
        assert!((at.root.unwrap() - 2.0 / 3.0).abs() < 1e-6);
        assert_eq!(percolation_replacement(0.8, 1e-9).unwrap().q_inf, 0.0);
        let hi = percolation_replacement(0.9, 1e-10).unwrap();
        assert!((hi.q_inf - 0.8696979).abs() < 1e-6);
        assert!((hi.q_inf - hi.root.unwrap()).abs() < 1e-9);
        assert!(percolation_replacement(1.5, 1e-6).is_err());
    }
}
