//! Renormalization kernels: one resampled generation of the glueing
//! operator, its cut-off variants, rescaling, and the cut-off tree recursion.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brickgraph::PathFunctional;
use crate::dist::{scaled_length, EmpiricalDistribution, FactorLaw};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

pub use crate::dist::Cutoff;

pub const DEFAULT_N: usize = 50_000;
pub const MAX_TREE_NODES: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// The min-plus functional of the brick.
    #[default]
    Sum,
    /// Figure-eight only: `max(min(X1, X2), min(X3, X4))`.
    Max,
}

#[derive(Clone, Debug)]
pub struct GlueConfig {
    pub pf: PathFunctional,
    pub m: FactorLaw,
    pub lambda: f64,
    pub cutoff: Option<Cutoff>,
    pub variant: Variant,
    pub n_out: usize,
    pub key: StreamKey,
}

impl GlueConfig {
    pub fn new(pf: PathFunctional, m: FactorLaw, lambda: f64, n_out: usize, key: StreamKey) -> Self {
        GlueConfig {
            pf,
            m,
            lambda,
            cutoff: None,
            variant: Variant::Sum,
            n_out,
            key,
        }
    }

    pub fn with_cutoff(self, cutoff: Option<Cutoff>) -> Self {
        GlueConfig { cutoff, ..self }
    }

    pub fn with_variant(self, variant: Variant) -> Self {
        GlueConfig { variant, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        GlueConfig { lambda, ..self }
    }

    pub fn with_key(self, key: StreamKey) -> Self {
        GlueConfig { key, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_out == 0 {
            return Err(Error::InvalidArgument("n_out must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda = {} must be positive", self.lambda)));
        }
        self.m.validate()?;
        if let Some(c) = self.cutoff {
            c.validate()?;
        }
        if self.variant == Variant::Max && self.pf.graph().eight_pairs().is_none() {
            return Err(Error::InvalidArgument("the max variant needs the figure-eight brick".into()));
        }
        Ok(())
    }

    fn kernel(&self) -> Kernel<'_> {
        match self.variant {
            Variant::Sum => Kernel::Rho(&self.pf),
            Variant::Max => {
                let (a, b) = self.pf.graph().eight_pairs().expect("validated figure-eight");
                Kernel::Max(a, b)
            }
        }
    }
}

enum Kernel<'a> {
    Rho(&'a PathFunctional),
    Max([usize; 2], [usize; 2]),
}

impl Kernel<'_> {
    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Kernel::Rho(pf) => pf.eval(x),
            Kernel::Max(a, b) => x[a[0]].min(x[a[1]]).max(x[b[0]].min(x[b[1]])),
        }
    }
}

/// Draws of one generation, in output-index order (unsorted).
pub fn glue_samples(input: &[f64], cfg: &GlueConfig) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(Error::InvalidDistribution("empty input".into()));
    }
    cfg.validate()?;
    let kernel = cfg.kernel();
    let e = cfg.pf.edge_count();
    let n_in = input.len();
    let out = (0..cfg.n_out as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; e],
            |lengths, i| {
                let mut rng = cfg.key.with_index(i).rng();
                for slot in lengths.iter_mut() {
                    *slot = input[rng.random_range(0..n_in)];
                }
                let xi = cfg.m.sample(&mut rng);
                let y = scaled_length(cfg.lambda, xi, kernel.eval(lengths));
                match cfg.cutoff {
                    Some(c) => c.apply(y),
                    None => y,
                }
            },
        )
        .collect();
    Ok(out)
}

/// One Monte Carlo generation: each output resamples `#E` inputs uniformly
/// with replacement and draws its own factor.
pub fn glue_step(input: &EmpiricalDistribution, cfg: &GlueConfig) -> Result<EmpiricalDistribution> {
    Ok(EmpiricalDistribution::from_valid(glue_samples(input.samples(), cfg)?))
}

pub fn rescale(input: &EmpiricalDistribution, c: f64) -> Result<EmpiricalDistribution> {
    input.rescale(c)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Start {
    DiracInf,
    DiracZero,
    Custom(EmpiricalDistribution),
}

impl Start {
    fn materialize(&self, n: usize) -> EmpiricalDistribution {
        match self {
            Start::DiracInf => EmpiricalDistribution::from_valid(vec![f64::INFINITY; n]),
            Start::DiracZero => EmpiricalDistribution::from_valid(vec![0.0; n]),
            Start::Custom(d) => d.clone(),
        }
    }
}

fn check_pairing(cfg: &GlueConfig, start: &Start) -> Result<()> {
    match (cfg.cutoff, start) {
        (None, _) => Err(Error::InvalidArgument("cut-off iteration needs a cutoff".into())),
        (Some(Cutoff::Lower(_)), Start::DiracInf) => Err(Error::InvalidArgument(
            "the Dirac-infinity start pairs with an upper cutoff".into(),
        )),
        (Some(Cutoff::Upper(_)), Start::DiracZero) => Err(Error::InvalidArgument(
            "the Dirac-zero start pairs with a lower cutoff".into(),
        )),
        _ => Ok(()),
    }
}

/// Runs the cut-off orbit and hands each generation (starting with the
/// initial law at index 0) to `visit`. Generation `g >= 1` uses
/// `cfg.key.with_generation(g)`.
pub fn visit_orbit(
    cfg: &GlueConfig,
    start: &Start,
    generations: usize,
    mut visit: impl FnMut(usize, &EmpiricalDistribution),
) -> Result<EmpiricalDistribution> {
    cfg.validate()?;
    check_pairing(cfg, start)?;
    let mut current = start.materialize(cfg.n_out);
    visit(0, &current);
    for g in 1..=generations {
        let step = cfg.clone().with_key(cfg.key.with_generation(g as u64));
        current = glue_step(&current, &step)?;
        visit(g, &current);
    }
    Ok(current)
}

/// The orbit `mu_0, .., mu_generations` of the cut-off operator.
pub fn iterate_cutoff(
    cfg: &GlueConfig,
    start: &Start,
    generations: usize,
) -> Result<Vec<EmpiricalDistribution>> {
    let mut orbit = Vec::with_capacity(generations + 1);
    visit_orbit(cfg, start, generations, |_, d| orbit.push(d.clone()))?;
    Ok(orbit)
}

/// Complete `b`-ary tree of factors, stored level by level.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTree {
    branching: usize,
    levels: Vec<Vec<f64>>,
}

impl FactorTree {
    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &[f64] {
        &self.levels[l]
    }

    /// Factor of node `index` (children of `j` are `j*b .. j*b + b`).
    pub fn get(&self, level: usize, index: usize) -> f64 {
        self.levels[level][index]
    }
}

pub fn tree_node_count(b: usize, depth: usize) -> u128 {
    (0..=depth as u32).map(|l| (b as u128).saturating_pow(l)).sum()
}

/// Node `(level, j)` draws from `key.with_generation(level).with_index(j)`.
pub fn sample_factor_tree(b: usize, depth: usize, m: &FactorLaw, key: StreamKey) -> Result<FactorTree> {
    if b < 1 {
        return Err(Error::InvalidArgument("branching must be at least 1".into()));
    }
    m.validate()?;
    let nodes = tree_node_count(b, depth);
    if nodes > MAX_TREE_NODES {
        return Err(Error::Guard {
            what: "tree nodes",
            value: nodes,
            limit: MAX_TREE_NODES,
        });
    }
    let levels = (0..=depth)
        .map(|l| {
            let width = b.pow(l as u32) as u64;
            let k = key.with_generation(l as u64);
            (0..width)
                .into_par_iter()
                .map(|j| m.sample(&mut k.with_index(j).rng()))
                .collect()
        })
        .collect();
    Ok(FactorTree { branching: b, levels })
}

/// Cut-off distance at the root: nodes at depth `>= horizon` are infinite,
/// shallower nodes combine their children by `min(lambda xi rho, A)`.
pub fn cutoff_tree_distance(
    pf: &PathFunctional,
    tree: &FactorTree,
    a: f64,
    lambda: f64,
    horizon: usize,
) -> Result<f64> {
    let b = pf.edge_count();
    if tree.branching != b {
        return Err(Error::InvalidArgument(format!(
            "tree branching {} differs from edge count {b}",
            tree.branching
        )));
    }
    if horizon > tree.depth() + 1 {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} exceeds tree depth {}",
            tree.depth()
        )));
    }
    let cut = Cutoff::Upper(a);
    cut.validate()?;
    if horizon == 0 {
        return Ok(f64::INFINITY);
    }
    let mut below = vec![f64::INFINITY; b.pow(horizon as u32)];
    for l in (0..horizon).rev() {
        below = below
            .chunks_exact(b)
            .zip(tree.level(l))
            .map(|(children, &xi)| cut.apply(scaled_length(lambda, xi, pf.eval(children))))
            .collect();
    }
    Ok(below[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brickgraph::{enumerate_simple_paths, BrickGraph};
    use crate::dist::{ks_distance, sample_factors};

    fn pf(name: &str) -> PathFunctional {
        enumerate_simple_paths(&BrickGraph::preset(name).unwrap()).unwrap()
    }

    fn cfg(name: &str, m: FactorLaw, lambda: f64, n: usize, seed: u64) -> GlueConfig {
        GlueConfig::new(pf(name), m, lambda, n, StreamKey::new(seed))
    }

    #[test]
    fn constant_input_doubles() {
        let input = EmpiricalDistribution::dirac(1.0, 100).unwrap();
        let out = glue_step(&input, &cfg("eight", FactorLaw::dirac(1.0), 1.0, 100, 1)).unwrap();
        assert!(out.samples().iter().all(|&x| x == 2.0));
    }

    #[test]
    fn max_variant_only_on_figure_eight() {
        let c = cfg("diamond", FactorLaw::dirac(1.0), 1.0, 10, 1).with_variant(Variant::Max);
        assert!(c.validate().is_err());
        let input = EmpiricalDistribution::new(vec![1.0, 3.0]).unwrap();
        let c = cfg("eight", FactorLaw::dirac(1.0), 1.0, 1000, 1).with_variant(Variant::Max);
        let out = glue_step(&input, &c).unwrap();
        assert!(out.samples().iter().all(|&x| x == 1.0 || x == 3.0));
    }

    #[test]
    fn exponential_is_stationary_with_uniform_factors() {
        let n = 100_000;
        let key = StreamKey::new(5);
        let law = FactorLaw::Exponential { rate: 0.5 };
        let input = EmpiricalDistribution::new(sample_factors(&law, n, key.with_stage(10))).unwrap();
        let c = cfg("eight", FactorLaw::ScaledUniform { scale: 2.0 }, 1.0, n, 6);
        let out = glue_step(&input, &c).unwrap();
        let fresh = EmpiricalDistribution::new(sample_factors(&law, n, key.with_stage(11))).unwrap();
        assert!(ks_distance(&out, &fresh) <= 0.01);
    }

    #[test]
    fn cutoff_bounds_respected() {
        let input = EmpiricalDistribution::new(sample_factors(&FactorLaw::lognormal(1.0), 1000, StreamKey::new(1)))
            .unwrap();
        let up = cfg("eight", FactorLaw::lognormal(1.0), 1.0, 1000, 2).with_cutoff(Some(Cutoff::Upper(1.5)));
        assert!(glue_step(&input, &up).unwrap().samples().iter().all(|&x| x <= 1.5));
        let low = up.with_cutoff(Some(Cutoff::Lower(0.7)));
        assert!(glue_step(&input, &low).unwrap().samples().iter().all(|&x| x >= 0.7));
    }

    #[test]
    fn rescale_examples() {
        let d = EmpiricalDistribution::new(vec![0.0, 1.0, 2.5, f64::INFINITY]).unwrap();
        assert_eq!(rescale(&d, 1.0).unwrap(), d);
        let r = rescale(&d, 3.0).unwrap();
        assert_eq!(r.samples(), &[0.0, 3.0, 7.5, f64::INFINITY]);
        for a in [0.25, 0.5, 0.75, 1.0] {
            assert_eq!(r.quantile(a), 3.0 * d.quantile(a));
        }
        assert!(rescale(&d, 0.0).is_err());
    }

    #[test]
    fn orbit_from_infinity() {
        let c = cfg("eight", FactorLaw::lognormal(0.3), 1.0, 500, 3).with_cutoff(Some(Cutoff::Upper(2.0)));
        let orbit = iterate_cutoff(&c, &Start::DiracInf, 5).unwrap();
        assert_eq!(orbit.len(), 6);
        assert!(orbit[0].samples().iter().all(|x| x.is_infinite()));
        assert!(orbit[1].samples().iter().all(|&x| x == 2.0));
        assert!(iterate_cutoff(&c, &Start::DiracZero, 1).is_err());
        let low = c.clone().with_cutoff(Some(Cutoff::Lower(1.0)));
        assert!(iterate_cutoff(&low, &Start::DiracInf, 1).is_err());
        assert!(iterate_cutoff(&c.with_cutoff(None), &Start::DiracInf, 1).is_err());
    }

    #[test]
    fn factor_trees() {
        let t = sample_factor_tree(4, 3, &FactorLaw::dirac(2.0), StreamKey::new(1)).unwrap();
        assert!((0..=3).all(|l| t.level(l).iter().all(|&x| x == 2.0)));
        assert_eq!(t.level(3).len(), 64);
        let root = sample_factor_tree(4, 0, &FactorLaw::lognormal(1.0), StreamKey::new(1)).unwrap();
        assert_eq!(root.depth(), 0);
        assert_eq!(root.level(0).len(), 1);
        assert!(sample_factor_tree(4, 14, &FactorLaw::dirac(1.0), StreamKey::new(1)).is_err());
    }

    #[test]
    fn log_path_variance_grows_linearly() {
        let (sigma, depth, trees) = (0.5, 6, 10_000);
        let law = FactorLaw::lognormal(sigma);
        let sums: Vec<f64> = (0..trees)
            .map(|i| {
                let t = sample_factor_tree(2, depth, &law, StreamKey::new(9).with_index(0).subspace(i)).unwrap();
                // leftmost root-leaf path
                (1..=depth).map(|l| t.get(l, 0).ln()).sum()
            })
            .collect();
        let mean = sums.iter().sum::<f64>() / trees as f64;
        let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trees - 1) as f64;
        let expect = depth as f64 * sigma * sigma;
        assert!((var / expect - 1.0).abs() < 0.05, "variance {var} vs {expect}");
    }

    #[test]
    fn tree_distance_horizons() {
        let eight = pf("eight");
        let t = sample_factor_tree(4, 5, &FactorLaw::dirac(1.0), StreamKey::new(2)).unwrap();
        assert_eq!(cutoff_tree_distance(&eight, &t, 7.0, 1.0, 0).unwrap(), f64::INFINITY);
        assert_eq!(cutoff_tree_distance(&eight, &t, 7.0, 1.0, 1).unwrap(), 7.0);
        // only the bound enters at the deepest finite level
        for n in 1..=5 {
            assert_eq!(cutoff_tree_distance(&eight, &t, 1e6, 1.0, n).unwrap(), 1e6);
            let quarter = cutoff_tree_distance(&eight, &t, 1.0, 0.25, n).unwrap();
            assert_eq!(quarter, 2f64.powi(1 - n as i32));
        }
        let half = cutoff_tree_distance(&eight, &t, 1.0, 0.5, 5).unwrap();
        assert_eq!(half, 1.0);
        assert!(cutoff_tree_distance(&pf("interval2"), &t, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn tree_distance_law_matches_orbit() {
        let eight = pf("eight");
        let law = FactorLaw::lognormal(0.5);
        let (a, lambda, n, reps) = (1.0, 0.5, 4usize, 4000u64);
        let roots: Vec<f64> = (0..reps)
            .map(|r| {
                let t = sample_factor_tree(4, n, &law, StreamKey::new(4).subspace(r)).unwrap();
                cutoff_tree_distance(&eight, &t, a, lambda, n).unwrap()
            })
            .collect();
        let tree_law = EmpiricalDistribution::new(roots).unwrap();
        let c = GlueConfig::new(eight, law, lambda, 20_000, StreamKey::new(8)).with_cutoff(Some(Cutoff::Upper(a)));
        let orbit = iterate_cutoff(&c, &Start::DiracInf, n).unwrap();
        let band = crate::dist::dkw_two_sample(4000, 20_000, 1e-6);
        assert!(ks_distance(&tree_law, &orbit[n]) < band);
    }
}
