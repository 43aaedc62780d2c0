//! Critical-parameter search and stationary laws.
//!
//! Under `lambda = 1` the glued distances grow (or shrink) geometrically at
//! rate `1 / lambda_cr`. The estimators here track the log of a pinned
//! quantile while renormalizing every generation, so the orbit never
//! overflows and its shape converges to the stationary law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brickgraph::PathFunctional;
use crate::dist::{ks_distance, Cutoff, EmpiricalDistribution, FactorLaw};
use crate::error::{Error, Result};
use crate::io::fmt9;
use crate::renorm::{glue_step, visit_orbit, GlueConfig, Start, Variant};
use crate::rng::{stage, StreamKey};
use crate::stats::{linear_fit, mean, std_error};

pub const COLLAPSE_EPS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub log_lambda_cr: f64,
    pub stderr: f64,
    pub generations: usize,
    pub sample_size: usize,
    pub warmup: usize,
    pub repetitions: usize,
}

impl DriftEstimate {
    pub fn lambda_cr(&self) -> f64 {
        self.log_lambda_cr.exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSettings {
    pub n: usize,
    pub k: usize,
    pub warmup: usize,
    pub reps: usize,
    /// Pinned quantile level.
    pub alpha: f64,
    pub variant: Variant,
}

impl Default for DriftSettings {
    fn default() -> Self {
        DriftSettings {
            n: 50_000,
            k: 50,
            warmup: 20,
            reps: 8,
            alpha: 0.5,
            variant: Variant::Sum,
        }
    }
}

impl DriftSettings {
    pub fn new(n: usize, k: usize, warmup: usize, reps: usize) -> Self {
        DriftSettings {
            n,
            k,
            warmup,
            reps,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.reps == 0 {
            return Err(Error::InvalidArgument("N, k and reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

/// A renormalized orbit under `lambda = 1`.
#[derive(Clone, Debug)]
pub struct NormalizedOrbit {
    /// Last generation divided by its pinned quantile.
    pub last: EmpiricalDistribution,
    /// `log_scales[g]`: log of the pinned quantile of generation `g` before
    /// normalization, relative to generation `g - 1` after normalization;
    /// index 0 is the start.
    pub log_scales: Vec<f64>,
}

impl NormalizedOrbit {
    /// Log of the unnormalized quantile at each generation.
    pub fn accumulated(&self) -> Vec<f64> {
        self.log_scales
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }
}

fn normalize(d: &EmpiricalDistribution, alpha: f64) -> Result<(EmpiricalDistribution, f64)> {
    let q = d.quantile(alpha);
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Degenerate(format!("pinned quantile reached {q}")));
    }
    Ok((d.rescale(1.0 / q)?, q.ln()))
}

/// Iterates the `lambda = 1` dynamics from `start`, dividing each generation
/// by its `alpha`-quantile. `visit` sees each normalized generation.
pub fn normalized_orbit(
    cfg: &GlueConfig,
    start: &EmpiricalDistribution,
    generations: usize,
    alpha: f64,
    mut visit: impl FnMut(usize, &EmpiricalDistribution),
) -> Result<NormalizedOrbit> {
    let (mut current, s0) = normalize(start, alpha)?;
    let mut log_scales = Vec::with_capacity(generations + 1);
    log_scales.push(s0);
    visit(0, &current);
    for g in 1..=generations {
        let step = cfg.clone().with_lambda(1.0).with_key(cfg.key.with_generation(g as u64));
        let raw = glue_step(&current, &step)?;
        let (next, s) = normalize(&raw, alpha)?;
        log_scales.push(s);
        current = next;
        visit(g, &current);
    }
    Ok(NormalizedOrbit {
        last: current,
        log_scales,
    })
}

#[derive(Clone, Debug)]
pub struct DriftRun {
    pub estimate: DriftEstimate,
    /// Per-repetition final normalized samples, for warm starts.
    pub finals: Vec<EmpiricalDistribution>,
    pub slopes: Vec<f64>,
}

/// Drift estimator with explicit settings and optional per-repetition starts
/// (default: `Dirac(1)`). Repetition `r` uses `key.subspace(r)`.
pub fn drift_run(
    pf: &PathFunctional,
    m: &FactorLaw,
    settings: &DriftSettings,
    starts: Option<&[EmpiricalDistribution]>,
    key: StreamKey,
) -> Result<DriftRun> {
    settings.validate()?;
    if let Some(s) = starts {
        if s.len() != settings.reps {
            return Err(Error::InvalidArgument("one start per repetition required".into()));
        }
    }
    let unit = EmpiricalDistribution::dirac(1.0, settings.n)?;
    let runs: Vec<(f64, EmpiricalDistribution)> = (0..settings.reps)
        .into_par_iter()
        .map(|r| {
            let cfg = GlueConfig::new(pf.clone(), m.clone(), 1.0, settings.n, key.subspace(r as u64))
                .with_variant(settings.variant);
            let start = starts.map_or(&unit, |s| &s[r]);
            let orbit = normalized_orbit(&cfg, start, settings.warmup + settings.k, settings.alpha, |_, _| {})?;
            let acc = orbit.accumulated();
            let window = settings.warmup..=settings.warmup + settings.k;
            let xs: Vec<f64> = window.clone().map(|g| g as f64).collect();
            let fit = linear_fit(&xs, &acc[window]);
            Ok((fit.slope, orbit.last))
        })
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let estimate = DriftEstimate {
        log_lambda_cr: -mean(&slopes),
        stderr: std_error(&slopes),
        generations: settings.k,
        sample_size: settings.n,
        warmup: settings.warmup,
        repetitions: settings.reps,
    };
    Ok(DriftRun {
        estimate,
        finals: runs.into_iter().map(|r| r.1).collect(),
        slopes,
    })
}

/// `log lambda_cr` as minus the fitted drift of the log median under
/// `lambda = 1`, started from `Dirac(1)`.
pub fn estimate_drift(
    pf: &PathFunctional,
    m: &FactorLaw,
    n: usize,
    k: usize,
    warmup: usize,
    reps: usize,
    key: StreamKey,
) -> Result<DriftEstimate> {
    let settings = DriftSettings::new(n, k, warmup, reps);
    Ok(drift_run(pf, m, &settings, None, key.with_stage(stage::DRIFT))?.estimate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub log2lambda: f64,
    pub stderr: f64,
    pub overlay_interval: f64,
    pub overlay_brw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub overlays: Vec<String>,
}

pub const SWEEP_HEADER: &str = "sigma,log2lambda,stderr,overlay_interval,overlay_brw";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt9(r.sigma),
                fmt9(r.log2lambda),
                fmt9(r.stderr),
                fmt9(r.overlay_interval),
                fmt9(r.overlay_brw)
            ));
        }
        out
    }

    /// First sigma where the estimated curve crosses the BRW line, by linear
    /// interpolation between grid points.
    pub fn brw_crossing(&self) -> Option<f64> {
        let gap: Vec<f64> = self.rows.iter().map(|r| r.log2lambda - r.overlay_brw).collect();
        for i in 1..gap.len() {
            if gap[i - 1] == 0.0 {
                return Some(self.rows[i - 1].sigma);
            }
            if gap[i - 1].signum() != gap[i].signum() {
                let (s0, s1) = (self.rows[i - 1].sigma, self.rows[i].sigma);
                return Some(s0 + (s1 - s0) * gap[i - 1] / (gap[i - 1] - gap[i]));
            }
        }
        None
    }
}

/// The phase line `log 2 - sqrt(2 log b) sigma` in `log(2 lambda)` units.
pub fn brw_line(sigma: f64, branching: usize) -> f64 {
    2f64.ln() - (2.0 * (branching as f64).ln()).sqrt() * sigma
}

/// Log-normal sweep over `sigma_grid`, each point warm-started from the
/// previous point's final samples.
pub fn sweep_sigma_with(
    pf: &PathFunctional,
    sigma_grid: &[f64],
    settings: &DriftSettings,
    key: StreamKey,
) -> Result<SweepResult> {
    if sigma_grid.is_empty() {
        return Err(Error::InvalidArgument("empty sigma grid".into()));
    }
    if sigma_grid.windows(2).any(|w| !(w[0] < w[1])) || !(sigma_grid[0] > 0.0) {
        return Err(Error::InvalidArgument("sigma grid must be positive and strictly increasing".into()));
    }
    let b = pf.edge_count();
    let mut rows = Vec::with_capacity(sigma_grid.len());
    let mut warm: Option<Vec<EmpiricalDistribution>> = None;
    for (i, &sigma) in sigma_grid.iter().enumerate() {
        let run = drift_run(
            pf,
            &FactorLaw::lognormal(sigma),
            settings,
            warm.as_deref(),
            key.with_stage(stage::SWEEP).with_generation(i as u64),
        )?;
        rows.push(SweepRow {
            sigma,
            log2lambda: 2f64.ln() + run.estimate.log_lambda_cr,
            stderr: run.estimate.stderr,
            overlay_interval: -sigma * sigma / 2.0,
            overlay_brw: brw_line(sigma, b),
        });
        warm = Some(run.finals);
    }
    Ok(SweepResult {
        rows,
        overlays: vec!["interval_theory".into(), "brw_line".into()],
    })
}

pub fn sweep_sigma(
    pf: &PathFunctional,
    sigma_grid: &[f64],
    n: usize,
    k: usize,
    key: StreamKey,
) -> Result<SweepResult> {
    let settings = DriftSettings {
        n,
        k,
        ..Default::default()
    };
    sweep_sigma_with(pf, sigma_grid, &settings, key)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffMode {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    pub lambda_cr: f64,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

/// True when `lambda` behaves supercritically: no collapse under the upper
/// cut-off, or explosion under the lower one.
#[allow(clippy::too_many_arguments)]
pub fn is_supercritical(
    pf: &PathFunctional,
    m: &FactorLaw,
    mode: CutoffMode,
    bound: f64,
    lambda: f64,
    n: usize,
    generations: usize,
    key: StreamKey,
) -> Result<bool> {
    let (cutoff, start) = match mode {
        CutoffMode::Upper => (Cutoff::Upper(bound), Start::DiracInf),
        CutoffMode::Lower => (Cutoff::Lower(bound), Start::DiracZero),
    };
    let cfg = GlueConfig::new(pf.clone(), m.clone(), lambda, n, key).with_cutoff(Some(cutoff));
    // Orbits from Dirac(inf) under the upper cut-off decrease in law, and
    // orbits from Dirac(0) under the lower one increase, so crossing the
    // threshold early settles the classification.
    let crossed = |d: &EmpiricalDistribution| match mode {
        CutoffMode::Upper => d.median() < COLLAPSE_EPS * bound,
        CutoffMode::Lower => d.median() > bound / COLLAPSE_EPS,
    };
    let mut state = visit_orbit(&cfg, &start, 0, |_, _| {})?;
    for generation in 1..=generations {
        let step = cfg.clone().with_key(cfg.key.with_generation(generation as u64));
        state = glue_step(&state, &step)?;
        if crossed(&state) {
            break;
        }
    }
    Ok(match mode {
        CutoffMode::Upper => !crossed(&state),
        CutoffMode::Lower => crossed(&state),
    })
}

/// Bisection on `lambda` between a subcritical `lambda_lo` and a
/// supercritical `lambda_hi`, down to width `tol`.
///
/// Below criticality the cut-off orbit decays only at rate
/// `log lambda_cr - log lambda` per generation, so a horizon of `generations`
/// resolves `log lambda` to about `ln(1 / COLLAPSE_EPS) / generations`, and
/// the result errs on the low side by at most that much.
#[allow(clippy::too_many_arguments)]
pub fn bisect_lambda_cr(
    pf: &PathFunctional,
    m: &FactorLaw,
    mode: CutoffMode,
    bound: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    n: usize,
    generations: usize,
    tol: f64,
    key: StreamKey,
) -> Result<BisectionResult> {
    if !(lambda_lo > 0.0 && lambda_lo < lambda_hi && tol > 0.0) {
        return Err(Error::InvalidArgument("need 0 < lambda_lo < lambda_hi and tol > 0".into()));
    }
    let key = key.with_stage(stage::BISECT);
    let classify = |lambda: f64| is_supercritical(pf, m, mode, bound, lambda, n, generations, key);
    let (mut lo, mut hi) = (lambda_lo, lambda_hi);
    if classify(lo)? || !classify(hi)? {
        return Err(Error::NoBracket { lo, hi });
    }
    let mut steps = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if classify(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    Ok(BisectionResult {
        lambda_cr: 0.5 * (lo + hi),
        lo,
        hi,
        steps,
    })
}

#[derive(Clone, Debug)]
pub struct StationaryLaw {
    /// Normalized so the median is exactly 1.
    pub samples: EmpiricalDistribution,
    pub log_lambda_cr: f64,
    pub residual_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarySummary {
    pub log_lambda_cr: f64,
    pub residual_drift: f64,
    pub sample_size: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl StationaryLaw {
    pub fn summary(&self) -> StationarySummary {
        StationarySummary {
            log_lambda_cr: self.log_lambda_cr,
            residual_drift: self.residual_drift,
            sample_size: self.samples.len(),
            q25: self.samples.quantile(0.25),
            median: self.samples.median(),
            q75: self.samples.quantile(0.75),
        }
    }
}

/// Self-normalized iteration toward the stationary law, from `start`
/// (default `Dirac(1)`).
pub fn stationary_law_from(
    pf: &PathFunctional,
    m: &FactorLaw,
    start: Option<&EmpiricalDistribution>,
    n: usize,
    generations: usize,
    key: StreamKey,
) -> Result<StationaryLaw> {
    if n == 0 || generations == 0 {
        return Err(Error::InvalidArgument("N and generations must be at least 1".into()));
    }
    let unit = EmpiricalDistribution::dirac(1.0, n)?;
    let start = start.unwrap_or(&unit);
    let cfg = GlueConfig::new(pf.clone(), m.clone(), 1.0, n, key.with_stage(stage::STATIONARY));
    let orbit = normalized_orbit(&cfg, start, generations, 0.5, |_, _| {})?;
    let scales = &orbit.log_scales[1..];
    let half = &scales[scales.len() / 2..];
    let log_lambda_cr = -mean(half);
    let acc = orbit.accumulated();
    let quarter = (generations / 4).max(1);
    let xs: Vec<f64> = (generations - quarter..=generations).map(|g| g as f64).collect();
    let residual_drift = linear_fit(&xs, &acc[generations - quarter..]).slope + log_lambda_cr;
    let samples = orbit.last;
    let iqr = samples.quantile(0.75) / samples.quantile(0.25);
    if !m.is_degenerate() && !(iqr >= 1.0 + 1e-9) {
        return Err(Error::Degenerate(format!(
            "normalized law collapsed (interquartile ratio {iqr})"
        )));
    }
    Ok(StationaryLaw {
        samples,
        log_lambda_cr,
        residual_drift,
    })
}

pub fn stationary_law(
    pf: &PathFunctional,
    m: &FactorLaw,
    n: usize,
    generations: usize,
    key: StreamKey,
) -> Result<StationaryLaw> {
    stationary_law_from(pf, m, None, n, generations, key)
}

/// KS distance between two median-normalized orbits driven by the same
/// keys, per generation (index 0 compares the normalized starts).
pub fn convergence_diagnostic(
    pf: &PathFunctional,
    m: &FactorLaw,
    start1: &EmpiricalDistribution,
    start2: &EmpiricalDistribution,
    n: usize,
    generations: usize,
    key: StreamKey,
) -> Result<Vec<(usize, f64)>> {
    let cfg = GlueConfig::new(pf.clone(), m.clone(), 1.0, n, key.with_stage(stage::CONVERGE));
    let (a, b) = rayon::join(
        || {
            let mut v = Vec::new();
            normalized_orbit(&cfg, start1, generations, 0.5, |_, d| v.push(d.clone())).map(|_| v)
        },
        || {
            let mut v = Vec::new();
            normalized_orbit(&cfg, start2, generations, 0.5, |_, d| v.push(d.clone())).map(|_| v)
        },
    );
    let (a, b) = (a?, b?);
    Ok(a.iter().zip(&b).enumerate().map(|(g, (x, y))| (g, ks_distance(x, y))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionRelation {
    pub alpha0: f64,
    /// The relation is a conjectured necessary condition, not a theorem.
    pub conjectural: bool,
}

/// Smaller positive root of `log 4 + a log(lambda_cr) + a^2 sigma^2 / 2 = 0`.
pub fn dimension_relation(log_lambda_cr: f64, sigma: f64) -> Option<DimensionRelation> {
    let l4 = 4f64.ln();
    let s2 = sigma * sigma;
    let disc = log_lambda_cr * log_lambda_cr - 2.0 * s2 * l4;
    if log_lambda_cr >= 0.0 || disc < 0.0 {
        return None;
    }
    // cancellation-free form of (-L - sqrt(D)) / sigma^2
    let alpha0 = 2.0 * l4 / (-log_lambda_cr + disc.sqrt());
    Some(DimensionRelation {
        alpha0,
        conjectural: true,
    })
}

/// `1 / (4 E xi^alpha)`.
pub fn mmc_lambda(alpha: f64, m: &FactorLaw) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be >= 0")));
    }
    Ok(1.0 / (4.0 * m.moment(alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brickgraph::{enumerate_simple_paths, BrickGraph};

    fn pf(name: &str) -> PathFunctional {
        enumerate_simple_paths(&BrickGraph::preset(name).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_drifts() {
        let key = StreamKey::new(1);
        let e = estimate_drift(&pf("eight"), &FactorLaw::dirac(1.0), 50, 10, 2, 2, key).unwrap();
        assert!((e.log_lambda_cr + 2f64.ln()).abs() < 1e-12);
        assert_eq!(e.stderr, 0.0);
        for c in [0.5, 3.0] {
            let e = estimate_drift(&pf("interval2"), &FactorLaw::dirac(c), 20, 5, 0, 1, key).unwrap();
            assert!((e.log_lambda_cr + (2.0 * c).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_is_scale_free() {
        let key = StreamKey::new(2);
        let base = FactorLaw::atoms(&[(0.5, 0.3), (1.0, 0.4), (3.0, 0.3)]);
        let scaled = FactorLaw::atoms(&[(2.0, 0.3), (4.0, 0.4), (12.0, 0.3)]);
        let a = estimate_drift(&pf("eight"), &base, 2000, 10, 5, 2, key).unwrap();
        let b = estimate_drift(&pf("eight"), &scaled, 2000, 10, 5, 2, key).unwrap();
        assert!((b.log_lambda_cr - (a.log_lambda_cr - 4f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn degenerate_drift_errors() {
        let m = FactorLaw::atoms(&[(1.0, 0.5), (f64::INFINITY, 0.5)]);
        let r = estimate_drift(&pf("interval2"), &m, 100, 5, 0, 1, StreamKey::new(1));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn dimension_relation_roots() {
        let d = dimension_relation(-(2f64.ln()), 1e-6).unwrap();
        assert!((d.alpha0 - 2.0).abs() < 1e-9);
        assert!(d.conjectural);
        assert!(dimension_relation(-0.1, 0.5).is_none());
        assert!(dimension_relation(0.1, 0.05).is_none());
        // independent bisection on the quadratic
        let (l, s) = (-0.68, 0.1);
        let f = |a: f64| 4f64.ln() + a * l + a * a * s * s / 2.0;
        let (mut lo, mut hi) = (0.0, -l / (s * s));
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((dimension_relation(l, s).unwrap().alpha0 - lo).abs() < 1e-10);
    }

    #[test]
    fn mmc_values() {
        assert_eq!(mmc_lambda(0.0, &FactorLaw::lognormal(0.7)).unwrap(), 0.25);
        let v = mmc_lambda(1.0, &FactorLaw::lognormal(0.4)).unwrap();
        assert!((v - (-0.08f64).exp() / 4.0).abs() < 1e-15);
        assert_eq!(mmc_lambda(1.0, &FactorLaw::atoms(&[(2.0, 1.0)])).unwrap(), 0.125);
        assert!(mmc_lambda(1.0, &FactorLaw::ScaledUniform { scale: 1.0 }).is_err());
    }

    #[test]
    fn stationary_dirac() {
        let s = stationary_law(&pf("eight"), &FactorLaw::dirac(1.0), 100, 10, StreamKey::new(3)).unwrap();
        assert!(s.samples.samples().iter().all(|&x| x == 1.0));
        assert!((s.log_lambda_cr + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn stationary_exponential_shape() {
        let m = FactorLaw::ScaledUniform { scale: 2.0 };
        let s = stationary_law(&pf("eight"), &m, 100_000, 30, StreamKey::new(4)).unwrap();
        assert_eq!(s.samples.median(), 1.0);
        let ratio = s.samples.quantile(0.75) / s.samples.quantile(0.25);
        let expect = 4f64.ln() / (4.0f64 / 3.0).ln();
        assert!((ratio / expect - 1.0).abs() < 0.05, "ratio {ratio}");
        assert!(s.log_lambda_cr.abs() < 0.02);
    }

    #[test]
    fn convergence_exact_cases() {
        let eight = pf("eight");
        let m = FactorLaw::lognormal(0.3);
        let a = EmpiricalDistribution::dirac(1.0, 500).unwrap();
        let b = EmpiricalDistribution::dirac(10.0, 500).unwrap();
        let same = convergence_diagnostic(&eight, &m, &a, &a, 500, 5, StreamKey::new(5)).unwrap();
        assert!(same.iter().all(|&(_, d)| d == 0.0));
        let scaled = convergence_diagnostic(&eight, &m, &a, &b, 500, 5, StreamKey::new(5)).unwrap();
        assert_eq!(scaled.len(), 6);
        assert!(scaled.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn bisection_on_deterministic_eight() {
        let r = bisect_lambda_cr(
            &pf("eight"),
            &FactorLaw::dirac(1.0),
            CutoffMode::Upper,
            1.0,
            0.3,
            0.8,
            16,
            20_000,
            1e-3,
            StreamKey::new(6),
        )
        .unwrap();
        assert!((r.lambda_cr - 0.5).abs() <= 1e-3, "{r:?}");
        let bad = bisect_lambda_cr(
            &pf("eight"),
            &FactorLaw::dirac(1.0),
            CutoffMode::Upper,
            1.0,
            0.6,
            0.8,
            16,
            200,
            1e-3,
            StreamKey::new(6),
        );
        assert!(matches!(bad, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn sweep_rows_and_crossing() {
        let r = sweep_sigma_with(
            &pf("eight"),
            &[0.1, 0.2],
            &DriftSettings::new(500, 3, 2, 2),
            StreamKey::new(7),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.to_csv().starts_with("sigma,log2lambda,stderr,overlay_interval,overlay_brw\n"));
        assert!((r.rows[0].overlay_interval + 0.005).abs() < 1e-15);
        assert!(sweep_sigma(&pf("eight"), &[0.2, 0.1], 10, 1, StreamKey::new(7)).is_err());
        let synthetic = SweepResult {
            rows: vec![
                SweepRow { sigma: 0.0, log2lambda: 0.0, stderr: 0.0, overlay_interval: 0.0, overlay_brw: 1.0 },
                SweepRow { sigma: 1.0, log2lambda: 1.0, stderr: 0.0, overlay_interval: 0.0, overlay_brw: 0.0 },
            ],
            overlays: vec![],
        };
        assert_eq!(synthetic.brw_crossing(), Some(0.5));
    }
}
