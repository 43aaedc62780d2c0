use std::path::Path;

use hiermetric::brickgraph::{classify_edges, enumerate_simple_paths, theta_fixed_points, PathFunctional};
use hiermetric::critical::{
    bisect_lambda_cr, convergence_diagnostic, drift_run, stationary_law, sweep_sigma_with, CutoffMode, DriftSettings,
};
use hiermetric::dist::{sample_factors, EmpiricalDistribution, FactorLaw};
use hiermetric::geometry::{
    brw_max_drift, cascade_level_maxima, geodesic_chain, levels_csv, percolation_replacement, phase_classify,
    phase_from_parts, LeafLaw,
};
use hiermetric::io::{fmt9, write_atomic};
use hiermetric::rng::{stage, StreamKey};
use hiermetric::sierpinski::{
    glue_step_3, sierpinski_drift, theta_sigma_orbit, Partition, PartitionDistribution, TriangleEnsemble,
    TriangleState,
};
use hiermetric::stats::linear_fit;
use hiermetric::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Rounds every float in a JSON tree to 9 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            fmt9(x).parse::<f64>().ok().and_then(|r| serde_json::Number::from_f64(r)).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = round_json(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub struct Output<'a> {
    pub dir: &'a Path,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(self.dir)?;
        write_atomic(&self.dir.join(name), contents.as_bytes())
    }

    /// Writes `<name>.json` and returns its text.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<String> {
        let text = to_json(value)?;
        self.write(&format!("{name}.json"), &text)?;
        Ok(text)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row.iter().map(|v| fmt9(*v))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        self.write(&format!("{name}.csv"), &String::from_utf8(bytes).expect("utf8 csv"))
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<()> {
        self.write(name, contents)
    }
}

fn functional(cfg: &RunConfig) -> Result<PathFunctional> {
    enumerate_simple_paths(&cfg.brick()?)
}

fn settings(cfg: &RunConfig) -> DriftSettings {
    DriftSettings::new(cfg.n, cfg.k, cfg.warmup, cfg.reps)
}

pub fn theta(cfg: &RunConfig, out: &Output, grid_points: usize) -> Result<String> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let analysis = theta_fixed_points(&cfg.brick()?, 1e-13)?;
    let rows: Vec<Vec<f64>> = (0..grid_points)
        .map(|i| {
            let p = i as f64 / (grid_points - 1) as f64;
            vec![p, analysis.evaluator.eval(p)]
        })
        .collect();
    out.csv("theta", &["p", "theta"], &rows)?;
    out.json(
        "theta",
        &json!({
            "graph": cfg.graph,
            "subset_counts": analysis.evaluator.counts(),
            "fixed_points": analysis.fixed_points,
        }),
    )
}

pub fn paths(cfg: &RunConfig, out: &Output) -> Result<String> {
    let pf = functional(cfg)?;
    let g = pf.graph();
    out.json(
        "paths",
        &json!({
            "graph": cfg.graph,
            "edges": g.to_document().edges,
            "paths": pf.paths(),
            "io_graph_distance": pf.io_graph_distance(),
            "classification": classify_edges(&pf),
        }),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Drift,
    Bisect,
}

#[derive(Clone, Debug, clap::Args, Serialize)]
pub struct BisectArgs {
    #[arg(long, value_enum, default_value = "drift")]
    pub method: Method,
    /// Cut-off mode for bisection.
    #[arg(long, value_enum, default_value = "upper")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub bound: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Upper,
    Lower,
}

pub fn lambda_cr(cfg: &RunConfig, out: &Output, args: &BisectArgs) -> Result<String> {
    let pf = functional(cfg)?;
    let m = cfg.factor_law()?;
    let key = StreamKey::new(cfg.seed()?);
    match args.method {
        Method::Drift => {
            let run = drift_run(&pf, &m, &settings(cfg), None, key.with_stage(stage::DRIFT))?;
            let e = run.estimate;
            out.json(
                "lambda_cr",
                &json!({
                    "method": "drift",
                    "log_lambda_cr": e.log_lambda_cr,
                    "lambda_cr": e.lambda_cr(),
                    "stderr": e.stderr,
                    "log2lambda": e.log_lambda_cr + 2f64.ln(),
                    "estimate": e,
                    "slopes": run.slopes,
                }),
            )
        }
        Method::Bisect => {
            let mode = match args.mode {
                ModeArg::Upper => CutoffMode::Upper,
                ModeArg::Lower => CutoffMode::Lower,
            };
            let r = bisect_lambda_cr(&pf, &m, mode, args.bound, args.lo, args.hi, cfg.n, cfg.generations, args.tol, key)?;
            out.json(
                "lambda_cr",
                &json!({
                    "method": "bisect",
                    "lambda_cr": r.lambda_cr,
                    "log_lambda_cr": r.lambda_cr.ln(),
                    "result": r,
                }),
            )
        }
    }
}

pub fn sweep(cfg: &RunConfig, out: &Output) -> Result<String> {
    let pf = functional(cfg)?;
    let r = sweep_sigma_with(&pf, &cfg.sigma_grid, &settings(cfg), StreamKey::new(cfg.seed()?))?;
    out.text("sweep.csv", &r.to_csv())?;
    out.json(
        "sweep",
        &json!({
            "graph": cfg.graph,
            "brw_crossing": r.brw_crossing(),
            "overlays": r.overlays,
            "points": r.rows.len(),
        }),
    )
}

pub fn stationary(cfg: &RunConfig, out: &Output) -> Result<String> {
    let law = stationary_law(&functional(cfg)?, &cfg.factor_law()?, cfg.n, cfg.generations, StreamKey::new(cfg.seed()?))?;
    out.text("stationary.csv", &law.samples.to_csv())?;
    out.json("stationary", &law.summary())
}

pub fn converge(cfg: &RunConfig, out: &Output, spread: &FactorLaw) -> Result<String> {
    let key = StreamKey::new(cfg.seed()?);
    let start1 = EmpiricalDistribution::dirac(1.0, cfg.n)?;
    let start2 = EmpiricalDistribution::new(sample_factors(spread, cfg.n, key.with_stage(stage::FACTORS)))?;
    let ks = convergence_diagnostic(&functional(cfg)?, &cfg.factor_law()?, &start1, &start2, cfg.n, cfg.generations, key)?;
    let rows: Vec<Vec<f64>> = ks.iter().map(|(g, d)| vec![*g as f64, *d]).collect();
    out.csv("converge", &["generation", "ks"], &rows)?;
    out.json(
        "converge",
        &json!({
            "initial_ks": ks[0].1,
            "final_ks": ks[ks.len() - 1].1,
            "generations": cfg.generations,
        }),
    )
}

pub fn phase(cfg: &RunConfig, out: &Output, sigma: f64) -> Result<String> {
    let pf = functional(cfg)?;
    let m = FactorLaw::lognormal(sigma);
    m.validate()?;
    let key = StreamKey::new(cfg.seed()?).with_stage(stage::DRIFT);
    let estimate = drift_run(&pf, &m, &settings(cfg), None, key)?.estimate;
    let report = if pf.graph().eight_pairs().is_some() {
        phase_classify(sigma, &estimate)?
    } else {
        let b = pf.edge_count();
        phase_from_parts((2.0 * (b as f64).ln()).sqrt() * sigma, 0.0, b, &estimate)
    };
    out.json("phase", &json!({ "graph": cfg.graph, "sigma": sigma, "report": report, "estimate": estimate }))
}

#[derive(Clone, Debug, clap::Args, Serialize)]
pub struct BrwArgs {
    #[arg(long, default_value_t = 4)]
    pub branching: usize,
    #[arg(long, default_value_t = 25)]
    pub n_max: usize,
    #[arg(long, default_value_t = 15)]
    pub window_lo: usize,
    /// Particles kept per level; 0 keeps the full tree.
    #[arg(long, default_value_t = 100_000)]
    pub prune: usize,
}

pub fn brw(cfg: &RunConfig, out: &Output, args: &BrwArgs) -> Result<String> {
    let prune = (args.prune > 0).then_some(args.prune);
    let e = brw_max_drift(
        &cfg.factor_law()?,
        args.branching,
        args.n_max,
        (args.window_lo, args.n_max),
        cfg.reps,
        prune,
        StreamKey::new(cfg.seed()?),
    )?;
    out.text("brw.csv", &levels_csv(&e.mean_maxima))?;
    out.json("brw", &e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafArg {
    Unit,
    Stationary,
}

/// `lambda` from the config, or estimated by the drift method.
fn lambda_or_estimate(cfg: &RunConfig, pf: &PathFunctional, m: &FactorLaw, key: StreamKey) -> Result<(f64, Option<f64>)> {
    match cfg.lambda {
        Some(l) => Ok((l, None)),
        None => {
            let e = drift_run(pf, m, &settings(cfg), None, key.with_stage(stage::DRIFT))?.estimate;
            Ok((e.lambda_cr(), Some(e.stderr)))
        }
    }
}

pub fn cascade(cfg: &RunConfig, out: &Output, leaf: LeafArg) -> Result<String> {
    let pf = functional(cfg)?;
    let m = cfg.factor_law()?;
    let key = StreamKey::new(cfg.seed()?);
    let (lambda, stderr) = lambda_or_estimate(cfg, &pf, &m, key)?;
    let leaves = match leaf {
        LeafArg::Unit => LeafLaw::Unit,
        LeafArg::Stationary => {
            LeafLaw::Stationary(stationary_law(&pf, &m, cfg.n, cfg.generations, key.with_stage(stage::STATIONARY))?.samples)
        }
    };
    let maxima = cascade_level_maxima(&pf, &m, lambda, cfg.depth, &leaves, key.with_stage(stage::CASCADE))?;
    out.text("cascade.csv", &levels_csv(&maxima))?;
    let xs: Vec<f64> = (0..maxima.len()).map(|l| l as f64).collect();
    let ys: Vec<f64> = maxima.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let target = match &m {
        FactorLaw::LogNormal { sigma } => Some((2.0 * (pf.edge_count() as f64).ln()).sqrt() * sigma + lambda.ln()),
        _ => None,
    };
    out.json(
        "cascade",
        &json!({
            "lambda": lambda,
            "lambda_stderr_log": stderr,
            "leaf": leaf,
            "depth": cfg.depth,
            "slope": fit.slope,
            "slope_stderr": fit.slope_stderr,
            "predicted_slope": target,
        }),
    )
}

pub fn geodesic(cfg: &RunConfig, out: &Output, trace_rep: usize) -> Result<String> {
    let pf = functional(cfg)?;
    let m = cfg.factor_law()?;
    let key = StreamKey::new(cfg.seed()?);
    let (lambda, _) = lambda_or_estimate(cfg, &pf, &m, key)?;
    let st = stationary_law(&pf, &m, cfg.n, cfg.generations, key.with_stage(stage::STATIONARY))?;
    let run = geodesic_chain(&pf, &st, &m, lambda, cfg.depth, cfg.reps, key)?;
    let trace = run
        .traces
        .get(trace_rep)
        .ok_or_else(|| Error::InvalidArgument(format!("trace {trace_rep} out of {} repetitions", cfg.reps)))?;
    out.text("geodesic.csv", &trace.to_csv())?;
    let steps: usize = run.traces.iter().map(|t| t.ratios.len()).sum();
    let balanced: usize = run.traces.iter().map(|t| t.ratios.iter().filter(|&&r| r <= 2.0).count()).sum();
    let visits: f64 = run.traces.iter().map(|t| t.window_visits as f64).sum::<f64>() / run.traces.len() as f64;
    out.json(
        "geodesic",
        &json!({
            "lambda": lambda,
            "depth": cfg.depth,
            "reps": cfg.reps,
            "fraction_ratio_at_most_2": balanced as f64 / steps as f64,
            "mean_window_visits": visits,
            "window_log": [trace.window.0, trace.window.1],
            "block_depth": run.block_depth,
            "approximation": run.approximation,
        }),
    )
}

pub fn percolation_toy(out: &Output, p: f64, tol: f64) -> Result<String> {
    out.json("percolation_toy", &percolation_replacement(p, tol)?)
}

pub fn sierpinski_lambda_cr(cfg: &RunConfig, out: &Output) -> Result<String> {
    let d = sierpinski_drift(&cfg.factor_law()?, cfg.n, cfg.k, cfg.warmup, cfg.reps, StreamKey::new(cfg.seed()?))?;
    out.json(
        "sierpinski_lambda_cr",
        &json!({
            "log_lambda_cr": d.estimate.log_lambda_cr,
            "lambda_cr": d.estimate.lambda_cr(),
            "stderr": d.estimate.stderr,
            "coordinate_log_lambda": d.coordinate_log_lambda,
            "estimate": d.estimate,
        }),
    )
}

fn parse_start(s: &str) -> Result<PartitionDistribution> {
    let named = match s {
        "uniform" => return Ok(PartitionDistribution::uniform()),
        "singletons" => Partition::Singletons,
        "pair12" => Partition::Pair12,
        "pair23" => Partition::Pair23,
        "pair31" => Partition::Pair31,
        "together" => Partition::Together,
        list => {
            let v: Vec<f64> = list
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("start {s:?}: {e}")))?;
            let a: [f64; 5] = v
                .try_into()
                .map_err(|_| Error::InvalidArgument(format!("start {s:?} needs five probabilities")))?;
            return PartitionDistribution::from_array(a);
        }
    };
    Ok(PartitionDistribution::dirac(named))
}

pub fn sierpinski_theta(out: &Output, start: &str, steps: usize, tol: f64) -> Result<String> {
    let orbit = theta_sigma_orbit(&parse_start(start)?, steps, tol)?;
    out.json(
        "sierpinski_theta",
        &json!({
            "limit": orbit.limit.map_or(Value::from("unresolved"), |p| serde_json::to_value(p).expect("enum")),
            "steps": orbit.steps,
            "trajectory": orbit.trajectory,
        }),
    )
}

pub fn sierpinski_glue(cfg: &RunConfig, out: &Output) -> Result<String> {
    let m = cfg.factor_law()?;
    let lambda = cfg.lambda.unwrap_or(1.0);
    let cutoff = cfg.cutoff()?;
    let key = StreamKey::new(cfg.seed()?).with_stage(stage::SIERPINSKI);
    let mut ens = TriangleEnsemble::constant(TriangleState::equilateral(1.0)?, cfg.n)?;
    for g in 1..=cfg.generations {
        ens = glue_step_3(&ens, &m, lambda, cutoff, cfg.n, key.with_generation(g as u64))?;
    }
    out.text("triangles.csv", &ens.to_csv())?;
    out.json(
        "sierpinski_glue",
        &json!({
            "lambda": lambda,
            "generations": cfg.generations,
            "median_perimeter": ens.median_of(TriangleState::perimeter),
            "triangle_inequality_holds": ens.states().iter().all(TriangleState::is_triangle),
        }),
    )
}
