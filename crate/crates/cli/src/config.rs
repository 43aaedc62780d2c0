//! Run configuration: command-line flags override config-file fields, which
//! override built-in defaults.

use std::path::{Path, PathBuf};

use hiermetric::brickgraph::BrickGraph;
use hiermetric::dist::{Cutoff, FactorLaw};
use hiermetric::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fields accepted in a `--config` JSON file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub graph: Option<String>,
    pub law: Option<String>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub warmup: Option<usize>,
    pub reps: Option<usize>,
    pub depth: Option<usize>,
    pub generations: Option<usize>,
    pub seed: Option<u64>,
    pub cutoff: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub sigma_grid: Option<Vec<f64>>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Shared settings after precedence resolution; echoed next to every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub graph: String,
    pub law: String,
    pub lambda: Option<f64>,
    pub n: usize,
    pub k: usize,
    pub warmup: usize,
    pub reps: usize,
    pub depth: usize,
    pub generations: usize,
    pub seed: Option<u64>,
    pub cutoff: Option<String>,
    pub output_dir: PathBuf,
    pub sigma_grid: Vec<f64>,
    pub workers: Option<usize>,
}

/// Values given on the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub graph: Option<String>,
    pub law: Option<String>,
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub warmup: Option<usize>,
    pub reps: Option<usize>,
    pub depth: Option<usize>,
    pub generations: Option<usize>,
    pub seed: Option<u64>,
    pub cutoff: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub sigma_grid: Option<Vec<f64>>,
    pub workers: Option<usize>,
}

fn default_sigma_grid() -> Vec<f64> {
    (0..23).map(|i| 0.05 + 0.025 * i as f64).collect()
}

impl RunConfig {
    pub fn resolve(cli: Overrides, file: ConfigFile) -> Result<Self> {
        let cfg = RunConfig {
            graph: cli.graph.or(file.graph).unwrap_or_else(|| "eight".into()),
            law: cli.law.or(file.law).unwrap_or_else(|| "lognormal:0.3".into()),
            lambda: cli.lambda.or(file.lambda),
            n: cli.n.or(file.n).unwrap_or(50_000),
            k: cli.k.or(file.k).unwrap_or(50),
            warmup: cli.warmup.or(file.warmup).unwrap_or(20),
            reps: cli.reps.or(file.reps).unwrap_or(8),
            depth: cli.depth.or(file.depth).unwrap_or(12),
            generations: cli.generations.or(file.generations).unwrap_or(60),
            seed: cli.seed.or(file.seed),
            cutoff: cli.cutoff.or(file.cutoff),
            output_dir: cli.output_dir.or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
            sigma_grid: cli.sigma_grid.or(file.sigma_grid).unwrap_or_else(default_sigma_grid),
            workers: cli.workers.or(file.workers),
        };
        for (name, v) in [
            ("n", cfg.n),
            ("k", cfg.k),
            ("reps", cfg.reps),
            ("depth", cfg.depth),
            ("generations", cfg.generations),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        Ok(cfg)
    }

    /// Stochastic commands refuse to run without an explicit seed.
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument("a seed is required (--seed or \"seed\" in the config file)".into()))
    }

    /// A preset name, or a path to a graph JSON document.
    pub fn brick(&self) -> Result<BrickGraph> {
        let path = Path::new(&self.graph);
        if path.is_file() {
            BrickGraph::parse(&std::fs::read_to_string(path)?)
        } else {
            BrickGraph::preset(&self.graph)
        }
    }

    pub fn factor_law(&self) -> Result<FactorLaw> {
        self.law.parse()
    }

    pub fn cutoff(&self) -> Result<Option<Cutoff>> {
        self.cutoff.as_deref().map(parse_cutoff).transpose()
    }
}

/// `upper:A` or `lower:a`.
pub fn parse_cutoff(s: &str) -> Result<Cutoff> {
    let bad = || Error::InvalidArgument(format!("cutoff {s:?} must look like upper:A or lower:a"));
    let (mode, value) = s.split_once(':').ok_or_else(bad)?;
    let v: f64 = value.trim().parse().map_err(|_| bad())?;
    let c = match mode.trim() {
        "upper" => Cutoff::Upper(v),
        "lower" => Cutoff::Lower(v),
        _ => return Err(bad()),
    };
    c.validate()?;
    Ok(c)
}

/// `lo:hi:step` or a comma-separated list.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        let (lo, hi, step) = (v[0], v[1], v[2]);
        if !(step > 0.0 && lo <= hi) {
            return Err(format!("bad range {s:?}"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| lo + step * i as f64).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}
