//! The Sierpiński gasket: three outer vertices `B1, B2, B3`, three copies
//! glued at the midpoints. A state is the triple of pairwise distances
//! `x = d(B1,B2)`, `y = d(B2,B3)`, `z = d(B3,B1)`.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::DriftEstimate;
use crate::dist::{scaled_length, Cutoff, FactorLaw};
use crate::error::{Error, Result};
use crate::io::{fmt9, parse_ext, write_atomic};
use crate::rng::{stage, StreamKey};
use crate::stats::{linear_fit, mean, std_error};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TriangleState {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let t = TriangleState { x, y, z };
        if [x, y, z].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidDistribution(format!("distances {x}, {y}, {z} must be nonnegative")));
        }
        if !t.is_triangle() {
            return Err(Error::InvalidDistribution(format!("({x}, {y}, {z}) violates the triangle inequality")));
        }
        Ok(t)
    }

    pub fn equilateral(s: f64) -> Result<Self> {
        TriangleState::new(s, s, s)
    }

    /// Exact check; infinite sides dominate.
    pub fn is_triangle(&self) -> bool {
        self.x + self.y >= self.z && self.y + self.z >= self.x && self.z + self.x >= self.y
    }

    pub fn perimeter(&self) -> f64 {
        self.x + self.y + self.z
    }

    pub fn scale(&self, c: f64) -> Self {
        TriangleState {
            x: self.x * c,
            y: self.y * c,
            z: self.z * c,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Corners of each glued copy, in its own `(B1, B2, B3)` order, as vertices
/// of the large triangle: `B1 = 0, B2 = 1, B3 = 2, M12 = 3, M23 = 4, M31 = 5`.
pub const COPY_CORNERS: [[usize; 3]; 3] = [[5, 4, 2], [0, 3, 5], [3, 1, 4]];

/// Distances of the large triangle built from three copies.
pub fn r3_eval(
    t1: &TriangleState,
    t2: &TriangleState,
    t3: &TriangleState,
    xi: f64,
    lambda: f64,
    cutoff: Option<Cutoff>,
) -> TriangleState {
    let (x1, y1, z1) = (t1.x, t1.y, t1.z);
    let (x2, y2, z2) = (t2.x, t2.y, t2.z);
    let (x3, y3, z3) = (t3.x, t3.y, t3.z);
    let raw = [
        (z2 + x1 + y3).min(x2 + x3),
        (x3 + y2 + z1).min(y3 + y1),
        (y1 + z3 + x2).min(z1 + z2),
    ];
    let [x, y, z] = raw.map(|r| {
        let v = scaled_length(lambda, xi, r);
        cutoff.map_or(v, |c| c.apply(v))
    });
    TriangleState { x, y, z }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleEnsemble {
    states: Vec<TriangleState>,
}

impl TriangleEnsemble {
    pub fn new(states: Vec<TriangleState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidDistribution("empty ensemble".into()));
        }
        for t in &states {
            TriangleState::new(t.x, t.y, t.z)?;
        }
        Ok(TriangleEnsemble { states })
    }

    pub fn constant(t: TriangleState, n: usize) -> Result<Self> {
        TriangleEnsemble::new(vec![t; n])
    }

    pub fn states(&self) -> &[TriangleState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        TriangleEnsemble {
            states: self.states.iter().map(|t| t.scale(c)).collect(),
        }
    }

    /// Lower median of a statistic.
    pub fn median_of(&self, f: impl Fn(&TriangleState) -> f64) -> f64 {
        let mut v: Vec<f64> = self.states.iter().map(f).collect();
        let mid = (v.len() - 1) / 2;
        *v.select_nth_unstable_by(mid, f64::total_cmp).1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for t in &self.states {
            out.push_str(&format!("{},{},{}\n", fmt9(t.x), fmt9(t.y), fmt9(t.z)));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("x,y,z") {
            return Err(Error::InvalidDistribution("expected header x,y,z".into()));
        }
        let states = lines
            .map(|line| {
                let v: Vec<f64> = line
                    .split(',')
                    .map(|f| parse_ext(f.trim()))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::InvalidDistribution(format!("bad row {line:?}: {e}")))?;
                match v[..] {
                    [x, y, z] => TriangleState::new(x, y, z),
                    _ => Err(Error::InvalidDistribution(format!("bad row {line:?}"))),
                }
            })
            .collect::<Result<_>>()?;
        TriangleEnsemble::new(states)
    }
}

/// One resampling step: output `i` draws three copies uniformly from the
/// input, then a factor, all from `key.with_index(i)`.
pub fn glue_step_3(
    input: &TriangleEnsemble,
    m: &FactorLaw,
    lambda: f64,
    cutoff: Option<Cutoff>,
    n_out: usize,
    key: StreamKey,
) -> Result<TriangleEnsemble> {
    m.validate()?;
    if let Some(c) = cutoff {
        c.validate()?;
    }
    if n_out == 0 || !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument("need n_out >= 1 and lambda > 0".into()));
    }
    let s = input.states();
    let states = (0..n_out as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.with_index(i).rng();
            let t1 = s[rng.random_range(0..s.len())];
            let t2 = s[rng.random_range(0..s.len())];
            let t3 = s[rng.random_range(0..s.len())];
            let xi = m.sample(&mut rng);
            r3_eval(&t1, &t2, &t3, xi, lambda, cutoff)
        })
        .collect();
    Ok(TriangleEnsemble { states })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SierpinskiDrift {
    pub estimate: DriftEstimate,
    /// Drift of the log median of `x`, `y`, `z` separately, as `log lambda_cr`.
    pub coordinate_log_lambda: [f64; 3],
}

/// Perimeter-median drift under `lambda = 1`, started from the unit
/// equilateral triangle; each generation is divided by its median perimeter.
pub fn sierpinski_drift(
    m: &FactorLaw,
    n: usize,
    k: usize,
    warmup: usize,
    reps: usize,
    key: StreamKey,
) -> Result<SierpinskiDrift> {
    if n == 0 || k == 0 || reps == 0 {
        return Err(Error::InvalidArgument("N, k and reps must be at least 1".into()));
    }
    m.validate()?;
    let key = key.with_stage(stage::SIERPINSKI);
    let generations = warmup + k;
    let runs: Vec<[f64; 4]> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rkey = key.subspace(r as u64);
            let mut current = TriangleEnsemble::constant(TriangleState::equilateral(1.0)?, n)?;
            let mut acc = 0.0;
            let mut series = vec![[0.0; 4]; generations + 1];
            for g in 0..=generations {
                if g > 0 {
                    current = glue_step_3(&current, m, 1.0, None, n, rkey.with_generation(g as u64))?;
                }
                let p = current.median_of(TriangleState::perimeter);
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::Degenerate(format!("median perimeter reached {p}")));
                }
                acc += p.ln();
                let coords = [
                    current.median_of(|t| t.x),
                    current.median_of(|t| t.y),
                    current.median_of(|t| t.z),
                ];
                series[g][0] = acc;
                for (c, v) in coords.iter().enumerate() {
                    series[g][c + 1] = acc - p.ln() + v.ln();
                }
                current = current.scale(1.0 / p);
            }
            let xs: Vec<f64> = (warmup..=generations).map(|g| g as f64).collect();
            let mut slopes = [0.0; 4];
            for (c, s) in slopes.iter_mut().enumerate() {
                let ys: Vec<f64> = series[warmup..].iter().map(|row| row[c]).collect();
                *s = linear_fit(&xs, &ys).slope;
            }
            Ok(slopes)
        })
        .collect::<Result<_>>()?;
    let perimeter: Vec<f64> = runs.iter().map(|s| s[0]).collect();
    let coord = |c: usize| -mean(&runs.iter().map(|s| s[c]).collect::<Vec<_>>());
    Ok(SierpinskiDrift {
        estimate: DriftEstimate {
            log_lambda_cr: -mean(&perimeter),
            stderr: std_error(&perimeter),
            generations: k,
            sample_size: n,
            warmup,
            repetitions: reps,
        },
        coordinate_log_lambda: [coord(1), coord(2), coord(3)],
    })
}

pub fn lambda_cr_sierpinski(
    m: &FactorLaw,
    n: usize,
    k: usize,
    warmup: usize,
    reps: usize,
    key: StreamKey,
) -> Result<DriftEstimate> {
    Ok(sierpinski_drift(m, n, k, warmup, reps, key)?.estimate)
}

/// Cluster partitions of `{B1, B2, B3}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Singletons,
    Pair12,
    Pair23,
    Pair31,
    Together,
}

impl Partition {
    pub const ALL: [Partition; 5] = [
        Partition::Singletons,
        Partition::Pair12,
        Partition::Pair23,
        Partition::Pair31,
        Partition::Together,
    ];

    /// Connected corner pairs that generate the partition.
    fn links(self) -> &'static [(usize, usize)] {
        match self {
            Partition::Singletons => &[],
            Partition::Pair12 => &[(0, 1)],
            Partition::Pair23 => &[(1, 2)],
            Partition::Pair31 => &[(2, 0)],
            Partition::Together => &[(0, 1), (1, 2)],
        }
    }

    fn from_classes(same01: bool, same12: bool, same20: bool) -> Partition {
        match (same01, same12, same20) {
            (true, true, _) | (true, _, true) | (_, true, true) => Partition::Together,
            (true, false, false) => Partition::Pair12,
            (false, true, false) => Partition::Pair23,
            (false, false, true) => Partition::Pair31,
            (false, false, false) => Partition::Singletons,
        }
    }

    fn index(self) -> usize {
        Partition::ALL.iter().position(|&p| p == self).expect("listed")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDistribution {
    pub singletons: f64,
    pub pair12: f64,
    pub pair23: f64,
    pub pair31: f64,
    pub together: f64,
}

pub const SIMPLEX_TOL: f64 = 1e-12;

impl PartitionDistribution {
    pub fn from_array(p: [f64; 5]) -> Result<Self> {
        if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!("{p:?} is not a probability vector")));
        }
        Ok(Self::from_array_unchecked(p))
    }

    fn from_array_unchecked(p: [f64; 5]) -> Self {
        PartitionDistribution {
            singletons: p[0],
            pair12: p[1],
            pair23: p[2],
            pair31: p[3],
            together: p[4],
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.singletons, self.pair12, self.pair23, self.pair31, self.together]
    }

    pub fn dirac(p: Partition) -> Self {
        let mut a = [0.0; 5];
        a[p.index()] = 1.0;
        Self::from_array_unchecked(a)
    }

    pub fn uniform() -> Self {
        Self::from_array_unchecked([0.2; 5])
    }

    pub fn prob(&self, p: Partition) -> f64 {
        self.as_array()[p.index()]
    }

    /// Mass of partitions where `B1` shares a cluster with another corner.
    pub fn q1(&self) -> f64 {
        self.pair12 + self.pair31 + self.together
    }

    pub fn validate(&self) -> Result<()> {
        Self::from_array(self.as_array()).map(|_| ())
    }
}

fn find(parent: &mut [usize; 6], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Partition of the outer corners when copy `i` carries partition `parts[i]`.
pub fn glue_partitions(parts: [Partition; 3]) -> Partition {
    let mut parent = [0, 1, 2, 3, 4, 5];
    for (copy, part) in parts.iter().enumerate() {
        for &(a, b) in part.links() {
            let (ra, rb) = (
                find(&mut parent, COPY_CORNERS[copy][a]),
                find(&mut parent, COPY_CORNERS[copy][b]),
            );
            parent[ra] = rb;
        }
    }
    let r: Vec<usize> = (0..3).map(|v| find(&mut parent, v)).collect();
    Partition::from_classes(r[0] == r[1], r[1] == r[2], r[2] == r[0])
}

/// Exact image of `p` over all 125 triples of copy partitions.
pub fn theta_sigma(p: &PartitionDistribution) -> PartitionDistribution {
    // total mass s maps to s^3, so rounding off the simplex would triple
    // every step without this projection
    let total: f64 = p.as_array().iter().sum();
    let w = p.as_array().map(|v| v / total);
    let mut out = [0.0; 5];
    for a in Partition::ALL {
        for b in Partition::ALL {
            for c in Partition::ALL {
                let mass = w[a.index()] * w[b.index()] * w[c.index()];
                out[glue_partitions([a, b, c]).index()] += mass;
            }
        }
    }
    PartitionDistribution::from_array_unchecked(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaOrbit {
    pub trajectory: Vec<PartitionDistribution>,
    /// Extreme partition with mass above `1 - tol`; `None` if unresolved.
    pub limit: Option<Partition>,
    pub steps: usize,
}

pub fn theta_sigma_orbit(p0: &PartitionDistribution, n_steps: usize, tol: f64) -> Result<SigmaOrbit> {
    p0.validate()?;
    if !(tol > 0.0 && tol < 0.5) {
        return Err(Error::InvalidArgument(format!("tol = {tol} outside (0, 1/2)")));
    }
    let classify = |p: &PartitionDistribution| Partition::ALL.into_iter().find(|&q| p.prob(q) > 1.0 - tol);
    let mut trajectory = vec![*p0];
    let mut limit = classify(p0);
    while limit.is_none() && trajectory.len() <= n_steps {
        let next = theta_sigma(trajectory.last().expect("nonempty"));
        limit = classify(&next);
        trajectory.push(next);
    }
    Ok(SigmaOrbit {
        steps: trajectory.len() - 1,
        trajectory,
        limit,
    })
}
