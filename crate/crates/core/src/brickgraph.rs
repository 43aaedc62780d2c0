//! Brick graphs: the substitution unit of a hierarchical graph.
//!
//! A brick is a small multigraph with two marked vertices `I` and `O`. Its
//! simple IO-paths define the min-plus functional used by the glueing map,
//! and its bond-percolation function drives the collapse/explosion dichotomy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_EDGES: usize = 24;
pub const MAX_PATHS: usize = 1_000_000;

/// Wire format of a graph document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(rename = "in")]
    pub input: String,
    #[serde(rename = "out")]
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BrickGraph {
    vertices: Vec<String>,
    edges: Vec<(usize, usize)>,
    input: usize,
    output: usize,
}

impl BrickGraph {
    /// Builds and validates a brick from vertex names and `(tail, head)` index pairs.
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<(usize, usize)>,
        input: usize,
        output: usize,
    ) -> Result<Self> {
        let nv = vertices.len();
        if input >= nv || output >= nv {
            return Err(Error::MalformedGraph("in/out vertex out of range".into()));
        }
        if let Some(&(t, h)) = edges.iter().find(|&&(t, h)| t >= nv || h >= nv) {
            return Err(Error::MalformedGraph(format!("edge ({t}, {h}) out of range")));
        }
        if input == output {
            return Err(Error::InEqualsOut);
        }
        if edges.len() > MAX_EDGES {
            return Err(Error::Guard {
                what: "edge count",
                value: edges.len() as u128,
                limit: MAX_EDGES as u128,
            });
        }
        if edges.is_empty() {
            return Err(Error::NoPath);
        }
        let g = BrickGraph {
            vertices,
            edges,
            input,
            output,
        };
        if g.edges.len() == 1 && g.is_shortcut(0) {
            return Err(Error::SingleEdge);
        }
        let paths = g.raw_paths()?;
        if paths.is_empty() {
            return Err(Error::NoPath);
        }
        let covered = paths.iter().fold(0u32, |acc, p| acc | p);
        if let Some(e) = (0..g.edges.len()).find(|&e| covered & (1 << e) == 0) {
            return Err(Error::DanglingEdge(e));
        }
        Ok(g)
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let index = |name: &str| {
            doc.vertices
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::MalformedGraph(format!("unknown vertex {name:?}")))
        };
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = doc.vertices.iter().find(|v| !seen.insert(v.as_str())) {
            return Err(Error::MalformedGraph(format!("duplicate vertex {dup:?}")));
        }
        let edges = doc
            .edges
            .iter()
            .map(|(t, h)| Ok((index(t)?, index(h)?)))
            .collect::<Result<Vec<_>>>()?;
        BrickGraph::new(doc.vertices.clone(), edges, index(&doc.input)?, index(&doc.output)?)
    }

    /// Parses a JSON graph document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| Error::MalformedGraph(e.to_string()))?;
        BrickGraph::from_document(&doc)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(t, h)| (self.vertices[t].clone(), self.vertices[h].clone()))
                .collect(),
            input: self.vertices[self.input].clone(),
            output: self.vertices[self.output].clone(),
        }
    }

    /// Named bricks: `eight`, `diamond`, `interval2`, `interval-<d>`, `parallel2`, `racket`.
    pub fn preset(name: &str) -> Result<Self> {
        let v = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match name {
            "eight" => BrickGraph::new(v(&["I", "v", "O"]), vec![(0, 1), (0, 1), (1, 2), (1, 2)], 0, 2),
            "diamond" => BrickGraph::new(
                v(&["I", "a", "b", "O"]),
                vec![(0, 1), (1, 3), (0, 2), (2, 3)],
                0,
                3,
            ),
            "parallel2" => BrickGraph::new(v(&["I", "O"]), vec![(0, 1), (0, 1)], 0, 1),
            "racket" => BrickGraph::new(v(&["I", "v", "O"]), vec![(0, 1), (1, 2), (1, 2)], 0, 2),
            "interval2" => BrickGraph::interval(2),
            _ => match name.strip_prefix("interval-").map(str::parse::<usize>) {
                Some(Ok(d)) if d >= 2 => BrickGraph::interval(d),
                _ => Err(Error::UnknownPreset(name.to_string())),
            },
        }
    }

    /// `d` edges in series.
    pub fn interval(d: usize) -> Result<Self> {
        let mut names = vec!["I".to_string()];
        names.extend((1..d).map(|i| format!("v{i}")));
        names.push("O".to_string());
        BrickGraph::new(names, (0..d).map(|i| (i, i + 1)).collect(), 0, d)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn output(&self) -> usize {
        self.output
    }

    fn is_shortcut(&self, e: usize) -> bool {
        let (t, h) = self.edges[e];
        (t == self.input && h == self.output) || (t == self.output && h == self.input)
    }

    /// Vertex-simple IO-paths as edge bitmasks. Edges are traversed in both
    /// directions.
    fn raw_paths(&self) -> Result<Vec<u32>> {
        let nv = self.vertices.len();
        let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for (e, &(t, h)) in self.edges.iter().enumerate() {
            if t != h {
                incident[t].push((e, h));
                incident[h].push((e, t));
            }
        }
        let mut paths = Vec::new();
        let mut visited = vec![false; nv];
        // explicit stack: (vertex, next incident slot, edge mask so far)
        let mut stack: Vec<(usize, usize, u32)> = vec![(self.input, 0, 0)];
        visited[self.input] = true;
        while let Some(top) = stack.last_mut() {
            let (v, slot, mask) = *top;
            if slot == incident[v].len() {
                visited[v] = false;
                stack.pop();
                continue;
            }
            top.1 += 1;
            let (e, w) = incident[v][slot];
            if visited[w] {
                continue;
            }
            let next = mask | (1 << e);
            if w == self.output {
                paths.push(next);
                if paths.len() > MAX_PATHS {
                    return Err(Error::Guard {
                        what: "simple path count",
                        value: paths.len() as u128,
                        limit: MAX_PATHS as u128,
                    });
                }
            } else {
                visited[w] = true;
                stack.push((w, 0, next));
            }
        }
        Ok(paths)
    }

    /// Edge indices `([a, b], [c, d])` of the two parallel pairs when this
    /// brick is the figure-eight (`I =2= v =2= O`), `None` otherwise.
    pub fn eight_pairs(&self) -> Option<([usize; 2], [usize; 2])> {
        if self.edges.len() != 4 {
            return None;
        }
        let others: Vec<usize> = self
            .edges
            .iter()
            .flat_map(|&(t, h)| [t, h])
            .filter(|&x| x != self.input && x != self.output)
            .collect();
        let mid = *others.first()?;
        if others.len() != 4 || others.iter().any(|&x| x != mid) {
            return None;
        }
        let touches = |e: usize, x: usize| self.edges[e].0 == x || self.edges[e].1 == x;
        let left: Vec<usize> = (0..4).filter(|&e| touches(e, self.input)).collect();
        let right: Vec<usize> = (0..4).filter(|&e| touches(e, self.output)).collect();
        match (left.as_slice(), right.as_slice()) {
            (&[a, b], &[c, d]) => Some(([a, b], [c, d])),
            _ => None,
        }
    }
}

/// The compiled min-plus functional of a brick: the minimum over simple
/// IO-paths of the summed edge lengths.
#[derive(Clone, Debug)]
pub struct PathFunctional {
    graph: BrickGraph,
    masks: Vec<u32>,
    paths: Vec<Vec<usize>>,
    io_graph_distance: usize,
}

pub fn enumerate_simple_paths(g: &BrickGraph) -> Result<PathFunctional> {
    let mut masks = g.raw_paths()?;
    masks.sort_unstable();
    masks.dedup();
    let paths: Vec<Vec<usize>> = masks
        .iter()
        .map(|&m| (0..g.edge_count()).filter(|&e| m & (1 << e) != 0).collect())
        .collect();
    let io_graph_distance = paths.iter().map(Vec::len).min().ok_or(Error::NoPath)?;
    Ok(PathFunctional {
        graph: g.clone(),
        masks,
        paths,
        io_graph_distance,
    })
}

impl PathFunctional {
    pub fn graph(&self) -> &BrickGraph {
        &self.graph
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn io_graph_distance(&self) -> usize {
        self.io_graph_distance
    }

    /// Evaluates the functional on per-edge lengths in `[0, +inf]`.
    #[inline]
    pub fn eval(&self, lengths: &[f64]) -> f64 {
        debug_assert_eq!(lengths.len(), self.edge_count());
        let mut best = f64::INFINITY;
        for path in &self.paths {
            let mut s = 0.0;
            for &e in path {
                s += lengths[e];
            }
            if s < best {
                best = s;
            }
        }
        best
    }
}

pub fn eval_rho(pf: &PathFunctional, lengths: &[f64]) -> f64 {
    pf.eval(lengths)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLabel {
    Shortcut,
    Bridge,
    NonPivotal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphLabel {
    NonPivotal,
    HasBridge,
    HasShortcut,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClass {
    pub edges: Vec<EdgeLabel>,
    pub graph: GraphLabel,
}

pub fn classify_edges(pf: &PathFunctional) -> EdgeClass {
    let g = pf.graph();
    let on_all = pf.masks.iter().fold(u32::MAX, |acc, m| acc & m);
    let edges: Vec<EdgeLabel> = (0..g.edge_count())
        .map(|e| {
            if g.is_shortcut(e) {
                EdgeLabel::Shortcut
            } else if on_all & (1 << e) != 0 {
                EdgeLabel::Bridge
            } else {
                EdgeLabel::NonPivotal
            }
        })
        .collect();
    let graph = if edges.contains(&EdgeLabel::Shortcut) {
        GraphLabel::HasShortcut
    } else if edges.contains(&EdgeLabel::Bridge) {
        GraphLabel::HasBridge
    } else {
        GraphLabel::NonPivotal
    };
    EdgeClass { edges, graph }
}

/// Exact bond-percolation function of a brick, stored as the number of
/// connecting edge subsets of each size.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaPolynomial {
    counts: Vec<u64>,
}

impl ThetaPolynomial {
    pub fn new(pf: &PathFunctional) -> Self {
        let n = pf.edge_count();
        let mut counts = vec![0u64; n + 1];
        let masks = pf.masks();
        let g = pf.graph();
        for subset in 0u32..(1u32 << n) {
            let connected = if masks.len() <= 64 {
                masks.iter().any(|&m| m & !subset == 0)
            } else {
                connects(g, subset)
            };
            if connected {
                counts[subset.count_ones() as usize] += 1;
            }
        }
        ThetaPolynomial { counts }
    }

    /// `counts[k]`: number of `k`-edge subsets joining I to O.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn eval(&self, p: f64) -> f64 {
        let n = self.counts.len() - 1;
        let q = 1.0 - p;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| c as f64 * p.powi(k as i32) * q.powi((n - k) as i32))
            .sum()
    }

    pub fn derivative(&self, p: f64) -> f64 {
        let n = self.counts.len() - 1;
        let q = 1.0 - p;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| {
                let up = if k > 0 {
                    k as f64 * p.powi(k as i32 - 1) * q.powi((n - k) as i32)
                } else {
                    0.0
                };
                let down = if k < n {
                    (n - k) as f64 * p.powi(k as i32) * q.powi((n - k) as i32 - 1)
                } else {
                    0.0
                };
                c as f64 * (up - down)
            })
            .sum()
    }
}

fn connects(g: &BrickGraph, subset: u32) -> bool {
    let mut reach = vec![false; g.vertices.len()];
    reach[g.input] = true;
    loop {
        let mut grew = false;
        for (e, &(t, h)) in g.edges.iter().enumerate() {
            if subset & (1 << e) != 0 && reach[t] != reach[h] {
                reach[t] = true;
                reach[h] = true;
                grew = true;
            }
        }
        if reach[g.output] {
            return true;
        }
        if !grew {
            return false;
        }
    }
}

/// Probability that I and O are joined when each edge is kept independently
/// with probability `p`.
pub fn theta_exact(g: &BrickGraph, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let pf = enumerate_simple_paths(g)?;
    Ok(ThetaPolynomial::new(&pf).eval(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Attracting,
    Repelling,
    SuperAttracting,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    pub derivative: f64,
    pub stability: Stability,
}

#[derive(Clone, Debug)]
pub struct ThetaAnalysis {
    pub evaluator: ThetaPolynomial,
    pub fixed_points: Vec<FixedPoint>,
}

const FIXED_POINT_GRID: usize = 10_000;
const SUPER_ATTRACTING_TOL: f64 = 1e-6;

fn stability(derivative: f64) -> Stability {
    if derivative.abs() < SUPER_ATTRACTING_TOL {
        Stability::SuperAttracting
    } else if derivative.abs() < 1.0 {
        Stability::Attracting
    } else {
        Stability::Repelling
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    if flo.signum() == f(hi).signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// All solutions of `theta(p) = p` on `[0, 1]`, with their stability.
pub fn theta_fixed_points(g: &BrickGraph, tol: f64) -> Result<ThetaAnalysis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    let pf = enumerate_simple_paths(g)?;
    let theta = ThetaPolynomial::new(&pf);
    let f = |p: f64| theta.eval(p) - p;
    let grid: Vec<f64> = (0..=FIXED_POINT_GRID)
        .map(|i| i as f64 / FIXED_POINT_GRID as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&p| f(p)).collect();

    // 0 and 1 are always fixed.
    let mut roots = vec![0.0];
    for i in 1..FIXED_POINT_GRID {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            roots.push(grid[i]);
        } else if b != 0.0 && a.signum() != b.signum() && i + 1 < FIXED_POINT_GRID {
            roots.push(bisect(f, grid[i], grid[i + 1], tol)?);
        } else if a.abs() < values[i - 1].abs()
            && a.abs() <= b.abs()
            && a.signum() == values[i - 1].signum()
            && a.signum() == b.signum()
            && a.abs() < 1e-6
        {
            // grid tangency: refine the local minimum of |f|
            let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
            while hi - lo > tol {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1).abs() < f(m2).abs() {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let p = 0.5 * (lo + hi);
            if f(p).abs() <= tol {
                roots.push(p);
            } else if f(p).abs() < 1e-9 {
                return Err(Error::NoBracket { lo: grid[i - 1], hi: grid[i + 1] });
            }
        }
    }
    roots.push(1.0);
    let fixed_points = roots
        .into_iter()
        .map(|value| {
            let derivative = theta.derivative(value);
            FixedPoint {
                value,
                derivative,
                stability: stability(derivative),
            }
        })
        .collect();
    Ok(ThetaAnalysis {
        evaluator: theta,
        fixed_points,
    })
}
