//! Empirical and atomic distributions on `[0, +inf]`, factor laws, and the
//! exact pushforward of atomic laws through the glueing map.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brickgraph::PathFunctional;
use crate::error::{Error, Result};
use crate::io::{ext_real, fmt9, parse_ext, write_atomic};
use crate::rng::StreamKey;

/// Sorted sample of extended-nonnegative reals.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    p0: f64,
    pinf: f64,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidDistribution("empty sample".into()));
        }
        if let Some(x) = samples.iter().find(|x| x.is_nan() || **x < 0.0) {
            return Err(Error::InvalidDistribution(format!("sample value {x} outside [0, inf]")));
        }
        Ok(Self::from_valid(samples))
    }

    /// Caller guarantees a nonempty vector of values in `[0, inf]`.
    pub(crate) fn from_valid(mut samples: Vec<f64>) -> Self {
        debug_assert!(!samples.is_empty());
        for x in samples.iter_mut() {
            // folds -0.0 into +0.0
            *x += 0.0;
        }
        samples.sort_unstable_by(f64::total_cmp);
        let n = samples.len() as f64;
        let zeros = samples.partition_point(|&x| x == 0.0);
        let infs = samples.len() - samples.partition_point(|&x| x < f64::INFINITY);
        EmpiricalDistribution {
            samples,
            p0: zeros as f64 / n,
            pinf: infs as f64 / n,
        }
    }

    pub fn dirac(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n.max(1)])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn pinf(&self) -> f64 {
        self.pinf
    }

    /// `min{x : F(x) >= alpha}`; `alpha` is clamped into `(0, 1]`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let n = self.samples.len();
        let mut k = (alpha * n as f64).ceil().clamp(1.0, n as f64) as usize;
        while k > 1 && (k - 1) as f64 / n as f64 >= alpha {
            k -= 1;
        }
        while k < n && (k as f64) / (n as f64) < alpha {
            k += 1;
        }
        self.samples[k - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    /// Multiplies every sample by `c > 0`; `0` and `inf` are fixed.
    pub fn rescale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("rescale factor {c} must be positive")));
        }
        let samples = self.samples.iter().map(|&x| x * c).collect();
        Ok(EmpiricalDistribution {
            samples,
            p0: self.p0,
            pinf: self.pinf,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(12 * self.samples.len() + 6);
        out.push_str("value\n");
        for &x in &self.samples {
            out.push_str(&fmt9(x));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("value") => {}
            other => {
                return Err(Error::InvalidDistribution(format!(
                    "expected header \"value\", found {other:?}"
                )))
            }
        }
        let samples = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                parse_ext(l).map_err(|_| Error::InvalidDistribution(format!("bad sample {l:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::new(samples)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Walks the pooled jump points of two sorted samples, calling `f(F1, F2)`
/// with both CDFs evaluated at each point.
fn pooled_cdfs(a: &[f64], b: &[f64], mut f: impl FnMut(f64, f64)) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        f(i as f64 / na, j as f64 / nb);
    }
}

/// Kolmogorov-Smirnov distance `sup |F1 - F2|`.
pub fn ks_distance(d1: &EmpiricalDistribution, d2: &EmpiricalDistribution) -> f64 {
    let mut sup = 0.0f64;
    pooled_cdfs(&d1.samples, &d2.samples, |f1, f2| sup = sup.max((f1 - f2).abs()));
    sup
}

/// True iff `F1 >= F2 - slack` at every pooled point, i.e. `d1` lies
/// stochastically below `d2` up to `slack`.
pub fn dominates(d1: &EmpiricalDistribution, d2: &EmpiricalDistribution, slack: f64) -> bool {
    let mut ok = true;
    pooled_cdfs(&d1.samples, &d2.samples, |f1, f2| ok &= f1 >= f2 - slack);
    ok
}

/// One-sample DKW radius: `P(sup |F_n - F| > eps) <= delta`.
pub fn dkw_epsilon(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Two-sample band: sum of the one-sample radii (failure probability `<= 2 delta`).
pub fn dkw_two_sample(n1: usize, n2: usize, delta: f64) -> f64 {
    dkw_epsilon(n1, delta) + dkw_epsilon(n2, delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(with = "ext_real")]
    pub value: f64,
    pub weight: f64,
}

/// Law of the multiplicative factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FactorLaw {
    /// `exp(N(0, sigma^2))`, median 1.
    LogNormal { sigma: f64 },
    Dirac { value: f64 },
    FiniteAtoms { atoms: Vec<Atom> },
    Exponential { rate: f64 },
    /// `scale * U(0, 1]`.
    ScaledUniform { scale: f64 },
}

impl FactorLaw {
    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidLaw(format!("{what} = {x} must be positive and finite")))
            }
        };
        match self {
            FactorLaw::LogNormal { sigma } => positive("sigma", *sigma),
            FactorLaw::Dirac { value } => positive("value", *value),
            FactorLaw::Exponential { rate } => positive("rate", *rate),
            FactorLaw::ScaledUniform { scale } => positive("scale", *scale),
            FactorLaw::FiniteAtoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidLaw("no atoms".into()));
                }
                for a in atoms {
                    if !(a.value > 0.0) {
                        return Err(Error::InvalidLaw(format!("atom value {} must be > 0", a.value)));
                    }
                    if !(a.weight > 0.0 && a.weight.is_finite()) {
                        return Err(Error::InvalidLaw(format!("atom weight {} must be > 0", a.weight)));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidLaw(format!("atom weights sum to {total}")));
                }
                Ok(())
            }
        }
    }

    pub fn lognormal(sigma: f64) -> Self {
        FactorLaw::LogNormal { sigma }
    }

    pub fn dirac(value: f64) -> Self {
        FactorLaw::Dirac { value }
    }

    pub fn atoms(pairs: &[(f64, f64)]) -> Self {
        FactorLaw::FiniteAtoms {
            atoms: pairs.iter().map(|&(value, weight)| Atom { value, weight }).collect(),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FactorLaw::LogNormal { sigma } => (sigma * rng.sample::<f64, _>(StandardNormal)).exp(),
            FactorLaw::Dirac { value } => *value,
            FactorLaw::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            FactorLaw::ScaledUniform { scale } => scale * (1.0 - rng.random::<f64>()),
            FactorLaw::FiniteAtoms { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms[atoms.len() - 1].value
            }
        }
    }

    /// A draw of `log xi`; exact Gaussian for the log-normal law.
    #[inline]
    pub fn sample_log<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FactorLaw::LogNormal { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            other => other.sample(rng).ln(),
        }
    }

    /// `E xi^alpha` where a closed form is available.
    pub fn moment(&self, alpha: f64) -> Result<f64> {
        match self {
            FactorLaw::LogNormal { sigma } => Ok((alpha * alpha * sigma * sigma / 2.0).exp()),
            FactorLaw::Dirac { value } => Ok(value.powf(alpha)),
            FactorLaw::FiniteAtoms { atoms } => Ok(atoms
                .iter()
                .map(|a| a.weight * if alpha == 0.0 { 1.0 } else { a.value.powf(alpha) })
                .sum()),
            other => Err(Error::MomentNotComputable {
                law: other.to_string(),
                alpha,
            }),
        }
    }

    /// Support as weighted atoms, for the discrete variants.
    pub fn as_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            FactorLaw::Dirac { value } => Some(vec![(*value, 1.0)]),
            FactorLaw::FiniteAtoms { atoms } => Some(atoms.iter().map(|a| (a.value, a.weight)).collect()),
            _ => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match self {
            FactorLaw::Dirac { .. } => true,
            FactorLaw::FiniteAtoms { atoms } => atoms.iter().all(|a| a.value == atoms[0].value),
            _ => false,
        }
    }
}

impl fmt::Display for FactorLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorLaw::LogNormal { sigma } => write!(f, "lognormal:{}", fmt9(*sigma)),
            FactorLaw::Dirac { value } => write!(f, "dirac:{}", fmt9(*value)),
            FactorLaw::Exponential { rate } => write!(f, "exp:{}", fmt9(*rate)),
            FactorLaw::ScaledUniform { scale } => write!(f, "uniform:{}", fmt9(*scale)),
            FactorLaw::FiniteAtoms { atoms } => {
                let parts: Vec<String> = atoms
                    .iter()
                    .map(|a| format!("{}@{}", fmt9(a.value), fmt9(a.weight)))
                    .collect();
                write!(f, "atoms:{}", parts.join(","))
            }
        }
    }
}

/// Compact form used on the command line: `lognormal:0.3`, `dirac:1`,
/// `exp:2`, `uniform:2`, `atoms:1@0.5,2@0.5`.
impl FromStr for FactorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidLaw(format!("cannot parse factor law {s:?}"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let num = |t: &str| parse_ext(t).map_err(|_| bad());
        let law = match kind.trim() {
            "lognormal" => FactorLaw::LogNormal { sigma: num(arg)? },
            "dirac" => FactorLaw::Dirac { value: num(arg)? },
            "exp" | "exponential" => FactorLaw::Exponential { rate: num(arg)? },
            "uniform" => FactorLaw::ScaledUniform { scale: num(arg)? },
            "atoms" => FactorLaw::FiniteAtoms {
                atoms: arg
                    .split(',')
                    .map(|part| {
                        let (v, w) = part.split_once('@').ok_or_else(bad)?;
                        Ok(Atom {
                            value: num(v)?,
                            weight: num(w)?,
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

/// `n` independent factors; draw `i` comes from `key.with_index(i)`.
pub fn sample_factors(law: &FactorLaw, n: usize, key: StreamKey) -> Vec<f64> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| law.sample(&mut key.with_index(i).rng()))
        .collect()
}

/// Clamp applied after each glueing: `min(., A)` or `max(., a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "bound", rename_all = "kebab-case")]
pub enum Cutoff {
    Upper(f64),
    Lower(f64),
}

impl Cutoff {
    pub fn validate(&self) -> Result<()> {
        let b = self.bound();
        if b > 0.0 && b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("cutoff bound {b} must be positive and finite")))
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            Cutoff::Upper(b) | Cutoff::Lower(b) => b,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Cutoff::Upper(a) => x.min(a),
            Cutoff::Lower(a) => x.max(a),
        }
    }
}

/// `lambda * xi * rho` with the convention `0 * inf = 0`.
#[inline]
pub fn scaled_length(lambda: f64, xi: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        0.0
    } else {
        lambda * xi * rho
    }
}

pub const MAX_ATOMS: usize = 1_000_000;
pub const MAX_PUSHFORWARD_CASES: u128 = 100_000_000;

/// Finitely supported law on `[0, inf]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicDistribution {
    atoms: Vec<Atom>,
}

impl AtomicDistribution {
    /// Sorts, merges equal values and drops zero weights.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|&(_, w)| w != 0.0).collect();
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for &(v, w) in &pairs {
            if v.is_nan() || v < 0.0 || !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidDistribution(format!("bad atom ({v}, {w})")));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
        for (value, weight) in pairs {
            let value = value + 0.0;
            match atoms.last_mut() {
                Some(last) if last.value == value => last.weight += weight,
                _ => atoms.push(Atom { value, weight }),
            }
        }
        if atoms.len() > MAX_ATOMS {
            return Err(Error::Guard {
                what: "atom count",
                value: atoms.len() as u128,
                limit: MAX_ATOMS as u128,
            });
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(AtomicDistribution { atoms })
    }

    pub fn dirac(value: f64) -> Result<Self> {
        Self::new(vec![(value, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value == x).map(|a| a.weight).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.value <= x).map(|a| a.weight).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.weight;
            if u < acc {
                return a.value;
            }
        }
        self.atoms[self.atoms.len() - 1].value
    }

    pub fn sample_empirical(&self, n: usize, key: StreamKey) -> EmpiricalDistribution {
        let samples = (0..n.max(1) as u64)
            .into_par_iter()
            .map(|i| self.sample(&mut key.with_index(i).rng()))
            .collect();
        EmpiricalDistribution::from_valid(samples)
    }

    /// `sup |F_emp - F|`, evaluated on the union of jump points.
    pub fn ks_to(&self, emp: &EmpiricalDistribution) -> f64 {
        let jumps: Vec<f64> = self.atoms.iter().map(|a| a.value).collect();
        let mut sup = 0.0f64;
        for &x in jumps.iter().chain(emp.samples()) {
            sup = sup.max((self.cdf(x) - emp.cdf(x)).abs());
        }
        sup
    }
}

/// Exact law of `lambda * xi * rho(X_1, .., X_E)` (then clamped), for `X_i`
/// i.i.d. from `input` and `xi` from a discrete factor law.
pub fn exact_pushforward(
    pf: &PathFunctional,
    input: &AtomicDistribution,
    m: &FactorLaw,
    lambda: f64,
    cutoff: Option<Cutoff>,
) -> Result<AtomicDistribution> {
    m.validate()?;
    let factors = m.as_atoms().ok_or_else(|| {
        Error::InvalidLaw(format!("exact pushforward needs a discrete factor law, got {m}"))
    })?;
    if let Some(c) = cutoff {
        c.validate()?;
    }
    let e = pf.edge_count();
    let k = input.atoms.len();
    let cases = (k as u128)
        .checked_pow(e as u32)
        .and_then(|c| c.checked_mul(factors.len() as u128))
        .unwrap_or(u128::MAX);
    if cases > MAX_PUSHFORWARD_CASES {
        return Err(Error::Guard {
            what: "pushforward configurations",
            value: cases,
            limit: MAX_PUSHFORWARD_CASES,
        });
    }
    let mut acc: HashMap<u64, f64> = HashMap::new();
    let mut idx = vec![0usize; e];
    let mut lengths = vec![0.0; e];
    loop {
        let mut w = 1.0;
        for (slot, &i) in idx.iter().enumerate() {
            lengths[slot] = input.atoms[i].value;
            w *= input.atoms[i].weight;
        }
        let rho = pf.eval(&lengths);
        for &(xi, wx) in &factors {
            let mut y = scaled_length(lambda, xi, rho);
            if let Some(c) = cutoff {
                y = c.apply(y);
            }
            *acc.entry((y + 0.0).to_bits()).or_insert(0.0) += w * wx;
        }
        // odometer over edge configurations
        let mut pos = 0;
        loop {
            if pos == e {
                let pairs = acc.into_iter().map(|(b, w)| (f64::from_bits(b), w)).collect();
                return AtomicDistribution::new(pairs);
            }
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
