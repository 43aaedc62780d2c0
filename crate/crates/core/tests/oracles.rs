//! Cross-checks against independently written reference computations.

use hiermetric::brickgraph::{enumerate_simple_paths, theta_exact, BrickGraph, PathFunctional, ThetaPolynomial};
use hiermetric::geometry::{cascade_io_distances, verify_cascade, LeafLaw};
use hiermetric::dist::FactorLaw;
use hiermetric::rng::StreamKey;
use hiermetric::sierpinski::{
    glue_partitions, r3_eval, theta_sigma, theta_sigma_orbit, Partition, PartitionDistribution, TriangleState,
};
use rand::Rng;

fn pf(name: &str) -> PathFunctional {
    enumerate_simple_paths(&BrickGraph::preset(name).unwrap()).unwrap()
}

const B1: usize = 0;
const B2: usize = 1;
const B3: usize = 2;
const M12: usize = 3;
const M23: usize = 4;
const M31: usize = 5;

/// Each small copy is the large triangle shrunk towards one corner, so its
/// own corners keep the orientation of the large one.
const COPIES: [[usize; 3]; 3] = [[B1, M12, M31], [M12, B2, M23], [M31, M23, B3]];

fn shortest_paths(t: [&TriangleState; 3]) -> [[f64; 6]; 6] {
    let mut d = [[f64::INFINITY; 6]; 6];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0.0;
    }
    for (copy, tri) in COPIES.iter().zip(t) {
        let sides = [(0, 1, tri.x), (1, 2, tri.y), (2, 0, tri.z)];
        for (a, b, len) in sides {
            let (u, v) = (copy[a], copy[b]);
            d[u][v] = d[u][v].min(len);
            d[v][u] = d[v][u].min(len);
        }
    }
    for k in 0..6 {
        for i in 0..6 {
            for j in 0..6 {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

fn random_triangle<R: Rng>(rng: &mut R) -> TriangleState {
    let mut side = || rng.random_range(-2.0..2.0f64).exp();
    let (a, b, c) = (side(), side(), side());
    TriangleState::new(a + b, b + c, c + a).unwrap()
}

#[test]
fn r3_matches_shortest_paths() {
    let mut rng = StreamKey::new(1).rng();
    for _ in 0..10_000 {
        let t: Vec<TriangleState> = (0..3).map(|_| random_triangle(&mut rng)).collect();
        // the copy at B3 is the first argument, the copy at B1 the second
        let out = r3_eval(&t[2], &t[0], &t[1], 1.0, 1.0, None);
        let d = shortest_paths([&t[0], &t[1], &t[2]]);
        for (got, want) in [(out.x, d[B1][B2]), (out.y, d[B2][B3]), (out.z, d[B3][B1])] {
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
    }
}

fn connected(links: &[(usize, usize)]) -> [[bool; 6]; 6] {
    let mut c = [[false; 6]; 6];
    for (v, row) in c.iter_mut().enumerate() {
        row[v] = true;
    }
    for &(a, b) in links {
        c[a][b] = true;
        c[b][a] = true;
    }
    for k in 0..6 {
        for i in 0..6 {
            for j in 0..6 {
                c[i][j] |= c[i][k] && c[k][j];
            }
        }
    }
    c
}

/// Which corner pairs of a copy are joined inside it.
fn joined(p: Partition) -> [bool; 3] {
    // (corner1, corner2), (corner2, corner3), (corner3, corner1)
    match p {
        Partition::Singletons => [false, false, false],
        Partition::Pair12 => [true, false, false],
        Partition::Pair23 => [false, true, false],
        Partition::Pair31 => [false, false, true],
        Partition::Together => [true, true, true],
    }
}

fn oracle_glue(parts: [Partition; 3]) -> Partition {
    let mut links = Vec::new();
    for (copy, p) in COPIES.iter().zip(parts) {
        for (k, on) in joined(p).into_iter().enumerate() {
            if on {
                links.push((copy[k], copy[(k + 1) % 3]));
            }
        }
    }
    let c = connected(&links);
    match (c[B1][B2], c[B2][B3], c[B3][B1]) {
        (true, true, true) => Partition::Together,
        (true, false, false) => Partition::Pair12,
        (false, true, false) => Partition::Pair23,
        (false, false, true) => Partition::Pair31,
        (false, false, false) => Partition::Singletons,
        other => panic!("inconsistent connectivity {other:?}"),
    }
}

/// Copy order in the library: at B3, at B1, at B2.
fn library_order(parts: [Partition; 3]) -> [Partition; 3] {
    [parts[2], parts[0], parts[1]]
}

#[test]
fn glue_table_matches_union_oracle() {
    for a in Partition::ALL {
        for b in Partition::ALL {
            for c in Partition::ALL {
                assert_eq!(glue_partitions(library_order([a, b, c])), oracle_glue([a, b, c]), "{a:?} {b:?} {c:?}");
            }
        }
    }
}

fn oracle_theta(p: &PartitionDistribution) -> [f64; 5] {
    let w = p.as_array();
    let mut out = [0.0; 5];
    for (i, a) in Partition::ALL.into_iter().enumerate() {
        for (j, b) in Partition::ALL.into_iter().enumerate() {
            for (k, c) in Partition::ALL.into_iter().enumerate() {
                let r = oracle_glue([a, b, c]);
                let idx = Partition::ALL.iter().position(|&q| q == r).unwrap();
                out[idx] += w[i] * w[j] * w[k];
            }
        }
    }
    out
}

fn random_partition_law<R: Rng>(rng: &mut R) -> PartitionDistribution {
    let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut a = [0.0; 5];
    for i in 0..4 {
        a[i] = w[i] / s;
    }
    a[4] = 1.0 - a[..4].iter().sum::<f64>();
    PartitionDistribution::from_array(a).unwrap()
}

#[test]
fn theta_sigma_matches_oracle() {
    let mut rng = StreamKey::new(2).rng();
    for _ in 0..500 {
        let p = random_partition_law(&mut rng);
        let got = theta_sigma(&p).as_array();
        let want = oracle_theta(&p);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14);
        }
    }
    let pairing = oracle_theta(&PartitionDistribution::dirac(Partition::Pair12));
    assert_eq!(theta_sigma(&PartitionDistribution::dirac(Partition::Pair12)).as_array(), pairing);
}

fn permute(p: &PartitionDistribution, perm: [usize; 3]) -> PartitionDistribution {
    let pair_of = |a: usize, b: usize| match (a.min(b), a.max(b)) {
        (0, 1) => 1,
        (1, 2) => 2,
        (0, 2) => 3,
        _ => unreachable!(),
    };
    let w = p.as_array();
    let mut out = [0.0; 5];
    out[0] = w[0];
    out[4] = w[4];
    out[pair_of(perm[0], perm[1])] = w[1];
    out[pair_of(perm[1], perm[2])] = w[2];
    out[pair_of(perm[2], perm[0])] = w[3];
    PartitionDistribution::from_array(out).unwrap()
}

#[test]
fn theta_sigma_commutes_with_corner_permutations() {
    let perms = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]];
    let mut rng = StreamKey::new(3).rng();
    for _ in 0..200 {
        let p = random_partition_law(&mut rng);
        for perm in perms {
            let a = theta_sigma(&permute(&p, perm)).as_array();
            let b = permute(&theta_sigma(&p), perm).as_array();
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn racket_bound_along_orbits() {
    let racket = ThetaPolynomial::new(&pf("racket"));
    for i in 0..=100 {
        let q = i as f64 / 100.0;
        assert!((racket.eval(q) - q * q * (2.0 - q)).abs() < 1e-12);
    }
    let mut rng = StreamKey::new(4).rng();
    for _ in 0..200 {
        let orbit = theta_sigma_orbit(&random_partition_law(&mut rng), 200, 1e-9).unwrap();
        assert!(orbit.limit.is_some());
        for w in orbit.trajectory.windows(2) {
            assert!(w[1].q1() <= racket.eval(w[0].q1()) + 1e-12);
        }
    }
}

#[test]
fn theta_polynomial_matches_brute_force() {
    for name in ["eight", "diamond", "racket", "interval2", "parallel2", "interval-3"] {
        let g = BrickGraph::preset(name).unwrap();
        let poly = ThetaPolynomial::new(&enumerate_simple_paths(&g).unwrap());
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            assert!((poly.eval(p) - theta_exact(&g, p).unwrap()).abs() < 1e-12, "{name} at {p}");
        }
    }
}

#[test]
fn cascade_recursions_on_several_bricks() {
    for name in ["eight", "diamond", "racket"] {
        let pf = pf(name);
        let t = cascade_io_distances(&pf, &FactorLaw::lognormal(0.5), 0.5, 5, &LeafLaw::Unit, StreamKey::new(5)).unwrap();
        let check = verify_cascade(&pf, &t);
        assert_eq!(check.combination_mismatches, 0);
        assert!(check.intrinsic_rel_error < 1e-12, "{name}: {}", check.intrinsic_rel_error);
    }
}
