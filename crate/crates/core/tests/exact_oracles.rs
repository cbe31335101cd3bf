//! Independent oracles for the exhaustive enumerator.

use erw_core::{enumerate_exact, GroupPresentation, MemoryConfig};
use num_rational::Ratio;

const GROUPS: [(usize, usize); 5] = [(0, 3), (1, 1), (0, 4), (1, 2), (2, 0)];

/// Inverse table built from scratch: free generators in adjacent pairs,
/// then involutions.
fn inverse_table(d1: usize, d2: usize) -> Vec<usize> {
    let mut inv = Vec::new();
    for i in 0..d1 {
        inv.push(2 * i + 1);
        inv.push(2 * i);
    }
    for j in 0..d2 {
        inv.push(2 * d1 + j);
    }
    inv
}

struct BruteForce {
    pmf: Vec<f64>,
    speed_m1: f64,
    xi_m2: f64,
    mean_xi: f64,
}

/// Walks all `d^n` sequences one by one, reducing each word from scratch
/// and weighting it by the elephant step law written out directly.
fn brute_force(d1: usize, d2: usize, p: f64, n: usize) -> BruteForce {
    let d = 2 * d1 + d2;
    let inv = inverse_table(d1, d2);
    let escape = (d as f64 - 2.0) / d as f64;
    let mut out = BruteForce {
        pmf: vec![0.0; n + 1],
        speed_m1: 0.0,
        xi_m2: 0.0,
        mean_xi: 0.0,
    };
    for code in 0..d.pow(n as u32) {
        let mut seq = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            seq.push(c % d);
            c /= d;
        }
        let mut weight = 1.0;
        let mut word: Vec<usize> = Vec::new();
        let mut xi_sum = 0.0;
        for (k, &g) in seq.iter().enumerate() {
            if k > 0 {
                // Xi term at time k uses the state after k steps
                let ell = match word.last() {
                    Some(&top) => seq[..k].iter().filter(|&&s| s == inv[top]).count(),
                    None => 0,
                };
                let away = if word.is_empty() { 0.0 } else { 1.0 / d as f64 };
                xi_sum += ell as f64 / k as f64 - away;
                let same = seq[..k].iter().filter(|&&s| s == g).count() as f64;
                let kf = k as f64;
                weight *= same / kf * p + (kf - same) / kf * (1.0 - p) / (d as f64 - 1.0);
            } else {
                weight /= d as f64;
            }
            if word.last() == Some(&inv[g]) {
                word.pop();
            } else {
                word.push(g);
            }
        }
        let delta = word.len();
        let xi = xi_sum / n as f64;
        out.pmf[delta] += weight;
        out.speed_m1 += weight * (delta as f64 / n as f64 - escape).abs();
        out.xi_m2 += weight * xi * xi;
        out.mean_xi += weight * xi;
    }
    out
}

#[test]
fn enumerator_matches_brute_force() {
    for (d1, d2) in GROUPS {
        let pres = GroupPresentation::new(d1, d2).unwrap();
        let d = pres.degree();
        for p in [0.0, 0.3, 1.0 / d as f64, 0.5, 0.75, 1.0] {
            for n in [1, 2, 3, 5, 6] {
                let exact = enumerate_exact(&pres, &MemoryConfig::elephant(p), n, &[1.0, 2.0]).unwrap();
                let brute = brute_force(d1, d2, p, n);
                for (k, (a, b)) in exact.pmf.iter().zip(&brute.pmf).enumerate() {
                    assert!((a - b).abs() < 1e-13, "({d1},{d2}) p={p} n={n} k={k}: {a} vs {b}");
                }
                assert!((exact.speed_moments[0].value - brute.speed_m1).abs() < 1e-13);
                assert!((exact.xi_moments[1].value - brute.xi_m2).abs() < 1e-13);
                assert!((exact.mean_xi - brute.mean_xi).abs() < 1e-13);
            }
        }
    }
}

/// `P(Delta_n = k)` at `p = 1/d` from the distance chain on the tree:
/// the root always steps out, elsewhere up with probability `(d-1)/d`.
fn distance_chain(d: i64, n: usize) -> Vec<Ratio<i64>> {
    let zero = Ratio::from_integer(0);
    let mut law = vec![zero; n + 1];
    law[0] = Ratio::from_integer(1);
    let up = Ratio::new(d - 1, d);
    let down = Ratio::new(1, d);
    for _ in 0..n {
        let mut next = vec![zero; n + 1];
        for (k, &w) in law.iter().enumerate() {
            if w == zero {
                continue;
            }
            if k == 0 {
                next[1] += w;
            } else {
                next[k - 1] += w * down;
                if k < n {
                    next[k + 1] += w * up;
                }
            }
        }
        law = next;
    }
    law
}

#[test]
fn simple_random_walk_distance_law() {
    for (d1, d2) in GROUPS {
        let pres = GroupPresentation::new(d1, d2).unwrap();
        let d = pres.degree();
        for n in 1..=8 {
            let exact = enumerate_exact(&pres, &MemoryConfig::elephant(1.0 / d as f64), n, &[]).unwrap();
            let chain = distance_chain(d as i64, n);
            for (k, (a, b)) in exact.pmf.iter().zip(&chain).enumerate() {
                let b = *b.numer() as f64 / *b.denom() as f64;
                assert!((a - b).abs() < 1e-12, "({d1},{d2}) n={n} k={k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn two_step_return_closed_form() {
    // The second step undoes the first: an involution must be repeated, a
    // free generator must be replaced by its inverse.
    for (d1, d2) in [(0, 4), (1, 2), (2, 0)] {
        let pres = GroupPresentation::new(d1, d2).unwrap();
        let d = (2 * d1 + d2) as i64;
        for (num, den) in [(0, 1), (3, 10), (1, 4), (1, 2), (5, 8), (3, 4), (9, 10)] {
            let p = Ratio::new(num, den);
            let one = Ratio::from_integer(1);
            let expected = Ratio::new(d2 as i64, d) * p
                + Ratio::new(2 * d1 as i64, d) * (one - p) / Ratio::from_integer(d - 1);
            let exact = enumerate_exact(&pres, &MemoryConfig::elephant(num as f64 / den as f64), 2, &[])
                .unwrap();
            let expected = *expected.numer() as f64 / *expected.denom() as f64;
            assert!((exact.return_prob - expected).abs() < 1e-15, "({d1},{d2}) p={num}/{den}");
        }
    }
}

#[test]
fn mass_and_parity() {
    for (d1, d2) in GROUPS {
        let pres = GroupPresentation::new(d1, d2).unwrap();
        for p in [0.0, 0.3, 0.9] {
            let exact = enumerate_exact(&pres, &MemoryConfig::elephant(p), 7, &[]).unwrap();
            assert!((exact.total_mass() - 1.0).abs() < 1e-12);
            assert_eq!(exact.paths, (pres.degree() as u64).pow(7));
            if d2 == 0 {
                assert!(exact.pmf.iter().step_by(2).all(|&x| x == 0.0));
            }
        }
    }
}
