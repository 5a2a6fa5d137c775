//! Independent oracles for the acceptance suite. Everything here reproduces
//! a result by a route the library does not use: exhaustive subset
//! filtering instead of Bron–Kerbosch, unmemoized expectimax instead of
//! backward induction, Bernoulli simulation instead of the closed-form
//! completion probabilities.

use rand::Rng;

use idnc_core::graph::{IdncGraph, IndependentSet, Vertex};
use idnc_core::{ConnectivityMatrix, ImportanceMatrix, StatusMatrix};

/// Every maximal independent set by filtering all 2^|V| subsets.
pub fn brute_force_mis(g: &IdncGraph) -> Vec<IndependentSet> {
    let n = g.vertex_count();
    assert!(n <= 20, "oracle limited to tiny graphs");
    let mut sets = Vec::new();
    for bits in 0u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| bits & (1 << i) != 0).collect();
        if !g.is_independent(&members) {
            continue;
        }
        let maximal = (0..n).all(|extra| {
            members.contains(&extra) || {
                let mut grown = members.clone();
                grown.push(extra);
                !g.is_independent(&grown)
            }
        });
        if maximal {
            sets.push(IndependentSet::new(members));
        }
    }
    sets.sort_unstable();
    sets
}

/// Optimal expected cumulative distortion reduction by exhaustive recursion
/// over all depth-`slots_left` action trees.
pub fn policy_tree_value(
    f: &StatusMatrix,
    slots_left: u32,
    y: &ConnectivityMatrix,
    delta: &ImportanceMatrix,
) -> f64 {
    if slots_left == 0 {
        return 0.0;
    }
    let g = IdncGraph::build(y, f).unwrap();
    let mut best = f64::NEG_INFINITY;
    for set in brute_force_mis(&g) {
        let verts: Vec<Vertex> = g.resolve(&set);
        let mut value = 0.0;
        for succ_bits in 0u32..(1 << verts.len()) {
            let mut prob = 1.0;
            let mut next = f.clone();
            let mut gained = 0.0;
            for (idx, vert) in verts.iter().enumerate() {
                let p = y.reception(vert.tx, vert.rx);
                if succ_bits & (1 << idx) != 0 {
                    prob *= p;
                    gained += delta.value(vert.rx, vert.pkt);
                    next = next.mark_received(vert.rx, vert.pkt);
                } else {
                    prob *= 1.0 - p;
                }
            }
            if prob > 0.0 {
                value += prob * (gained + policy_tree_value(&next, slots_left - 1, y, delta));
            }
        }
        if value > best {
            best = value;
        }
    }
    best
}

/// Empirical probability that a device missing `w` packets, served once per
/// slot over a channel with erasure `eps`, finishes within `q` slots.
pub fn simulated_completion_prob(
    w: u32,
    q: u32,
    eps: f64,
    trials: u32,
    rng: &mut impl Rng,
) -> f64 {
    let mut completions = 0u32;
    for _ in 0..trials {
        let mut remaining = w;
        for _ in 0..q {
            if remaining == 0 {
                break;
            }
            if rng.gen::<f64>() >= eps {
                remaining -= 1;
            }
        }
        if remaining == 0 {
            completions += 1;
        }
    }
    completions as f64 / trials as f64
}

/// Random valid instance with links drawn at the given density.
pub fn random_instance(rng: &mut impl Rng, m: usize, n: usize) -> (ConnectivityMatrix, StatusMatrix) {
    loop {
        let mut y = vec![0.0; m * m];
        for i in 0..m {
            y[i * m + i] = 1.0;
            for k in 0..i {
                let p = if rng.gen_bool(0.7) {
                    rng.gen_range(0.1..=0.95)
                } else {
                    0.0
                };
                y[i * m + k] = p;
                y[k * m + i] = p;
            }
        }
        let mut f = vec![0u8; m * n];
        for e in f.iter_mut() {
            *e = u8::from(rng.gen_bool(0.5));
        }
        for l in 0..n {
            let k = rng.gen_range(0..m);
            f[k * n + l] = 0;
        }
        let y = ConnectivityMatrix::new(m, y).unwrap();
        if let Ok(f) = StatusMatrix::new(m, n, f) {
            return (y, f);
        }
    }
}
