//! Exact enumeration of the energy landscape on small instances: all 2^n
//! state energies, communication heights between states (minimax over
//! single-flip paths), stability levels, and the maximal stability level
//! with its attaining states.

use crate::graph::{DistanceOracle, Graph};
use crate::model::{energy_with_table, flip_delta_with_table, ModelParams, SpinConfiguration};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Largest instance the exact enumeration accepts (2^20 states, 8 MiB of energies).
pub const ENUMERATION_MAX_N: usize = 20;
/// Largest instance the exhaustive path oracle accepts.
pub const BRUTE_FORCE_MAX_N: usize = 4;

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("instance too large: n = {n} exceeds the cap of {max}")]
    BudgetExceeded { n: usize, max: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// All 2^n state energies, indexed by spin bitmask (bit x set = spin x plus).
#[derive(Debug, Clone)]
pub struct EnergyLandscape {
    n: usize,
    energies: Vec<f64>,
    params: ModelParams,
}

impl EnergyLandscape {
    /// Wraps a precomputed energy table; used by tests and gauge transforms.
    pub fn from_energies(n: usize, energies: Vec<f64>, params: ModelParams) -> Self {
        assert_eq!(energies.len(), 1usize << n);
        EnergyLandscape { n, energies, params }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn energy(&self, mask: u64) -> f64 {
        self.energies[mask as usize]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Mask of the all-plus state.
    pub fn full_mask(&self) -> u64 {
        (1u64 << self.n) - 1
    }
}

#[inline]
fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// Enumerates every state energy by Gray-code traversal: states are visited
/// in an order that flips one spin at a time, so each energy is one
/// local-field update away from the previous one (O(2^n * n) total).
/// The traversal is split into blocks, each re-anchored with a direct
/// energy evaluation, and blocks run in parallel.
pub fn enumerate_energies(
    g: &Graph,
    d: &DistanceOracle,
    p: &ModelParams,
) -> Result<EnergyLandscape, LandscapeError> {
    let n = g.n();
    if n > ENUMERATION_MAX_N {
        return Err(LandscapeError::BudgetExceeded { n, max: ENUMERATION_MAX_N });
    }
    let total = 1usize << n;
    let table = p.kernel.table(d.diameter(), g.r());
    let block = total.min(1 << 12);
    let blocks = total / block;

    let per_block: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let k0 = b * block;
            let mut s = SpinConfiguration::from_mask(gray(k0) as u64, n);
            let mut e = energy_with_table(g, d, &table, p.h, &s);
            let mut out = Vec::with_capacity(block);
            out.push(e);
            for k in (k0 + 1)..(k0 + block) {
                let bit = k.trailing_zeros() as usize;
                e += flip_delta_with_table(g, d, &table, p.h, &s, bit);
                s.flip(bit);
                out.push(e);
            }
            out
        })
        .collect();

    let mut energies = vec![0.0; total];
    for (b, vals) in per_block.iter().enumerate() {
        for (off, &e) in vals.iter().enumerate() {
            energies[gray(b * block + off)] = e;
        }
    }
    Ok(EnergyLandscape { n, energies, params: *p })
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    /// Unions by size; returns (surviving root, absorbed root).
    fn union(&mut self, a: u32, b: u32) -> (u32, u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        debug_assert_ne!(ra, rb);
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        (ra, rb)
    }
}

/// States sorted by (energy, mask): the insertion order of every
/// level-filtration pass. Sorting by mask inside an energy tie makes all
/// passes deterministic; the minimax value is invariant to the tie order.
fn insertion_order(l: &EnergyLandscape) -> Vec<u32> {
    let mut order: Vec<u32> = (0..l.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        l.energies[a as usize].total_cmp(&l.energies[b as usize]).then(a.cmp(&b))
    });
    order
}

/// Communication height `Phi(sigma, eta)`: the minimum over single-flip
/// paths from `sigma` to `eta` of the maximum energy along the path.
/// Computed by inserting states in increasing energy order into a union-find
/// and reporting the insertion energy at which the two arguments first
/// connect; that energy is the exact bottleneck value.
pub fn communication_height(l: &EnergyLandscape, sigma: u64, eta: u64) -> f64 {
    phi_to_set(l, sigma, |m| m == eta)
}

/// `Phi(sigma, S)` = min over members of `S` of the pairwise height, in one
/// filtration pass. `target` is a mask predicate describing `S`.
pub fn phi_to_set(l: &EnergyLandscape, sigma: u64, target: impl Fn(u64) -> bool) -> f64 {
    let n = l.n();
    let mut uf = UnionFind::new(l.len());
    let mut inserted = vec![false; l.len()];
    // has_target[root]: whether the component contains a member of S.
    let mut has_target = vec![false; l.len()];
    for &x in &insertion_order(l) {
        let xi = x as usize;
        inserted[xi] = true;
        has_target[xi] = target(x as u64);
        for b in 0..n {
            let y = x ^ (1u32 << b);
            if inserted[y as usize] {
                let (rx, ry) = (uf.find(x), uf.find(y));
                if rx != ry {
                    let (keep, gone) = uf.union(rx, ry);
                    has_target[keep as usize] |= has_target[gone as usize];
                }
            }
        }
        if inserted[sigma as usize] {
            let rs = uf.find(sigma as u32);
            if has_target[rs as usize] {
                return l.energies[xi];
            }
        }
    }
    panic!("target set is empty or unreachable in the flip graph");
}

/// Stability structure of a landscape: global minima, per-state stability
/// levels, the maximal level and its attaining states, and two
/// cross-computed heights.
#[derive(Debug, Clone, Serialize)]
pub struct LandscapeSummary {
    /// Masks of the global energy minima (exact argmin).
    pub stable: Vec<u64>,
    /// Masks attaining the maximal stability level, within relative 1e-9.
    pub metastable: Vec<u64>,
    /// Maximal stability level over non-minimal states.
    pub gamma: f64,
    /// Stability level of the all-minus state (infinite if it is a global minimum).
    pub v_all_minus: f64,
    /// `Phi(all minus, all plus)`.
    pub phi_minus_plus: f64,
    /// `Phi(m, stable set) - H(m)` for the first metastable state `m`; must
    /// agree with `gamma`.
    pub gamma_crosscheck: f64,
    /// Stability level per state, indexed by mask; global minima hold the
    /// infinite sentinel.
    #[serde(skip)]
    pub v: Vec<f64>,
}

/// Computes every stability level in one filtration pass.
///
/// `V(sigma) = Phi(sigma, {eta : H(eta) < H(sigma)}) - H(sigma)`: the least
/// extra height needed to reach somewhere strictly lower. States are
/// inserted in increasing energy order; each union-find component keeps the
/// list of its still-unresolved states, which all sit exactly at the
/// component's minimum energy. When two components merge, the one with the
/// higher minimum has its whole list resolved at the current insertion
/// energy. States never resolved are the global minima; they keep an
/// infinite sentinel and are excluded from the maximal level.
pub fn stability_levels(l: &EnergyLandscape) -> LandscapeSummary {
    let n = l.n();
    let total = l.len();
    let mut uf = UnionFind::new(total);
    let mut inserted = vec![false; total];
    let mut min_e = vec![0.0f64; total];
    let mut pending: Vec<Vec<u32>> = vec![Vec::new(); total];
    let mut v = vec![f64::INFINITY; total];

    for &x in &insertion_order(l) {
        let xi = x as usize;
        let level = l.energies[xi];
        inserted[xi] = true;
        min_e[xi] = level;
        pending[xi] = vec![x];
        for b in 0..n {
            let y = x ^ (1u32 << b);
            if !inserted[y as usize] {
                continue;
            }
            let (rx, ry) = (uf.find(x), uf.find(y));
            if rx == ry {
                continue;
            }
            let (keep, _) = uf.union(rx, ry);
            let (lo, hi) = if min_e[rx as usize] <= min_e[ry as usize] { (rx, ry) } else { (ry, rx) };
            if min_e[lo as usize] == min_e[hi as usize] {
                // Exact tie: both lists stay pending, merged small-into-large.
                let (mut a, mut b2) = (std::mem::take(&mut pending[rx as usize]),
                                       std::mem::take(&mut pending[ry as usize]));
                if a.len() < b2.len() {
                    std::mem::swap(&mut a, &mut b2);
                }
                a.extend_from_slice(&b2);
                pending[keep as usize] = a;
            } else {
                // The higher-minimum side just gained access to somewhere
                // strictly lower: its pending states resolve here.
                for s in std::mem::take(&mut pending[hi as usize]) {
                    v[s as usize] = level - l.energies[s as usize];
                }
                let lo_list = std::mem::take(&mut pending[lo as usize]);
                pending[keep as usize] = lo_list;
            }
            min_e[keep as usize] = min_e[lo as usize];
        }
    }

    // The single surviving component's pending list is the exact argmin set.
    let mut stable: Vec<u64> =
        (0..total).filter(|&m| v[m].is_infinite()).map(|m| m as u64).collect();
    stable.sort_unstable();

    let gamma = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let (gamma, metastable) = if gamma.is_finite() {
        let tol = 1e-9 * (1.0 + gamma.abs());
        let meta: Vec<u64> = (0..total)
            .filter(|&m| v[m].is_finite() && (gamma - v[m]) <= tol)
            .map(|m| m as u64)
            .collect();
        (gamma, meta)
    } else {
        (0.0, Vec::new())
    };

    let phi_minus_plus = communication_height(l, 0, l.full_mask());
    let gamma_crosscheck = match metastable.first() {
        Some(&m) => {
            let global_min = l.energies[stable[0] as usize];
            phi_to_set(l, m, |mask| l.energies[mask as usize] == global_min) - l.energy(m)
        }
        None => 0.0,
    };

    LandscapeSummary {
        stable,
        metastable,
        gamma,
        v_all_minus: v[0],
        phi_minus_plus,
        gamma_crosscheck,
        v,
    }
}

/// Exhaustive minimax oracle: depth-first search over all simple paths in
/// the single-flip state graph, tracking the running maximum and pruning
/// branches that cannot beat the best value found. Exponential; capped at
/// [`BRUTE_FORCE_MAX_N`].
pub fn brute_force_phi_oracle(
    l: &EnergyLandscape,
    sigma: u64,
    eta: u64,
) -> Result<f64, LandscapeError> {
    let n = l.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(LandscapeError::BudgetExceeded { n, max: BRUTE_FORCE_MAX_N });
    }
    let mut visited = vec![false; l.len()];
    let mut best = f64::INFINITY;
    visited[sigma as usize] = true;
    dfs(l, n, sigma, eta, l.energy(sigma), &mut visited, &mut best);
    Ok(best)
}

fn dfs(
    l: &EnergyLandscape,
    n: usize,
    cur: u64,
    target: u64,
    cur_max: f64,
    visited: &mut [bool],
    best: &mut f64,
) {
    if cur_max >= *best {
        return;
    }
    if cur == target {
        *best = cur_max;
        return;
    }
    for b in 0..n {
        let next = cur ^ (1u64 << b);
        if !visited[next as usize] {
            visited[next as usize] = true;
            dfs(l, n, next, target, cur_max.max(l.energy(next)), visited, best);
            visited[next as usize] = false;
        }
    }
}
