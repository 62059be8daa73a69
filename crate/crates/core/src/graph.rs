//! Construction and analysis of r-regular graphs: random generation via the
//! pairing model, all-pairs BFS distances, distance-shell boundaries, and the
//! Cheeger constant (exact and heuristic).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Distance value used for unreachable vertex pairs.
pub const UNREACHABLE: u16 = u16::MAX;

/// Default cap on full-restart rounds of the pairing model.
pub const DEFAULT_RETRY_LIMIT: usize = 100_000;

/// Subset-enumeration budget for the exact Cheeger modes.
pub const CHEEGER_EXACT_MAX_N: usize = 24;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("n*r must be even (got n={n}, r={r})")]
    InvalidParity { n: usize, r: usize },
    #[error("degree r={r} must satisfy 3 <= r < n (n={n})")]
    DegreeOutOfRange { n: usize, r: usize },
    #[error("pairing model failed to produce a simple graph after {attempts} restarts")]
    RetryLimitExceeded { attempts: usize },
    #[error("operation requires a nonempty vertex set")]
    EmptySet,
    #[error("exact computation only supported up to n={max} (got n={n})")]
    BudgetExceeded { n: usize, max: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

/// A simple r-regular graph on vertices `0..n`.
///
/// Invariants (enforced at construction): no loops, no multi-edges, every
/// vertex has degree exactly `r`, adjacency lists sorted ascending, and the
/// edge list sorted lexicographically with `u < v`.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    r: usize,
    seed: u64,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an edge list, validating simplicity and r-regularity.
    pub fn from_edges(
        n: usize,
        r: usize,
        seed: u64,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        if n * r % 2 != 0 {
            return Err(GraphError::InvalidParity { n, r });
        }
        let mut sorted: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(GraphError::Invalid(format!("loop at vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(GraphError::Invalid(format!("vertex out of range in ({u},{v})")));
            }
            sorted.push((u.min(v), u.max(v)));
        }
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(GraphError::Invalid("duplicate edge".into()));
        }
        let mut adj = vec![Vec::with_capacity(r); n];
        for &(u, v) in &sorted {
            adj[u].push(v);
            adj[v].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.len() != r {
                return Err(GraphError::Invalid(format!(
                    "vertex {v} has degree {} (expected {r})",
                    list.len()
                )));
            }
        }
        Ok(Graph { n, r, seed, adj, edges: sorted })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Line-oriented text form: header `n r seed`, then one `u v` line per
    /// edge, 0-based, lexicographically sorted. Bit-exact for golden tests.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.r, self.seed);
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Parses the text form produced by [`Graph::to_text`].
    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GraphError::Parse("empty input".into()))?;
        let mut parts = header.split_whitespace();
        let mut next_num = |name: &str| -> Result<u64, GraphError> {
            parts
                .next()
                .ok_or_else(|| GraphError::Parse(format!("header missing {name}")))?
                .parse::<u64>()
                .map_err(|e| GraphError::Parse(format!("bad {name}: {e}")))
        };
        let n = next_num("n")? as usize;
        let r = next_num("r")? as usize;
        let seed = next_num("seed")?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .ok_or_else(|| GraphError::Parse("missing u".into()))?
                .parse()
                .map_err(|e| GraphError::Parse(format!("bad u: {e}")))?;
            let v: usize = it
                .next()
                .ok_or_else(|| GraphError::Parse("missing v".into()))?
                .parse()
                .map_err(|e| GraphError::Parse(format!("bad v: {e}")))?;
            edges.push((u, v));
        }
        Graph::from_edges(n, r, seed, &edges)
    }
}

/// Samples a simple r-regular graph via the pairing (configuration) model:
/// `r` half-edges per vertex are matched uniformly at random and the whole
/// matching is discarded and redrawn whenever it contains a loop or a
/// multi-edge. Identical `(n, r, seed)` reproduce the identical edge set.
pub fn generate_random_regular(n: usize, r: usize, seed: u64) -> Result<Graph, GraphError> {
    generate_random_regular_capped(n, r, seed, DEFAULT_RETRY_LIMIT)
}

/// Same as [`generate_random_regular`] with an explicit cap on restart rounds.
pub fn generate_random_regular_capped(
    n: usize,
    r: usize,
    seed: u64,
    retry_limit: usize,
) -> Result<Graph, GraphError> {
    if n * r % 2 != 0 {
        return Err(GraphError::InvalidParity { n, r });
    }
    if r < 3 || r >= n {
        return Err(GraphError::DegreeOutOfRange { n, r });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Half-edge i belongs to vertex i / r.
    let mut points: Vec<usize> = (0..n * r).collect();
    'restart: for _ in 0..retry_limit {
        // Fisher-Yates, written out so the shuffle is pinned to this code.
        for i in (1..points.len()).rev() {
            let j = rng.random_range(0..=i);
            points.swap(i, j);
        }
        let mut seen = vec![false; n * n];
        let mut edges = Vec::with_capacity(n * r / 2);
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0] / r, pair[1] / r);
            if u == v {
                continue 'restart;
            }
            let key = u.min(v) * n + u.max(v);
            if seen[key] {
                continue 'restart;
            }
            seen[key] = true;
            edges.push((u, v));
        }
        return Graph::from_edges(n, r, seed, &edges);
    }
    Err(GraphError::RetryLimitExceeded { attempts: retry_limit })
}

/// All-pairs hop distances (dense `n x n` matrix of 16-bit counts) plus the
/// diameter, computed by one BFS per source.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    n: usize,
    dist: Vec<u16>,
    diameter: u16,
    connected: bool,
}

impl DistanceOracle {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Hop distance; `UNREACHABLE` when no path exists.
    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> u16 {
        self.dist[u * self.n + v]
    }

    /// Row of distances from `u`.
    #[inline]
    pub fn row(&self, u: usize) -> &[u16] {
        &self.dist[u * self.n..(u + 1) * self.n]
    }

    /// Largest finite distance.
    pub fn diameter(&self) -> usize {
        self.diameter as usize
    }

    pub fn connected(&self) -> bool {
        self.connected
    }
}

/// BFS from every vertex. Disconnection is reported via
/// [`DistanceOracle::connected`], not treated as an error.
pub fn all_pairs_distances(g: &Graph) -> DistanceOracle {
    let n = g.n;
    let mut dist = vec![UNREACHABLE; n * n];
    dist.par_chunks_mut(n).enumerate().for_each(|(src, row)| {
        row[src] = 0;
        let mut queue = std::collections::VecDeque::with_capacity(n);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &w in g.neighbors(u) {
                if row[w] == UNREACHABLE {
                    row[w] = du + 1;
                    queue.push_back(w);
                }
            }
        }
    });
    let mut diameter = 0u16;
    let mut connected = true;
    for &d in &dist {
        if d == UNREACHABLE {
            connected = false;
        } else if d > diameter {
            diameter = d;
        }
    }
    DistanceOracle { n, dist, diameter, connected }
}

/// Upper bound on the diameter of a random r-regular graph:
/// `ceil((ln((2+eps) r) + ln(n ln n)) / ln(r-1) + 1)` (natural logs).
/// Holds with high probability for large n; at desk scale it is a diagnostic.
pub fn diameter_upper_bound(n: usize, r: usize, eps: f64) -> Result<usize, GraphError> {
    if r < 3 {
        return Err(GraphError::Domain(format!("r={r} must be >= 3")));
    }
    if !(0.0..1.0).contains(&eps) || eps <= 0.0 {
        return Err(GraphError::Domain(format!("eps={eps} must lie in (0,1)")));
    }
    if n < 2 {
        return Err(GraphError::Domain(format!("n={n} must be >= 2")));
    }
    let nf = n as f64;
    let rf = r as f64;
    let value = (((2.0 + eps) * rf).ln() + (nf * nf.ln()).ln()) / (rf - 1.0).ln() + 1.0;
    Ok(value.ceil() as usize)
}

/// Per-distance boundary counts: `count(i)` is the number of vertex pairs at
/// distance exactly `i` with one endpoint on each side (set mode), or the
/// number of `U`-vertices at distance exactly `i` from a fixed vertex
/// (vertex mode).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryReport {
    counts: Vec<u64>,
}

impl BoundaryReport {
    /// Count at distance `i` (1-based); zero beyond the stored range.
    pub fn count(&self, i: usize) -> u64 {
        if i == 0 || i > self.counts.len() {
            0
        } else {
            self.counts[i - 1]
        }
    }

    /// Classical edge boundary, i.e. the distance-1 count.
    pub fn edge_boundary(&self) -> u64 {
        self.count(1)
    }

    /// Counts indexed from distance 1.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Set mode: counts of cross pairs `(x in A, y not in A)` at each distance
/// `1..=diameter`. `a[v]` marks membership of vertex `v` in `A`.
pub fn shell_boundary(g: &Graph, d: &DistanceOracle, a: &[bool]) -> Result<BoundaryReport, GraphError> {
    assert_eq!(a.len(), g.n, "membership slice must have length n");
    if a.iter().all(|&m| !m) {
        return Err(GraphError::EmptySet);
    }
    let mut counts = vec![0u64; d.diameter().max(1)];
    for x in 0..g.n {
        if !a[x] {
            continue;
        }
        let row = d.row(x);
        for y in 0..g.n {
            if !a[y] && row[y] != UNREACHABLE && row[y] > 0 {
                counts[row[y] as usize - 1] += 1;
            }
        }
    }
    Ok(BoundaryReport { counts })
}

/// Vertex mode: counts of `U`-vertices at each distance `1..=diameter` from
/// `x`. Pairs with `x` itself never occur (distance 0 is excluded), so
/// passing a `U` containing `x` counts `U \ {x}`.
pub fn vertex_shell_counts(d: &DistanceOracle, x: usize, u: &[bool]) -> BoundaryReport {
    let mut counts = vec![0u64; d.diameter().max(1)];
    let row = d.row(x);
    for y in 0..d.n() {
        if y != x && u[y] && row[y] != UNREACHABLE && row[y] > 0 {
            counts[row[y] as usize - 1] += 1;
        }
    }
    BoundaryReport { counts }
}

/// Which minimization the Cheeger computation runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheegerMode {
    /// Exact minimum of `|boundary(A)|/|A|` over all nonempty `A` with `|A| <= n/2`.
    ExactHalfOrLess,
    /// Exact minimum restricted to `|A| = floor(n/2)`.
    ExactExactHalf,
    /// Randomized swap local search; returns a best-found upper bound.
    Heuristic,
}

/// Result of a Cheeger computation: the ratio as an exact fraction, its
/// floating value, and an attaining (or best-found) witness set.
#[derive(Debug, Clone)]
pub struct CheegerResult {
    pub value: f64,
    pub cut: u64,
    pub size: u64,
    pub witness: Vec<usize>,
    pub mode: CheegerMode,
}

/// Edge-expansion (isoperimetric) constant. Exact modes enumerate subsets in
/// Gray-code order with incremental cut updates and are capped at
/// `CHEEGER_EXACT_MAX_N` vertices; the heuristic mode runs a seeded
/// multi-start swap local search and only ever over-estimates the constant.
pub fn cheeger(g: &Graph, mode: CheegerMode) -> Result<CheegerResult, GraphError> {
    cheeger_seeded(g, mode, 0)
}

/// [`cheeger`] with an explicit seed for the heuristic mode.
pub fn cheeger_seeded(g: &Graph, mode: CheegerMode, seed: u64) -> Result<CheegerResult, GraphError> {
    match mode {
        CheegerMode::Heuristic => Ok(cheeger_heuristic(g, seed)),
        CheegerMode::ExactHalfOrLess | CheegerMode::ExactExactHalf => {
            if g.n > CHEEGER_EXACT_MAX_N {
                return Err(GraphError::BudgetExceeded { n: g.n, max: CHEEGER_EXACT_MAX_N });
            }
            Ok(cheeger_exact(g, mode))
        }
    }
}

fn cheeger_exact(g: &Graph, mode: CheegerMode) -> CheegerResult {
    let n = g.n;
    let exact_half = mode == CheegerMode::ExactExactHalf;
    let target = n / 2;
    // Gray-code walk over all subsets; flipping one vertex updates the cut in O(r).
    let mut in_a = vec![false; n];
    let mut cut: i64 = 0;
    let mut size: usize = 0;
    let mut best: Option<(u64, u64, u64)> = None; // (cut, size, mask)
    let mut mask: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let bit = k.trailing_zeros() as usize;
        let entering = !in_a[bit];
        for &w in g.neighbors(bit) {
            if in_a[w] == entering {
                cut -= 1;
            } else {
                cut += 1;
            }
        }
        in_a[bit] = entering;
        mask ^= 1 << bit;
        size = if entering { size + 1 } else { size - 1 };
        let admissible = if exact_half { size == target } else { size >= 1 && size <= target };
        if admissible {
            let (c, s) = (cut as u64, size as u64);
            // Compare c/s < bc/bs exactly via cross-multiplication.
            let better = match best {
                None => true,
                Some((bc, bs, _)) => c * bs < bc * s,
            };
            if better {
                best = Some((c, s, mask));
            }
        }
    }
    let (cut, size, mask) = best.expect("n >= 2 guarantees an admissible subset");
    let witness = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
    CheegerResult { value: cut as f64 / size as f64, cut, size, witness, mode }
}

fn cut_of(g: &Graph, in_a: &[bool]) -> u64 {
    g.edges.iter().filter(|&&(u, v)| in_a[u] != in_a[v]).count() as u64
}

fn cheeger_heuristic(g: &Graph, seed: u64) -> CheegerResult {
    let n = g.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes: Vec<usize> = (1..=(n / 2).min(6)).collect();
    for s in [n / 2, n / 3, n / 4] {
        if s >= 1 && !sizes.contains(&s) {
            sizes.push(s);
        }
    }
    sizes.sort_unstable();
    let starts = 4;
    let mut best: Option<(u64, u64, Vec<bool>)> = None;
    for &size in &sizes {
        for _ in 0..starts {
            // Random initial A of the given size.
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let mut in_a = vec![false; n];
            for &v in order.iter().take(size) {
                in_a[v] = true;
            }
            let mut cut = cut_of(g, &in_a);
            // Steepest-descent swaps at fixed |A| until no swap lowers the ratio.
            loop {
                let mut improvement: Option<(usize, usize, u64)> = None;
                for u in 0..n {
                    if !in_a[u] {
                        continue;
                    }
                    for v in 0..n {
                        if in_a[v] {
                            continue;
                        }
                        let mut delta: i64 = 0;
                        for &w in g.neighbors(u) {
                            delta += if in_a[w] && w != v { 1 } else { -1 };
                        }
                        for &w in g.neighbors(v) {
                            if w == u {
                                delta += 1; // u has left A by the time v enters
                            } else {
                                delta += if in_a[w] && w != u { -1 } else { 1 };
                            }
                        }
                        let cand = (cut as i64 + delta) as u64;
                        if cand < improvement.map_or(cut, |b| b.2) {
                            improvement = Some((u, v, cand));
                        }
                    }
                }
                match improvement {
                    Some((u, v, c)) => {
                        in_a[u] = false;
                        in_a[v] = true;
                        cut = c;
                    }
                    None => break,
                }
            }
            let better = match &best {
                None => true,
                Some((bc, bs, _)) => cut * bs < bc * size as u64,
            };
            if better {
                best = Some((cut, size as u64, in_a.clone()));
            }
        }
    }
    let (cut, size, in_a) = best.expect("at least one size class is explored");
    let witness = (0..n).filter(|&v| in_a[v]).collect();
    CheegerResult { value: cut as f64 / size as f64, cut, size, witness, mode: CheegerMode::Heuristic }
}

/// Theoretical lower bound `r/2 - sqrt(ln 2) sqrt(r)` on the Cheeger constant
/// of a random r-regular graph (holds w.h.p.; diagnostic at desk scale).
pub fn cheeger_lower_bound(r: usize) -> f64 {
    let rf = r as f64;
    rf / 2.0 - (2.0f64.ln()).sqrt() * rf.sqrt()
}

/// Theoretical upper bound `r/2 - C sqrt(r)` on the Cheeger constant with a
/// configurable constant `C` (see [`DEFAULT_CHEEGER_C`]).
pub fn cheeger_upper_bound(r: usize, c: f64) -> f64 {
    let rf = r as f64;
    rf / 2.0 - c * rf.sqrt()
}

/// Default constant for [`cheeger_upper_bound`]: slightly above
/// `sqrt(ln 2) - 2 sqrt(3)/5`, the smallest value for which the explicit
/// communication-height bound goes through.
pub fn default_cheeger_c() -> f64 {
    (2.0f64.ln()).sqrt() - 2.0 * 3.0f64.sqrt() / 5.0 + 1e-3
}

/// Outcome of testing `|shell_i(A)| <= (r-1)^(i-1) |shell_1(A)|` per distance.
/// Violations are reported, never asserted: the inequality is a structural
/// diagnostic, not an invariant of every regular graph.
#[derive(Debug, Clone)]
pub struct ShellInequalityReport {
    pub checks: Vec<ShellInequalityCheck>,
}

#[derive(Debug, Clone, Copy)]
pub struct ShellInequalityCheck {
    pub distance: usize,
    pub shell_count: u64,
    pub bound: f64,
    pub ok: bool,
}

impl ShellInequalityReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.ok).count()
    }
}

/// Checks the geometric shell-growth inequality for every distance.
pub fn check_shell_inequality(
    g: &Graph,
    d: &DistanceOracle,
    a: &[bool],
) -> Result<ShellInequalityReport, GraphError> {
    let report = shell_boundary(g, d, a)?;
    let edge = report.edge_boundary();
    let mut checks = Vec::new();
    for i in 1..=d.diameter() {
        let bound = ((g.r - 1) as f64).powi(i as i32 - 1) * edge as f64;
        let shell = report.count(i);
        checks.push(ShellInequalityCheck {
            distance: i,
            shell_count: shell,
            bound,
            ok: shell as f64 <= bound,
        });
    }
    Ok(ShellInequalityReport { checks })
}

/// Loads one of the named deterministic test graphs: `k4`, `k33`, `petersen`,
/// `prism`, `mobius-kantor`.
pub fn fixture(name: &str) -> Result<Graph, GraphError> {
    let canonical = name.to_ascii_lowercase().replace(['_', ' '], "-");
    match canonical.as_str() {
        "k4" => {
            let edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
            Graph::from_edges(4, 3, 0, &edges)
        }
        "k33" => {
            let mut edges = Vec::new();
            for u in 0..3 {
                for v in 3..6 {
                    edges.push((u, v));
                }
            }
            Graph::from_edges(6, 3, 0, &edges)
        }
        "petersen" => {
            let mut edges = Vec::new();
            for i in 0..5 {
                edges.push((i, (i + 1) % 5)); // outer cycle
                edges.push((i, i + 5)); // spokes
                edges.push((5 + i, 5 + (i + 2) % 5)); // inner pentagram
            }
            Graph::from_edges(10, 3, 0, &edges)
        }
        "prism" => {
            let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)];
            Graph::from_edges(6, 3, 0, &edges)
        }
        "mobius-kantor" => {
            let mut edges = Vec::new();
            for i in 0..8 {
                edges.push((i, (i + 1) % 8)); // outer cycle
                edges.push((i, i + 8)); // spokes
                edges.push((8 + i, 8 + (i + 3) % 8)); // inner star
            }
            Graph::from_edges(16, 3, 0, &edges)
        }
        _ => Err(GraphError::UnknownFixture(name.into())),
    }
}

/// Names accepted by [`fixture`], in a stable order.
pub const FIXTURE_NAMES: [&str; 5] = ["k4", "k33", "petersen", "prism", "mobius-kantor"];
