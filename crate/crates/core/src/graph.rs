//! Undirected simple graphs, the payoff matrix `A + ½I`, maximal cliques and
//! the clique-based exit-time bounds.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{PayoffMatrix, SimplexPoint};
use crate::rng::rng_from_seed;

/// Undirected graph on vertices `0..n`. Edges are stored as sorted pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    planted: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    planted: Option<Vec<usize>>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        let mut g = Graph::from_edges(r.n, r.edges.iter().map(|e| (e[0], e[1])))?;
        if let Some(p) = r.planted {
            g.check_vertices(&p)?;
            g.planted = Some(p);
        }
        Ok(g)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            n: g.n,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
            planted: g.planted,
        }
    }
}

impl Graph {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        Ok(Graph { n, edges: BTreeSet::new(), planted: None })
    }

    /// Rejects self-loops, duplicate edges and out-of-range endpoints.
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Result<Self> {
        let mut g = Graph::empty(n)?;
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) out of range for n = {n}")));
            }
            if !g.edges.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::from_edges(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
    }

    /// Path `0 – 1 – … – (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn planted(&self) -> Option<&[usize]> {
        self.planted.as_deref()
    }

    fn check_vertices(&self, vs: &[usize]) -> Result<()> {
        match vs.iter().find(|&&v| v >= self.n) {
            Some(v) => Err(Error::InvalidGraph(format!("vertex {v} out of range for n = {}", self.n))),
            None => Ok(()),
        }
    }

    pub fn is_clique(&self, members: &[usize]) -> bool {
        members
            .iter()
            .enumerate()
            .all(|(k, &a)| members[k + 1..].iter().all(|&b| a != b && self.has_edge(a, b)))
    }

    fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.n]; self.n];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }

    /// Characteristic vector of `members`, checked to be a clique of this graph.
    pub fn clique_vector(&self, members: &[usize]) -> Result<CliqueVector> {
        self.check_vertices(members)?;
        if !self.is_clique(members) {
            return Err(Error::InvalidGraph(format!("{members:?} is not a clique")));
        }
        characteristic_vector(members, self.n)
    }

    /// Parses a whitespace-separated edge list, one `i j` pair per line.
    /// `#` starts a comment. Without `n`, the vertex count is the largest index plus one.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut max_v = None::<usize>;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: idx + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(format!("expected two vertex indices, found {:?}", line)));
            }
            let a: usize = fields[0].parse().map_err(|_| parse_err(format!("bad vertex {:?}", fields[0])))?;
            let b: usize = fields[1].parse().map_err(|_| parse_err(format!("bad vertex {:?}", fields[1])))?;
            if a == b {
                return Err(parse_err(format!("self-loop at vertex {a}")));
            }
            max_v = Some(max_v.map_or(a.max(b), |m| m.max(a).max(b)));
            pairs.push((idx + 1, a, b));
        }
        let n = match (n, max_v) {
            (Some(n), _) => n,
            (None, Some(m)) => m + 1,
            (None, None) => return Err(Error::Parse { line: 0, msg: "edge list is empty".into() }),
        };
        let mut g = Graph::empty(n)?;
        for (line, a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Parse { line, msg: format!("vertex out of range for n = {n}") });
            }
            if !g.edges.insert((a.min(b), a.max(b))) {
                return Err(Error::Parse { line, msg: format!("duplicate edge ({a},{b})") });
            }
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# n = {}\n", self.n);
        for (a, b) in self.edges() {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }
}

/// `G(n, p)`: each pair `i < j`, visited in row-major order, is kept when a
/// uniform draw in `[0, 1)` is below `p`. Exactly `n(n-1)/2` draws are made.
pub fn gnp(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut g = Graph::empty(n)?;
    let mut rng = rng_from_seed(seed);
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < p {
                g.edges.insert((i, j));
            }
        }
    }
    Ok(g)
}

/// Adds every missing edge among `members`.
pub fn plant_clique(g: &Graph, members: &[usize]) -> Result<Graph> {
    g.check_vertices(members)?;
    let mut out = g.clone();
    for (k, &a) in members.iter().enumerate() {
        for &b in &members[k + 1..] {
            if a != b {
                out.edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut planted: Vec<usize> = members.to_vec();
    planted.sort_unstable();
    planted.dedup();
    out.planted = Some(planted);
    Ok(out)
}

/// Plants a clique on vertices `0..k`.
pub fn plant_first_k(g: &Graph, k: usize) -> Result<Graph> {
    if k > g.n() {
        return Err(Error::InvalidParameter(format!("clique size {k} exceeds n = {}", g.n())));
    }
    plant_clique(g, &(0..k).collect::<Vec<_>>())
}

/// `M = A + ½I`.
pub fn payoff_from_graph(g: &Graph) -> Result<PayoffMatrix> {
    let n = g.n();
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 0.5;
    }
    for (a, b) in g.edges() {
        e[a * n + b] = 1.0;
        e[b * n + a] = 1.0;
    }
    PayoffMatrix::from_row_major(n, e)
}

/// Default output cap for [`maximal_cliques`].
pub const DEFAULT_CLIQUE_CAP: usize = 1_000_000;

/// All maximal cliques, by Bron–Kerbosch with Tomita pivoting. Each clique is
/// sorted; the list is sorted lexicographically. Fails once more than `cap`
/// cliques have been found.
pub fn maximal_cliques(g: &Graph, cap: usize) -> Result<Vec<Vec<usize>>> {
    let adj = g.adjacency();
    let mut out = Vec::new();
    let mut r = Vec::new();
    bron_kerbosch(&adj, &mut r, (0..g.n()).collect(), Vec::new(), &mut out, cap)?;
    for c in out.iter_mut() {
        c.sort_unstable();
    }
    out.sort();
    Ok(out)
}

fn bron_kerbosch(
    adj: &[Vec<bool>],
    r: &mut Vec<usize>,
    mut p: Vec<usize>,
    mut x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
) -> Result<()> {
    if p.is_empty() {
        if x.is_empty() {
            if out.len() >= cap {
                return Err(Error::CliqueCapExceeded(cap));
            }
            out.push(r.clone());
        }
        return Ok(());
    }
    // Pivot on the vertex of P ∪ X with most neighbours in P.
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&v| adj[u][v]).count())
        .expect("P is nonempty");
    let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
    for v in candidates {
        let np: Vec<usize> = p.iter().copied().filter(|&u| adj[v][u]).collect();
        let nx: Vec<usize> = x.iter().copied().filter(|&u| adj[v][u]).collect();
        r.push(v);
        bron_kerbosch(adj, r, np, nx, out, cap)?;
        r.pop();
        p.retain(|&u| u != v);
        x.push(v);
    }
    Ok(())
}

/// A clique together with its characteristic vector (mass `1/|C|` on each member).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueVector {
    pub members: Vec<usize>,
    pub point: SimplexPoint,
}

impl CliqueVector {
    pub fn n(&self) -> usize {
        self.point.dim()
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Members joined by `-`, e.g. `0-1`.
    pub fn label(&self) -> String {
        members_label(&self.members)
    }
}

pub fn members_label(members: &[usize]) -> String {
    members.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-")
}

pub fn characteristic_vector(members: &[usize], n: usize) -> Result<CliqueVector> {
    if members.is_empty() {
        return Err(Error::InvalidParameter("clique must be nonempty".into()));
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != members.len() {
        return Err(Error::InvalidParameter(format!("repeated vertex in {members:?}")));
    }
    if let Some(v) = sorted.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidParameter(format!("vertex {v} out of range for n = {n}")));
    }
    let mass = 1.0 / sorted.len() as f64;
    let mut coords = vec![0.0; n];
    for &v in &sorted {
        coords[v] = mass;
    }
    Ok(CliqueVector { members: sorted, point: SimplexPoint::from_vec_unchecked(coords) })
}

/// Characteristic vectors of every maximal clique of `g`.
pub fn maximal_clique_vectors(g: &Graph, cap: usize) -> Result<Vec<CliqueVector>> {
    maximal_cliques(g, cap)?
        .iter()
        .map(|c| characteristic_vector(c, g.n()))
        .collect()
}

/// `F(x_C) = ½(1 − 1/(2k))` for a clique of size `k` under `M = A + ½I`.
pub fn clique_potential(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidParameter("clique size must be at least 1".into()));
    }
    Ok(0.5 * (1.0 - 1.0 / (2.0 * k as f64)))
}

/// Lower bound `½ (Σ 1/m_ii)⁻¹` of `F` over the simplex.
pub fn bomze_lower_bound(m: &PayoffMatrix) -> Result<f64> {
    let diag = m.diagonal();
    if let Some(d) = diag.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter(format!("diagonal entry {d} is not positive")));
    }
    let s: f64 = diag.iter().map(|d| 1.0 / d).sum();
    Ok(0.5 / s)
}

fn check_clique_dims(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    Ok(())
}

/// `½ [(1 − 1/(2k)) − 1/(4n)]`, the exit-rate bound for a clique of size `k`
/// in a graph on `n` vertices.
///
/// The first term is `2·F(x_C)`, not `F(x_C)`, so this is not the barrier
/// `½[F(x_C) − min F]`; see [`exit_bound_consistent`] for that value.
pub fn exit_bound(n: usize, k: usize) -> Result<f64> {
    check_clique_dims(n, k)?;
    Ok(0.5 * ((1.0 - 1.0 / (2.0 * k as f64)) - 1.0 / (4.0 * n as f64)))
}

/// `½ [clique_potential(k) − 1/(4n)]`: half the gap between `F(x_C)` and the
/// simplex-wide lower bound of `F` for `M = A + ½I`.
pub fn exit_bound_consistent(n: usize, k: usize) -> Result<f64> {
    check_clique_dims(n, k)?;
    Ok(0.5 * (clique_potential(k)? - 1.0 / (4.0 * n as f64)))
}

/// `⌈2 log(n) / log(1/p)⌉`, clamped to `[1, n]`.
pub fn gnp_clique_estimate(n: usize, p: f64) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let est = (2.0 * (n as f64).ln() / (1.0 / p).ln()).ceil() as usize;
    Ok(est.clamp(1, n))
}

/// [`exit_bound`] evaluated at the typical maximum clique size of `G(n, p)`.
pub fn gnp_exit_bound(n: usize, p: f64) -> Result<f64> {
    exit_bound(n, gnp_clique_estimate(n, p)?)
}
