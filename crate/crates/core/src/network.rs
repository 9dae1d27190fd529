//! Undirected simple networks: edge-list IO and k-regular generation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Undirected simple graph over units `0..n`.
///
/// Neighbour lists are strictly increasing, symmetric, and loop-free.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    adjacency: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from an edge list, symmetrising and deduplicating.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::usage(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::usage(format!("self-loop at unit {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`; requires `n >= 3`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::usage("a cycle needs at least 3 units"));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, unit: usize) -> &[usize] {
        &self.adjacency[unit]
    }

    pub fn degree(&self, unit: usize) -> usize {
        self.adjacency[unit].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Sorted `{unit} ∪ N(unit)`.
    pub fn closed_neighborhood(&self, unit: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree(unit) + 1);
        let mut inserted = false;
        for &j in &self.adjacency[unit] {
            if !inserted && unit < j {
                out.push(unit);
                inserted = true;
            }
            out.push(j);
        }
        if !inserted {
            out.push(unit);
        }
        out
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Serialises to the edge-list format accepted by [`load_network`].
    ///
    /// The leading `# n=<count>` directive preserves trailing isolated units.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# n={}", self.n()).unwrap();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    pub fn check_invariants(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(i, list)| {
            list.windows(2).all(|w| w[0] < w[1])
                && list.iter().all(|&j| j != i && j < self.n() && self.has_edge(j, i))
        })
    }
}

/// Parses an edge list: one `u v` pair per line, 0-based, `#` comments.
///
/// The unit count is one more than the largest index seen, unless a
/// `# n=<count>` comment line raises it.
pub fn load_network(text: &str) -> Result<Network> {
    let mut edges = Vec::new();
    let mut n = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(count) = comment.trim().strip_prefix("n=") {
                let count: usize = count.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad unit-count directive {line:?}"),
                })?;
                n = n.max(count);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected two indices, got {line:?}"),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid unit index {tok:?}"),
            })
        };
        let u = parse(fields.next())?;
        let v = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("trailing fields in {line:?}"),
            });
        }
        if u == v {
            return Err(Error::Parse {
                line: line_no,
                message: format!("self-loop at unit {u}"),
            });
        }
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v));
    }
    Network::from_edges(n, &edges)
}

const MAX_RESTARTS: usize = 1_000;

/// Seeded simple `k`-regular graph on `n` units.
///
/// Stubs are paired one at a time, each pair drawn uniformly among the
/// remaining stubs and accepted only if it adds neither a loop nor a
/// repeated edge. When no admissible pair remains the attempt restarts,
/// up to a fixed budget.
pub fn gen_k_regular(n: usize, k: usize, seed: u64) -> Result<Network> {
    if k >= n {
        return Err(Error::usage(format!("degree k = {k} must be below n = {n}")));
    }
    if !(n * k).is_multiple_of(2) {
        return Err(Error::usage(format!("n * k = {} is odd; no {k}-regular graph on {n} units", n * k)));
    }
    for attempt in 0..MAX_RESTARTS {
        let mut rng = substream(seed, attempt as u64);
        if let Some(adj) = try_pairing(n, k, &mut rng) {
            let mut adjacency = adj;
            for list in &mut adjacency {
                list.sort_unstable();
            }
            return Ok(Network { adjacency });
        }
    }
    Err(Error::Generation(format!(
        "no simple {k}-regular graph on {n} units after {MAX_RESTARTS} restarts"
    )))
}

fn try_pairing<R: Rng>(n: usize, k: usize, rng: &mut R) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|u| std::iter::repeat_n(u, k)).collect();
    stubs.shuffle(rng);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::with_capacity(k); n];
    let admissible = |adj: &Vec<Vec<usize>>, u: usize, v: usize| u != v && !adj[u].contains(&v);

    while !stubs.is_empty() {
        let mut placed = false;
        for _ in 0..64 {
            let a = rng.random_range(0..stubs.len());
            let b = rng.random_range(0..stubs.len());
            if a != b && admissible(&adjacency, stubs[a], stubs[b]) {
                take_pair(&mut stubs, &mut adjacency, a, b);
                placed = true;
                break;
            }
        }
        if placed {
            continue;
        }
        // Random probing failed; scan for any admissible pair.
        let candidates: Vec<(usize, usize)> = (0..stubs.len())
            .flat_map(|a| ((a + 1)..stubs.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| admissible(&adjacency, stubs[a], stubs[b]))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let (a, b) = candidates[rng.random_range(0..candidates.len())];
        take_pair(&mut stubs, &mut adjacency, a, b);
    }
    Some(adjacency)
}

fn take_pair(stubs: &mut Vec<usize>, adjacency: &mut [Vec<usize>], a: usize, b: usize) {
    let (u, v) = (stubs[a], stubs[b]);
    adjacency[u].push(v);
    adjacency[v].push(u);
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    stubs.swap_remove(hi);
    stubs.swap_remove(lo);
}
