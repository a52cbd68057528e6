//! In-memory datasets: sparse graphs, continuous, categorical and count tables.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple graph on `n` nodes stored as compressed adjacency lists.
///
/// Self-loops are never stored and parallel edges collapse to one.
/// Undirected graphs list every edge in both endpoints' lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_targets: Vec<u32>,
    edges: usize,
}

/// What was dropped while building a [`Graph`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphReport {
    pub self_loops: usize,
    pub duplicates: usize,
}

fn csr(n: usize, pairs: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for &(a, _) in pairs {
        offsets[a as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut targets = vec![0u32; pairs.len()];
    for &(a, b) in pairs {
        targets[fill[a as usize]] = b;
        fill[a as usize] += 1;
    }
    (offsets, targets)
}

impl Graph {
    /// Builds a graph from an edge list. Undirected edges may be listed in
    /// either or both orientations.
    pub fn from_edges<I>(n: usize, edges: I, directed: bool) -> Result<(Graph, GraphReport)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::data("graph too large"));
        }
        let mut report = GraphReport::default();
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut raw = 0usize;
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::data(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                report.self_loops += 1;
                continue;
            }
            raw += 1;
            let (a, b) = if directed || a < b { (a, b) } else { (b, a) };
            pairs.push((a as u32, b as u32));
        }
        pairs.sort_unstable();
        pairs.dedup();
        report.duplicates = raw - pairs.len();
        let edges = pairs.len();

        let graph = if directed {
            let (out_offsets, out_targets) = csr(n, &pairs);
            let mut rev: Vec<(u32, u32)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
            rev.sort_unstable();
            let (in_offsets, in_targets) = csr(n, &rev);
            Graph {
                n,
                directed,
                out_offsets,
                out_targets,
                in_offsets,
                in_targets,
                edges,
            }
        } else {
            let mut both = pairs.clone();
            both.extend(pairs.iter().map(|&(a, b)| (b, a)));
            both.sort_unstable();
            let (out_offsets, out_targets) = csr(n, &both);
            Graph {
                n,
                directed,
                out_offsets,
                out_targets,
                in_offsets: Vec::new(),
                in_targets: Vec::new(),
                edges,
            }
        };
        Ok((graph, report))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Out-neighbours (all neighbours when undirected).
    #[inline]
    pub fn out_neighbors(&self, i: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    /// In-neighbours of a directed graph; empty for undirected graphs.
    #[inline]
    pub fn in_neighbors(&self, i: usize) -> &[u32] {
        if self.directed {
            &self.in_targets[self.in_offsets[i]..self.in_offsets[i + 1]]
        } else {
            &[]
        }
    }

    /// Each edge once: `(i, j)` with `i < j` when undirected.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.out_neighbors(i)
                .iter()
                .map(move |&j| (i, j as usize))
                .filter(move |&(i, j)| self.directed || i < j)
        })
    }

    /// Whether every directed edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        if !self.directed {
            return true;
        }
        (0..self.n).all(|i| {
            let mut a: Vec<u32> = self.out_neighbors(i).to_vec();
            let mut b: Vec<u32> = self.in_neighbors(i).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        })
    }

    /// Undirected version (edges OR-ed over both orientations).
    pub fn to_undirected(&self) -> Graph {
        if !self.directed {
            return self.clone();
        }
        Graph::from_edges(self.n, self.edges(), false)
            .expect("edges already validated")
            .0
    }
}

/// Dense `n × p` real matrix with column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousData {
    pub names: Vec<String>,
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl ContinuousData {
    pub fn new(names: Vec<String>, n: usize, values: Vec<f64>) -> Result<Self> {
        let p = names.len();
        if values.len() != n * p {
            return Err(Error::data(format!(
                "expected {} values for a {n}x{p} table, got {}",
                n * p,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("continuous data must be finite"));
        }
        Ok(ContinuousData { names, n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::data("ragged rows"));
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(names, rows.len(), rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for i in 0..self.n {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n.max(1) as f64);
        m
    }

    /// Unbiased column variances (zero when `n < 2`).
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        let mut v = vec![0.0; self.p];
        for i in 0..self.n {
            for (j, x) in self.row(i).iter().enumerate() {
                v[j] += (x - means[j]).powi(2);
            }
        }
        if self.n < 2 {
            return vec![0.0; self.p];
        }
        v.iter_mut().for_each(|x| *x /= (self.n - 1) as f64);
        v
    }
}

/// Categorical table with modalities coded `0..d_j` per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalData {
    pub names: Vec<String>,
    /// Modality labels per column, in first-appearance order.
    pub modalities: Vec<Vec<String>>,
    n: usize,
    codes: Vec<u32>,
}

impl CategoricalData {
    pub fn new(names: Vec<String>, modalities: Vec<Vec<String>>, n: usize, codes: Vec<u32>) -> Result<Self> {
        let p = names.len();
        if modalities.len() != p || codes.len() != n * p {
            return Err(Error::data("categorical table shape mismatch"));
        }
        for i in 0..n {
            for j in 0..p {
                let c = codes[i * p + j] as usize;
                if c >= modalities[j].len() {
                    return Err(Error::data(format!(
                        "unknown modality code {c} in column {} (arity {})",
                        names[j],
                        modalities[j].len()
                    )));
                }
            }
        }
        Ok(CategoricalData {
            names,
            modalities,
            n,
            codes,
        })
    }

    /// Encodes string rows, enumerating modalities by first appearance.
    pub fn from_strings(names: Vec<String>, rows: &[Vec<String>]) -> Result<Self> {
        let p = names.len();
        let mut lookup: Vec<HashMap<String, u32>> = vec![HashMap::new(); p];
        let mut modalities: Vec<Vec<String>> = vec![Vec::new(); p];
        let mut codes = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::data("ragged rows"));
            }
            for (j, v) in row.iter().enumerate() {
                let next = modalities[j].len() as u32;
                let code = *lookup[j].entry(v.clone()).or_insert_with(|| {
                    modalities[j].push(v.clone());
                    next
                });
                codes.push(code);
            }
        }
        Self::new(names, modalities, rows.len(), codes)
    }

    /// Integer codes with explicit arities; modality labels are the codes.
    pub fn from_codes(arities: &[usize], rows: &[Vec<u32>]) -> Result<Self> {
        let p = arities.len();
        let names = (1..=p).map(|j| format!("v{j}")).collect();
        let modalities = arities
            .iter()
            .map(|&d| (0..d).map(|c| c.to_string()).collect())
            .collect();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::data("ragged rows"));
        }
        Self::new(names, modalities, rows.len(), rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn arities(&self) -> Vec<usize> {
        self.modalities.iter().map(Vec::len).collect()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        let p = self.p();
        &self.codes[i * p..(i + 1) * p]
    }
}

/// Non-negative integer count matrix, stored sparsely by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountData {
    pub names: Vec<String>,
    offsets: Vec<usize>,
    entries: Vec<(u32, u64)>,
}

impl CountData {
    pub fn from_dense(names: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        let p = names.len();
        let mut offsets = vec![0];
        let mut entries = Vec::new();
        for row in rows {
            if row.len() != p {
                return Err(Error::data("ragged rows"));
            }
            entries.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(j, &c)| (j as u32, c)),
            );
            offsets.push(entries.len());
        }
        Ok(CountData {
            names,
            offsets,
            entries,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// Non-zero `(column, count)` pairs of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[(u32, u64)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn dense_row(&self, i: usize) -> Vec<u64> {
        let mut r = vec![0; self.p()];
        for &(j, c) in self.row(i) {
            r[j as usize] = c;
        }
        r
    }
}

/// Any dataset the models accept; `Views` holds several aligned datasets.
#[derive(Debug, Clone)]
pub enum Dataset {
    Graph(Graph),
    Continuous(ContinuousData),
    Categorical(CategoricalData),
    Counts(CountData),
    Views(Vec<(String, Dataset)>),
}

impl Dataset {
    /// Number of objects being clustered.
    pub fn n(&self) -> usize {
        match self {
            Dataset::Graph(g) => g.n(),
            Dataset::Continuous(d) => d.n(),
            Dataset::Categorical(d) => d.n(),
            Dataset::Counts(d) => d.n(),
            Dataset::Views(v) => v.first().map_or(0, |(_, d)| d.n()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Dataset::Graph(_) => "graph",
            Dataset::Continuous(_) => "continuous",
            Dataset::Categorical(_) => "categorical",
            Dataset::Counts(_) => "counts",
            Dataset::Views(_) => "views",
        }
    }
}
