//! Undirected, unweighted, attributed graphs and the datasets that hold them.

mod bucket;
mod features;
pub mod generators;
mod properties;
mod split;
mod tudataset;

pub use bucket::{BinningStrategy, BucketScheme};
pub use features::{degree_onehot_features, max_degree};
pub use properties::{
    bfs_distances, connected_components, largest_component, GraphProperty,
};
pub use split::{split_dataset, DataSplit, MIN_SPLIT_SIZE};
pub use tudataset::load_tudataset;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A simple undirected graph with a node-feature matrix and a class label.
///
/// Adjacency is stored as sorted neighbour lists; the dense symmetric matrix
/// is available through [`Graph::adjacency_matrix`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    features: Array2<f64>,
    label: usize,
    /// Index of the dataset graph this graph is (derived from), when known.
    source: Option<usize>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate edges collapse;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn new(
        node_count: usize,
        edges: &[(usize, usize)],
        features: Array2<f64>,
        label: usize,
    ) -> Result<Self> {
        if features.nrows() != node_count {
            return Err(Error::InvalidGraph(format!(
                "feature rows {} != node count {}",
                features.nrows(),
                node_count
            )));
        }
        let mut neighbors = vec![Vec::new(); node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph {
            neighbors,
            features,
            label,
            source: None,
        })
    }

    /// Structure-only graph with a single constant feature per node.
    pub fn unlabeled(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Graph::new(node_count, edges, Array2::ones((node_count, 1)), 0)
    }

    /// Builds a graph from a dense 0/1 adjacency matrix (upper triangle is read).
    pub fn from_adjacency(adj: &Array2<f64>, features: Array2<f64>, label: usize) -> Result<Self> {
        let n = adj.nrows();
        if adj.ncols() != n {
            return Err(Error::InvalidGraph("adjacency is not square".into()));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if adj[[i, j]] != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, &edges, features, label)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Number of undirected edges, each counted once.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let n = self.node_count();
        let mut adj = Array2::zeros((n, n));
        for (u, list) in self.neighbors.iter().enumerate() {
            for &v in list {
                adj[[u, v]] = 1.0;
            }
        }
        adj
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn source(&self) -> Option<usize> {
        self.source
    }

    pub fn with_source(mut self, source: usize) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.node_count() {
            return Err(Error::InvalidGraph(format!(
                "feature rows {} != node count {}",
                features.nrows(),
                self.node_count()
            )));
        }
        self.features = features;
        Ok(self)
    }

    /// Node-induced subgraph on `nodes`; node `nodes[i]` becomes node `i`.
    /// Keeps features, label and source of `self`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.node_count()];
        for (i, &u) in nodes.iter().enumerate() {
            index[u] = i;
        }
        let neighbors = nodes
            .iter()
            .map(|&u| {
                let mut list: Vec<usize> = self.neighbors[u]
                    .iter()
                    .filter_map(|&v| (index[v] != usize::MAX).then_some(index[v]))
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        Graph {
            neighbors,
            features: self.features.select(Axis(0), nodes),
            label: self.label,
            source: self.source,
        }
    }

    /// Relabels nodes so that old node `u` becomes `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        let mut inverse = vec![0; n];
        for (u, &p) in perm.iter().enumerate() {
            inverse[p] = u;
        }
        let neighbors = inverse
            .iter()
            .map(|&u| {
                let mut list: Vec<usize> = self.neighbors[u].iter().map(|&v| perm[v]).collect();
                list.sort_unstable();
                list
            })
            .collect();
        Ok(Graph {
            neighbors,
            features: self.features.select(Axis(0), &inverse),
            label: self.label,
            source: self.source,
        })
    }

    /// Drops nodes with no incident edges.
    pub fn without_isolated(&self) -> Graph {
        let keep: Vec<usize> = (0..self.node_count()).filter(|&u| self.degree(u) > 0).collect();
        self.induced_subgraph(&keep)
    }
}

/// An ordered collection of graphs sharing one feature dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        let name = name.into();
        if let Some(first) = graphs.first() {
            let d = first.feature_dim();
            if let Some(g) = graphs.iter().find(|g| g.feature_dim() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: g.feature_dim(),
                });
            }
        }
        if let Some(g) = graphs.iter().find(|g| g.label() >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {} >= num_classes {num_classes} in dataset {name}",
                g.label()
            )));
        }
        Ok(GraphDataset {
            name,
            graphs,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, Graph::feature_dim)
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::node_count).max().unwrap_or(0)
    }

    pub fn avg_nodes(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(Graph::node_count).sum::<usize>() as f64 / self.len() as f64
    }

    pub fn avg_edges(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(Graph::edge_count).sum::<usize>() as f64 / self.len() as f64
    }

    /// Graphs at `indices`, cloned, in that order.
    pub fn select(&self, indices: &[usize]) -> Vec<Graph> {
        indices.iter().map(|&i| self.graphs[i].clone()).collect()
    }
}
