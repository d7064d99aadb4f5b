use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::Error;

/// Global graph properties targeted by the property-inference attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphProperty {
    NumNodes,
    NumEdges,
    Density,
    Diameter,
    Radius,
}

impl GraphProperty {
    pub const ALL: [GraphProperty; 5] = [
        GraphProperty::NumNodes,
        GraphProperty::NumEdges,
        GraphProperty::Density,
        GraphProperty::Diameter,
        GraphProperty::Radius,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphProperty::NumNodes => "num_nodes",
            GraphProperty::NumEdges => "num_edges",
            GraphProperty::Density => "density",
            GraphProperty::Diameter => "diameter",
            GraphProperty::Radius => "radius",
        }
    }

    /// Diameter and radius are taken over the largest connected component.
    pub fn compute(self, g: &Graph) -> f64 {
        let n = g.node_count();
        match self {
            GraphProperty::NumNodes => n as f64,
            GraphProperty::NumEdges => g.edge_count() as f64,
            GraphProperty::Density => {
                if n > 1 {
                    2.0 * g.edge_count() as f64 / (n * (n - 1)) as f64
                } else {
                    0.0
                }
            }
            GraphProperty::Diameter => eccentricity_extremes(g).map_or(0.0, |(_, max)| max as f64),
            GraphProperty::Radius => eccentricity_extremes(g).map_or(0.0, |(min, _)| min as f64),
        }
    }
}

impl fmt::Display for GraphProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphProperty::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown graph property {s:?}")))
    }
}

/// Hop distances from `src`; `None` for unreachable nodes.
pub fn bfs_distances(g: &Graph, src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    let mut queue = VecDeque::from([src]);
    dist[src] = Some(0);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Connected components, each sorted, ordered by their smallest node.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Largest connected component; ties go to the component listed first.
pub fn largest_component(g: &Graph) -> Vec<usize> {
    connected_components(g)
        .into_iter()
        .fold(Vec::new(), |best, c| if c.len() > best.len() { c } else { best })
}

/// (radius, diameter) over the largest connected component.
fn eccentricity_extremes(g: &Graph) -> Option<(usize, usize)> {
    let comp = largest_component(g);
    comp.iter()
        .map(|&u| bfs_distances(g, u).into_iter().flatten().max().unwrap_or(0))
        .fold(None, |acc, e| match acc {
            None => Some((e, e)),
            Some((lo, hi)) => Some((lo.min(e), hi.max(e))),
        })
}
