use ndarray::Array2;

use super::Graph;

/// Replaces node features with a `(max_degree + 1)`-dim one-hot of each
/// node's degree. Degrees above `max_degree` clamp into the last slot.
pub fn degree_onehot_features(g: &Graph, max_degree: usize) -> Graph {
    let mut feats = Array2::zeros((g.node_count(), max_degree + 1));
    for u in 0..g.node_count() {
        feats[[u, g.degree(u).min(max_degree)]] = 1.0;
    }
    g.clone()
        .with_features(feats)
        .expect("row count preserved")
}

/// Largest node degree over a collection of graphs.
pub fn max_degree<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> usize {
    graphs
        .into_iter()
        .flat_map(|g| g.degrees())
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onehot_index(g: &Graph, u: usize) -> usize {
        let row = g.features().row(u);
        assert_eq!(row.sum(), 1.0);
        row.iter().position(|&x| x == 1.0).unwrap()
    }

    #[test]
    fn triangle_rows_hit_index_two() {
        let g = Graph::unlabeled(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let f = degree_onehot_features(&g, 3);
        assert_eq!(f.feature_dim(), 4);
        assert!((0..3).all(|u| onehot_index(&f, u) == 2));
    }

    #[test]
    fn isolated_node_hits_index_zero() {
        let g = Graph::unlabeled(2, &[]).unwrap();
        let f = degree_onehot_features(&g, 2);
        assert_eq!(onehot_index(&f, 0), 0);
    }

    #[test]
    fn star_center_and_leaves() {
        let g = Graph::unlabeled(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let f = degree_onehot_features(&g, 4);
        assert_eq!(onehot_index(&f, 0), 4);
        assert!((1..5).all(|u| onehot_index(&f, u) == 1));
        // clamped when max_degree is too small
        let c = degree_onehot_features(&g, 2);
        assert_eq!(onehot_index(&c, 0), 2);
        assert_eq!(max_degree([&g]), 4);
    }
}
