//! Reader for the plain-text TUDataset layout (`DS_A.txt`, `DS_graph_indicator.txt`, ...).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Graph, GraphDataset};
use crate::error::{Error, Result};

fn dataset_file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_required(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile { path: path.to_owned() });
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.exists() {
        read_required(path).map(Some)
    } else {
        Ok(None)
    }
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_field<T: std::str::FromStr>(file: &str, line: usize, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Format {
        file: file.to_owned(),
        line,
        message: format!("cannot parse {raw:?}"),
    })
}

fn parse_column<T: std::str::FromStr>(path: &Path, text: &str) -> Result<Vec<T>> {
    let file = file_label(path);
    lines(text).map(|(no, l)| parse_field(&file, no, l)).collect()
}

/// Loads dataset `name` from `root`, accepting either `root/name/name_A.txt`
/// or `root/name_A.txt`.
///
/// Node ids in the files are 1-based and global; they are remapped to 0-based
/// per-graph ids. Node features are the node attributes (if present)
/// concatenated with a one-hot encoding of the node labels (if present); with
/// neither, every node gets a single constant feature. Graph labels are mapped
/// to `0..num_classes` in ascending order of their raw values.
pub fn load_tudataset(root: impl AsRef<Path>, name: &str) -> Result<GraphDataset> {
    let root = root.as_ref();
    let nested = root.join(name);
    let dir = if dataset_file(&nested, name, "A").exists() {
        nested
    } else {
        root.to_owned()
    };

    let a_path = dataset_file(&dir, name, "A");
    let ind_path = dataset_file(&dir, name, "graph_indicator");
    let gl_path = dataset_file(&dir, name, "graph_labels");
    let nl_path = dataset_file(&dir, name, "node_labels");
    let na_path = dataset_file(&dir, name, "node_attributes");

    let a_text = read_required(&a_path)?;
    let indicator: Vec<usize> = parse_column(&ind_path, &read_required(&ind_path)?)?;
    let raw_graph_labels: Vec<i64> = parse_column(&gl_path, &read_required(&gl_path)?)?;
    let node_labels: Option<Vec<i64>> = read_optional(&nl_path)?
        .map(|t| parse_column(&nl_path, &t))
        .transpose()?;
    let node_attributes = read_optional(&na_path)?
        .map(|t| parse_attributes(&na_path, &t))
        .transpose()?;

    let num_nodes = indicator.len();
    let num_graphs = raw_graph_labels.len();
    if num_graphs == 0 {
        return Err(Error::Empty("graph labels"));
    }
    let ind_file = file_label(&ind_path);
    for (i, &gid) in indicator.iter().enumerate() {
        if gid == 0 || gid > num_graphs {
            return Err(Error::Format {
                file: ind_file.clone(),
                line: i + 1,
                message: format!("graph id {gid} outside 1..={num_graphs}"),
            });
        }
    }
    if let Some(labels) = &node_labels {
        if labels.len() != num_nodes {
            return Err(Error::Format {
                file: file_label(&nl_path),
                line: labels.len(),
                message: format!("{} node labels for {num_nodes} nodes", labels.len()),
            });
        }
    }
    if let Some(attrs) = &node_attributes {
        if attrs.nrows() != num_nodes {
            return Err(Error::Format {
                file: file_label(&na_path),
                line: attrs.nrows(),
                message: format!("{} attribute rows for {num_nodes} nodes", attrs.nrows()),
            });
        }
    }

    // per-graph local ids, in file order
    let mut local = vec![0usize; num_nodes];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    for (node, &gid) in indicator.iter().enumerate() {
        local[node] = members[gid - 1].len();
        members[gid - 1].push(node);
    }

    let a_file = file_label(&a_path);
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    let mut self_loops = 0usize;
    for (no, line) in lines(&a_text) {
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Format {
                file: a_file,
                line: no,
                message: "expected `row, col`".into(),
            });
        };
        let u: usize = parse_field(&a_file, no, a)?;
        let v: usize = parse_field(&a_file, no, b)?;
        if u == 0 || v == 0 || u > num_nodes || v > num_nodes {
            return Err(Error::Format {
                file: a_file,
                line: no,
                message: format!("dangling edge endpoint ({u}, {v}) with {num_nodes} nodes"),
            });
        }
        let (u, v) = (u - 1, v - 1);
        if indicator[u] != indicator[v] {
            return Err(Error::Format {
                file: a_file,
                line: no,
                message: format!("edge ({}, {}) crosses graphs", u + 1, v + 1),
            });
        }
        if u == v {
            self_loops += 1;
            continue;
        }
        edges[indicator[u] - 1].push((local[u], local[v]));
    }
    if self_loops > 0 {
        log::warn!("{name}: dropped {self_loops} self-loop entries");
    }

    let label_index: BTreeMap<i64, usize> = index_values(&raw_graph_labels);
    let node_label_index = node_labels.as_ref().map(|l| index_values(l));
    let n_onehot = node_label_index.as_ref().map_or(0, BTreeMap::len);
    let n_attr = node_attributes.as_ref().map_or(0, Array2::ncols);
    let d_x = if n_onehot + n_attr == 0 { 1 } else { n_attr + n_onehot };

    let mut graphs = Vec::with_capacity(num_graphs);
    for (gi, nodes) in members.iter().enumerate() {
        let mut feats = Array2::zeros((nodes.len(), d_x));
        for (li, &node) in nodes.iter().enumerate() {
            if let Some(attrs) = &node_attributes {
                feats.row_mut(li).slice_mut(ndarray::s![..n_attr]).assign(&attrs.row(node));
            }
            if let (Some(labels), Some(index)) = (&node_labels, &node_label_index) {
                feats[[li, n_attr + index[&labels[node]]]] = 1.0;
            }
            if d_x == 1 && n_attr + n_onehot == 0 {
                feats[[li, 0]] = 1.0;
            }
        }
        let label = label_index[&raw_graph_labels[gi]];
        graphs.push(Graph::new(nodes.len(), &edges[gi], feats, label)?.with_source(gi));
    }
    GraphDataset::new(name, graphs, label_index.len())
}

fn index_values(values: &[i64]) -> BTreeMap<i64, usize> {
    let mut index: BTreeMap<i64, usize> = values.iter().map(|&v| (v, 0)).collect();
    for (i, slot) in index.values_mut().enumerate() {
        *slot = i;
    }
    index
}

fn parse_attributes(path: &Path, text: &str) -> Result<Array2<f64>> {
    let file = file_label(path);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in lines(text) {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| parse_field(&file, no, f))
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format {
                    file,
                    line: no,
                    message: format!("{} attributes, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), ncols), flat).expect("rows have equal length"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, suffix: &str, body: &str) {
        fs::write(dataset_file(dir, name, suffix), body).unwrap();
    }

    #[test]
    fn minimal_single_edge() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1, 2\n2, 1\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n");
        write(dir.path(), "T", "graph_labels", "1\n");
        let ds = load_tudataset(dir.path(), "T").unwrap();
        assert_eq!(ds.len(), 1);
        let g = &ds.graphs[0];
        assert_eq!(g.node_count(), 2);
        let a = g.adjacency_matrix();
        assert_eq!((a[[0, 1]], a[[1, 0]]), (1.0, 1.0));
        assert_eq!(g.feature_dim(), 1);
        assert_eq!(ds.num_classes, 1);
    }

    #[test]
    fn remaps_ids_per_graph_and_concatenates_features() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1,2\n2,1\n3,4\n4,3\n4,5\n5,4\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n2\n2\n2\n");
        write(dir.path(), "T", "graph_labels", "-1\n1\n");
        write(dir.path(), "T", "node_labels", "0\n3\n3\n0\n7\n");
        write(dir.path(), "T", "node_attributes", "0.5, 1\n1,2\n3,4\n5,6\n7,8\n");
        let ds = load_tudataset(dir.path(), "T").unwrap();
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.feature_dim(), 2 + 3);
        let g1 = &ds.graphs[1];
        assert_eq!(g1.label(), 1);
        assert_eq!(g1.node_count(), 3);
        assert!(g1.has_edge(0, 1) && g1.has_edge(1, 2) && !g1.has_edge(0, 2));
        assert_eq!(g1.features().row(2).to_vec(), vec![7.0, 8.0, 0.0, 0.0, 1.0]);
        assert_eq!(ds.graphs[0].features().row(0).to_vec(), vec![0.5, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_mandatory_file() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1,2\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n");
        assert!(matches!(
            load_tudataset(dir.path(), "T"),
            Err(Error::MissingFile { .. })
        ));
    }

    #[test]
    fn dangling_endpoint_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1,2\n2,3\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n");
        write(dir.path(), "T", "graph_labels", "0\n");
        match load_tudataset(dir.path(), "T") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn cross_graph_edge_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1,2\n");
        write(dir.path(), "T", "graph_indicator", "1\n2\n");
        write(dir.path(), "T", "graph_labels", "0\n1\n");
        assert!(matches!(load_tudataset(dir.path(), "T"), Err(Error::Format { .. })));
    }
}
