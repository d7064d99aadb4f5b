use std::rc::Rc;

use ndarray::{Array1, Array2, Axis};

use super::config::PoolingKind;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{mean_aggregator, Csr, Neighborhood, Tape, Var};
use crate::scalar::Scalar;

const SQRT_FLOOR: f64 = 1e-12;

/// Adjacency seen by one pooling level.
#[derive(Clone, Debug)]
pub(crate) enum Structure<T> {
    /// An input graph: normalised and raw sparse adjacency plus constants.
    Input {
        mean: Rc<Csr<T>>,
        raw: Rc<Csr<T>>,
        degree: Array2<T>,
        /// `‖A‖²_F`, i.e. twice the edge count.
        sq_norm: T,
    },
    /// A coarsened weighted adjacency on the tape.
    Coarse(Var),
}

impl<T: Scalar> Structure<T> {
    pub(crate) fn input(g: &Graph) -> Self {
        let n = g.node_count();
        let raw_rows = (0..n).map(|u| g.neighbors(u).iter().map(|&v| (v, T::one())).collect()).collect();
        let degree = Array2::from_shape_fn((n, 1), |(u, _)| T::of_usize(g.degree(u)));
        Structure::Input {
            mean: Rc::new(mean_aggregator(g)),
            raw: Rc::new(Csr::from_rows(n, raw_rows)),
            degree,
            sq_norm: T::of_usize(2 * g.edge_count()),
        }
    }

    pub(crate) fn neighborhood(&self) -> Neighborhood<T> {
        match self {
            Structure::Input { mean, .. } => Neighborhood::Sparse(mean.clone()),
            Structure::Coarse(a) => Neighborhood::Dense(*a),
        }
    }
}

/// Result of one coarsening step on the tape.
pub(crate) struct PoolStep {
    pub h: Var,
    pub adj: Var,
    /// DiffPool: (link, entropy); MinCutPool: (cut, orthogonality).
    pub terms: (Var, Var),
}

fn guarded_sqrt<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    let x = tape.clamp_min(x, T::of(SQRT_FLOOR));
    tape.sqrt(x)
}

/// `H' = SᵀH`, `A' = SᵀAS` and the auxiliary terms of `kind` for a row-stochastic `s`.
pub(crate) fn pool_step<T: Scalar>(
    tape: &mut Tape<T>,
    kind: PoolingKind,
    h: Var,
    structure: &Structure<T>,
    s: Var,
) -> PoolStep {
    let (n, m) = tape.value(s).dim();
    let a_s = match structure {
        Structure::Input { raw, .. } => tape.sparse_matmul(raw.clone(), s),
        Structure::Coarse(a) => tape.matmul(*a, s),
    };
    let st = tape.transpose(s);
    let adj = tape.matmul(st, a_s);
    let h_new = tape.matmul(st, h);
    let s_as = tape.mul(s, a_s);
    let tr_sas = tape.sum(s_as);
    let sts = tape.matmul(st, s);
    let sts_sq = tape.square(sts);
    let sts_sq = tape.sum(sts_sq);

    let terms = match kind {
        PoolingKind::DiffPool => {
            let a_norm = match structure {
                Structure::Input { sq_norm, .. } => tape.constant_scalar(*sq_norm),
                Structure::Coarse(a) => {
                    let sq = tape.square(*a);
                    tape.sum(sq)
                }
            };
            let cross = tape.scale(tr_sas, T::of(-2.0));
            let link = tape.add(a_norm, cross);
            let link = tape.add(link, sts_sq);
            let link = guarded_sqrt(tape, link);
            let link = tape.scale(link, T::one() / T::of_usize(n * n));
            let logs = tape.add_scalar(s, T::of(1e-15));
            let logs = tape.log(logs);
            let plogp = tape.mul(s, logs);
            let ent = tape.sum(plogp);
            let ent = tape.scale(ent, -T::one() / T::of_usize(n));
            (link, ent)
        }
        PoolingKind::MinCutPool => {
            let deg = match structure {
                Structure::Input { degree, .. } => tape.leaf(degree.clone()),
                Structure::Coarse(a) => tape.row_sums(*a),
            };
            let s2 = tape.square(s);
            let s2 = tape.row_sums(s2);
            let vol = tape.mul(s2, deg);
            let vol = tape.sum(vol);
            let vol = tape.clamp_min(vol, T::of(SQRT_FLOOR));
            let cut = tape.div(tr_sas, vol);
            let cut = tape.scale(cut, -T::one());
            let norm = guarded_sqrt(tape, sts_sq);
            let one = tape.constant_scalar(T::one());
            let inv = tape.div(one, norm);
            let normed = tape.mul_scalar(sts, inv);
            let eye = tape.leaf(Array2::eye(m) / T::of_usize(m).sqrt());
            let diff = tape.sub(normed, eye);
            let diff = tape.square(diff);
            let diff = tape.sum(diff);
            let ortho = guarded_sqrt(tape, diff);
            (cut, ortho)
        }
        PoolingKind::MeanPool => unreachable!("mean pooling has no coarsening step"),
    };
    PoolStep {
        h: h_new,
        adj,
        terms,
    }
}

/// Auxiliary losses of one hierarchical pooling step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AuxLosses<T> {
    DiffPool { link: T, entropy: T },
    MinCut { cut: T, orthogonality: T },
}

impl<T: Scalar> AuxLosses<T> {
    pub fn total(&self) -> T {
        match *self {
            AuxLosses::DiffPool { link, entropy } => link + entropy,
            AuxLosses::MinCut { cut, orthogonality } => cut + orthogonality,
        }
    }
}

/// Output of [`hierarchical_pool_layer`].
#[derive(Clone, Debug, PartialEq)]
pub struct Coarsened<T> {
    pub h: Array2<T>,
    pub adj: Array2<T>,
    pub aux: AuxLosses<T>,
}

/// One DiffPool or MinCutPool coarsening of `(h, adj)` under assignment `s` (n×m).
pub fn hierarchical_pool_layer<T: Scalar>(
    h: &Array2<T>,
    adj: &Array2<T>,
    s: &Array2<T>,
    kind: PoolingKind,
) -> Result<Coarsened<T>> {
    let (n, m) = s.dim();
    if kind == PoolingKind::MeanPool {
        return Err(Error::InvalidArgument("mean pooling is not hierarchical".into()));
    }
    if h.nrows() != n || adj.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: h.nrows(),
        });
    }
    if m >= n {
        return Err(Error::InvalidArgument(format!("{m} clusters for {n} nodes; need m < n")));
    }
    let mut tape = Tape::new();
    let hv = tape.leaf(h.clone());
    let av = tape.leaf(adj.clone());
    let sv = tape.leaf(s.clone());
    let out = pool_step(&mut tape, kind, hv, &Structure::Coarse(av), sv);
    let (a, b) = (tape.scalar(out.terms.0), tape.scalar(out.terms.1));
    let aux = match kind {
        PoolingKind::DiffPool => AuxLosses::DiffPool { link: a, entropy: b },
        _ => AuxLosses::MinCut {
            cut: a,
            orthogonality: b,
        },
    };
    Ok(Coarsened {
        h: tape.value(out.h).clone(),
        adj: tape.value(out.adj).clone(),
        aux,
    })
}

/// Column-wise mean of node embeddings.
pub fn mean_pool<T: Scalar>(h: &Array2<T>) -> Result<Array1<T>> {
    h.mean_axis(Axis(0)).ok_or(Error::Empty("mean pooling over zero nodes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn ring4() -> Array2<f64> {
        Graph::unlabeled(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap().adjacency_matrix()
    }

    #[test]
    fn mean_pool_examples() {
        assert_eq!(mean_pool(&array![[0.0, 2.0], [2.0, 0.0]]).unwrap(), array![1.0, 1.0]);
        assert_eq!(mean_pool(&array![[3.0, 4.0], [3.0, 4.0]]).unwrap(), array![3.0, 4.0]);
        assert!(mean_pool(&Array2::<f64>::zeros((0, 2))).is_err());
    }

    #[test]
    fn single_cluster_sums_rows() {
        let h = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let s = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let out = hierarchical_pool_layer(&h, &ring4(), &s, PoolingKind::DiffPool).unwrap();
        assert_eq!(out.h.row(0), array![16.0, 20.0]);
        assert_eq!(out.h.row(1), array![0.0, 0.0]);
    }

    #[test]
    fn ring_pairs_coarsen_by_hand() {
        let s = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let h = Array2::<f64>::ones((4, 1));
        let out = hierarchical_pool_layer(&h, &ring4(), &s, PoolingKind::MinCutPool).unwrap();
        assert_eq!(out.adj, array![[2.0, 2.0], [2.0, 2.0]]);
        // tr(SᵀAS) = 4, tr(SᵀDS) = 8
        match out.aux {
            AuxLosses::MinCut { cut, orthogonality } => {
                assert_abs_diff_eq!(cut, -0.5, epsilon = 1e-12);
                assert_abs_diff_eq!(orthogonality, 0.0, epsilon = 1e-5);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn diffpool_terms_match_dense_formulas() {
        let a = ring4();
        let s = array![[0.7, 0.3], [0.6, 0.4], [0.2, 0.8], [0.5, 0.5]];
        let out = hierarchical_pool_layer(&Array2::ones((4, 1)), &a, &s, PoolingKind::DiffPool).unwrap();
        let link = (&a - &s.dot(&s.t())).mapv(|x| x * x).sum().sqrt() / 16.0;
        let ent = -s.mapv(|p: f64| p * (p + 1e-15).ln()).sum() / 4.0;
        match out.aux {
            AuxLosses::DiffPool { link: l, entropy: e } => {
                assert_abs_diff_eq!(l, link, epsilon = 1e-12);
                assert_abs_diff_eq!(e, ent, epsilon = 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let s = Array2::<f64>::eye(4);
        assert!(hierarchical_pool_layer(&Array2::ones((4, 1)), &ring4(), &s, PoolingKind::DiffPool).is_err());
    }

    #[test]
    fn consistent_permutation_preserves_coarsening() {
        let a = ring4();
        let h = array![[1.0, 0.5], [2.0, -1.0], [0.0, 3.0], [4.0, 1.0]];
        let s = array![[0.7, 0.3], [0.6, 0.4], [0.2, 0.8], [0.5, 0.5]];
        let perm = [2usize, 0, 3, 1];
        let mut pa = Array2::zeros((4, 4));
        let mut ph = Array2::zeros((4, 2));
        let mut ps = Array2::zeros((4, 2));
        for i in 0..4 {
            ph.row_mut(perm[i]).assign(&h.row(i));
            ps.row_mut(perm[i]).assign(&s.row(i));
            for j in 0..4 {
                pa[[perm[i], perm[j]]] = a[[i, j]];
            }
        }
        let x = hierarchical_pool_layer(&h, &a, &s, PoolingKind::DiffPool).unwrap();
        let y = hierarchical_pool_layer(&ph, &pa, &ps, PoolingKind::DiffPool).unwrap();
        let close = |a: &Array2<f64>, b: &Array2<f64>| (a - b).iter().all(|d| d.abs() < 1e-12);
        assert!(close(&x.h, &y.h));
        assert!(close(&x.adj, &y.adj));
    }
}
