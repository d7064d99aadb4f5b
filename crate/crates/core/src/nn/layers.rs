use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Bound, ParamId, ParamStore};
use super::sparse::Csr;
use super::tape::{Tape, Var};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Affine map `x·W + b` over rows of `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    w: ParamId,
    b: Option<ParamId>,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add_glorot(format!("{name}.weight"), in_dim, out_dim, rng);
        let b = bias.then(|| store.add_zeros(format!("{name}.bias"), 1, out_dim));
        Linear { in_dim, out_dim, w, b }
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> Option<ParamId> {
        self.b
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Var {
        let y = tape.matmul(x, p.var(self.w));
        match self.b {
            Some(b) => tape.add_row(y, p.var(b)),
            None => y,
        }
    }
}

/// Stack of [`Linear`] layers with ReLU between them and no output activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, hidden.., out]`.
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, p, h);
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        h
    }
}

/// Neighbourhood operator for mean aggregation.
#[derive(Clone, Debug)]
pub enum Neighborhood<T> {
    /// Row-normalised adjacency of an input graph.
    Sparse(Rc<Csr<T>>),
    /// Weighted adjacency of a coarsened graph living on the tape.
    Dense(Var),
}

impl<T: Scalar> Neighborhood<T> {
    pub fn of_graph(g: &Graph) -> Self {
        Neighborhood::Sparse(Rc::new(mean_aggregator(g)))
    }

    /// `mean_{v∈N(u)} h_v` per row; isolated rows get zeros.
    pub fn aggregate(&self, tape: &mut Tape<T>, h: Var) -> Var {
        match self {
            Neighborhood::Sparse(m) => tape.sparse_matmul(m.clone(), h),
            Neighborhood::Dense(a) => {
                let ah = tape.matmul(*a, h);
                let deg = tape.row_sums(*a);
                let deg = tape.clamp_min(deg, T::one());
                tape.div_rows(ah, deg)
            }
        }
    }
}

/// `D⁻¹A` for an input graph, with zero rows for isolated nodes.
pub fn mean_aggregator<T: Scalar>(g: &Graph) -> Csr<T> {
    let rows = (0..g.node_count())
        .map(|u| {
            let nb = g.neighbors(u);
            let w = T::one() / T::of_usize(nb.len().max(1));
            nb.iter().map(|&v| (v, w)).collect()
        })
        .collect();
    Csr::from_rows(g.node_count(), rows)
}

/// `H' = W_self·H + W_neigh·mean_neigh(H)` before the nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SageLayer {
    lin_self: Linear,
    lin_neigh: Linear,
}

impl SageLayer {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        SageLayer {
            lin_self: Linear::new(store, &format!("{name}.self"), in_dim, out_dim, true, rng),
            lin_neigh: Linear::new(store, &format!("{name}.neigh"), in_dim, out_dim, false, rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.lin_self.out_dim
    }

    pub fn self_weight(&self) -> ParamId {
        self.lin_self.weight()
    }

    pub fn self_bias(&self) -> Option<ParamId> {
        self.lin_self.bias()
    }

    pub fn neigh_weight(&self) -> ParamId {
        self.lin_neigh.weight()
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, h: Var, nb: &Neighborhood<T>) -> Var {
        let own = self.lin_self.forward(tape, p, h);
        let agg = nb.aggregate(tape, h);
        let msg = self.lin_neigh.forward(tape, p, agg);
        tape.add(own, msg)
    }
}
