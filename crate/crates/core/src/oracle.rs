//! Black-box embedding access and wrappers around it.

use std::cell::RefCell;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::defense::add_laplace;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::models::{GraphEncoder, TrainedEncoder};
use crate::scalar::Scalar;

/// Anything that releases one embedding per queried graph.
pub trait EmbeddingOracle<T: Scalar> {
    fn embedding_dim(&self) -> usize;

    fn query(&self, g: &Graph) -> Result<Array1<T>>;

    fn query_all(&self, graphs: &[Graph]) -> Result<Array2<T>> {
        let mut out = Array2::zeros((graphs.len(), self.embedding_dim()));
        for (i, g) in graphs.iter().enumerate() {
            let h = self.query(g)?;
            if h.len() != self.embedding_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.embedding_dim(),
                    actual: h.len(),
                });
            }
            out.row_mut(i).assign(&h);
        }
        Ok(out)
    }
}

impl<T: Scalar> EmbeddingOracle<T> for GraphEncoder<T> {
    fn embedding_dim(&self) -> usize {
        GraphEncoder::embedding_dim(self)
    }

    fn query(&self, g: &Graph) -> Result<Array1<T>> {
        self.encode(g)
    }
}

impl<T: Scalar> EmbeddingOracle<T> for TrainedEncoder<T> {
    fn embedding_dim(&self) -> usize {
        TrainedEncoder::embedding_dim(self)
    }

    fn query(&self, g: &Graph) -> Result<Array1<T>> {
        self.encode(g)
    }
}

/// Releases embeddings perturbed with Laplace(0, β) noise; draws follow query order.
pub struct NoisyOracle<'a, O> {
    inner: &'a O,
    beta: f64,
    rng: RefCell<ChaCha8Rng>,
}

impl<'a, O> NoisyOracle<'a, O> {
    pub fn new(inner: &'a O, beta: f64, seed: u64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("Laplace scale {beta} must be non-negative")));
        }
        Ok(NoisyOracle {
            inner,
            beta,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        })
    }
}

impl<T: Scalar, O: EmbeddingOracle<T>> EmbeddingOracle<T> for NoisyOracle<'_, O> {
    fn embedding_dim(&self) -> usize {
        self.inner.embedding_dim()
    }

    fn query(&self, g: &Graph) -> Result<Array1<T>> {
        let h = self.inner.query(g)?;
        add_laplace(&h, self.beta, &mut *self.rng.borrow_mut())
    }
}

/// Records the dataset source index of every queried graph.
pub struct AccessLog<'a, O> {
    inner: &'a O,
    seen: RefCell<Vec<Option<usize>>>,
}

impl<'a, O> AccessLog<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        AccessLog {
            inner,
            seen: RefCell::new(Vec::new()),
        }
    }

    pub fn sources(&self) -> Vec<Option<usize>> {
        self.seen.borrow().clone()
    }

    /// Fails if any queried graph came from a dataset index outside `allowed`.
    pub fn assert_only(&self, allowed: &[usize]) -> Result<()> {
        for s in self.seen.borrow().iter() {
            match s {
                Some(i) if allowed.contains(i) => {}
                Some(i) => return Err(Error::InvalidArgument(format!("leakage: graph {i} queried outside allowed split"))),
                None => return Err(Error::InvalidArgument("leakage: query without a source index".into())),
            }
        }
        Ok(())
    }
}

impl<T: Scalar, O: EmbeddingOracle<T>> EmbeddingOracle<T> for AccessLog<'_, O> {
    fn embedding_dim(&self) -> usize {
        self.inner.embedding_dim()
    }

    fn query(&self, g: &Graph) -> Result<Array1<T>> {
        self.seen.borrow_mut().push(g.source());
        self.inner.query(g)
    }
}
