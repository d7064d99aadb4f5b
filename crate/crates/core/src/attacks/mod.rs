//! Inference attacks against released graph embeddings.

pub mod matching;
pub mod property;
pub mod reconstruction;
pub mod subgraph;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-dimension standardisation fitted on the attacker's training embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    mean: Array1<T>,
    scale: Array1<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(rows: &Array2<T>) -> Result<Self> {
        let mean = rows.mean_axis(Axis(0)).ok_or(Error::Empty("standardiser fit on no rows"))?;
        let var = rows.var_axis(Axis(0), T::zero());
        let floor = T::of(1e-6);
        let scale = var.mapv(|v| {
            let s = v.sqrt();
            if s > floor {
                s
            } else {
                T::one()
            }
        });
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_rows(&self, rows: &Array2<T>) -> Result<Array2<T>> {
        if rows.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rows.ncols(),
            });
        }
        Ok((rows - &self.mean) / &self.scale)
    }

    pub fn apply(&self, h: &Array1<T>) -> Result<Array1<T>> {
        let m = self.apply_rows(&h.clone().insert_axis(Axis(0)))?;
        Ok(m.row(0).to_owned())
    }
}

pub(crate) fn check_finite<T: Scalar>(h: &Array1<T>) -> Result<()> {
    if h.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("non-finite embedding".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardises_columns() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.apply_rows(&x).unwrap(), array![[-1.0, 0.0], [1.0, 0.0]]);
        assert!(s.apply(&array![1.0]).is_err());
    }
}
