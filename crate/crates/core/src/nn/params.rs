use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use crate::scalar::Scalar;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct Param<T> {
    name: String,
    value: Array2<T>,
}

/// Named trainable matrices of one model component.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform `rows×cols` matrix.
    pub fn add_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| T::of(rng.random_range(-a..a)));
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Places every parameter on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        Bound {
            vars: self.params.iter().map(|p| tape.leaf(p.value.clone())).collect(),
        }
    }

    /// Zero gradient buffers shaped like the parameters.
    pub fn zeros_like(&self) -> Vec<Array2<T>> {
        self.params.iter().map(|p| Array2::zeros(p.value.dim())).collect()
    }

    /// True when every entry of every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|x| x.is_finite()))
    }
}

/// Tape handles of a bound [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Adds this binding's gradients into `acc`.
    pub fn accumulate<T: Scalar>(&self, grads: &Gradients<T>, acc: &mut [Array2<T>]) {
        for (v, a) in self.vars.iter().zip(acc.iter_mut()) {
            if let Some(g) = grads.get(*v) {
                *a += g;
            }
        }
    }
}

/// Adam optimiser state for one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParamStore<T>, lr: T) -> Self {
        Adam {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            m: store.zeros_like(),
            v: store.zeros_like(),
        }
    }

    /// One update with `grads` scaled by `scale` (e.g. `1 / batch`).
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Array2<T>], scale: T) {
        assert_eq!(grads.len(), store.len(), "one gradient per parameter");
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = &mut store.params[i].value;
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                let g = g * scale;
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p = *p - self.lr * mh / (vh.sqrt() + self.eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", array![[3.0, -2.0]]);
        let mut opt = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let mut tape = Tape::new();
            let b = store.bind(&mut tape);
            let sq = tape.square(b.var(w));
            let loss = tape.sum(sq);
            let grads = tape.backward(loss);
            let mut acc = store.zeros_like();
            b.accumulate(&grads, &mut acc);
            opt.step(&mut store, &acc, 1.0);
        }
        assert!(store.get(w).iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn glorot_bounds_and_serde_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f32>::new();
        let id = store.add_glorot("w", 10, 20, &mut rng);
        let a = (6.0f32 / 30.0).sqrt();
        assert!(store.get(id).iter().all(|x| x.abs() <= a));
        let json = serde_json::to_string(&store).unwrap();
        let back: ParamStore<f32> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.name(id), "w");
    }
}
