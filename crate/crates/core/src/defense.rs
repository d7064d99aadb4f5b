//! Laplace perturbation of released embeddings.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::attacks::property::{build_training_set, PropertyAttackModel};
use crate::attacks::reconstruction::{evaluate_reconstruction, GraphAutoEncoder};
use crate::attacks::subgraph::{generate_samples, SubgraphAttackModel};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{accuracy, SimilarityKind, Statistic};
use crate::models::TrainedEncoder;
use crate::oracle::{EmbeddingOracle, NoisyOracle};
use crate::samplers::SamplerSpec;
use crate::scalar::Scalar;

/// Scale and seed of the Laplace mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub beta: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(beta: f64, seed: u64) -> Result<Self> {
        check_beta(beta)?;
        Ok(NoiseSpec { beta, seed })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Laplace scale {beta} must be a finite non-negative number")))
    }
}

/// `n` independent Laplace(0, β) draws, as the difference of two exponentials.
pub fn laplace_noise(n: usize, beta: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let exp = Exp::new(1.0 / beta).expect("positive rate");
    Ok((0..n).map(|_| exp.sample(rng) - exp.sample(rng)).collect())
}

/// `h + Lap(β)` per coordinate; `β = 0` returns `h` unchanged.
pub fn add_laplace<T: Scalar>(h: &Array1<T>, beta: f64, rng: &mut impl Rng) -> Result<Array1<T>> {
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("cannot perturb a non-finite embedding".into()));
    }
    let noise = laplace_noise(h.len(), beta, rng)?;
    if beta == 0.0 {
        return Ok(h.clone());
    }
    Ok(Array1::from_iter(h.iter().zip(noise).map(|(&x, z)| x + T::of(z))))
}

/// Perturbs `h` with a generator seeded from `spec`.
pub fn perturb<T: Scalar>(h: &Array1<T>, spec: &NoiseSpec) -> Result<Array1<T>> {
    add_laplace(h, spec.beta, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Attacks trained on clean embeddings, evaluated against released ones.
pub struct SweepAttacks<'a, T> {
    pub property: Option<&'a PropertyAttackModel<T>>,
    pub subgraph: Option<(&'a SubgraphAttackModel<T>, SamplerSpec)>,
    pub reconstruction: Option<&'a GraphAutoEncoder<T>>,
}

impl<T> Default for SweepAttacks<'_, T> {
    fn default() -> Self {
        SweepAttacks {
            property: None,
            subgraph: None,
            reconstruction: None,
        }
    }
}

pub const CLASSIFICATION_ACCURACY: &str = "classification_accuracy";
pub const PROPERTY_ACCURACY: &str = "property_accuracy";
pub const SUBGRAPH_AUC: &str = "subgraph_auc";
pub const RECONSTRUCTION_DEGREE_COSINE: &str = "reconstruction_degree_cosine";
pub const RECONSTRUCTION_WL: &str = "reconstruction_wl";

/// Utility and attack metrics when `release` answers every query about `graphs`.
/// Classification feeds released embeddings to the target's own head.
pub fn evaluate_release<T: Scalar>(
    target: &TrainedEncoder<T>,
    release: &impl EmbeddingOracle<T>,
    attacks: &SweepAttacks<T>,
    graphs: &[Graph],
) -> Result<Vec<(String, f64)>> {
    if graphs.is_empty() {
        return Err(Error::Empty("defense evaluation set"));
    }
    let mut out = Vec::new();
    let preds = graphs
        .iter()
        .map(|g| target.classify_embedding(&release.query(g)?))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = graphs.iter().map(Graph::label).collect();
    out.push((CLASSIFICATION_ACCURACY.to_string(), accuracy(&preds, &labels)?));
    if let Some(model) = attacks.property {
        let samples = build_training_set(graphs, release, model.schemes())?;
        let acc = model.evaluate_accuracy(&samples)?;
        out.push((PROPERTY_ACCURACY.to_string(), acc.iter().sum::<f64>() / acc.len() as f64));
        for (p, a) in model.properties().iter().zip(acc) {
            out.push((format!("{PROPERTY_ACCURACY}:{p}"), a));
        }
    }
    if let Some((model, spec)) = &attacks.subgraph {
        let samples = generate_samples(graphs, release, spec)?;
        out.push((SUBGRAPH_AUC.to_string(), model.evaluate_auc(&samples)?));
    }
    if let Some(ae) = attacks.reconstruction {
        let scores = evaluate_reconstruction(ae, release, graphs)?;
        let cos = scores.stat(Statistic::Degree, SimilarityKind::Cosine).unwrap_or(0.0);
        out.push((RECONSTRUCTION_DEGREE_COSINE.to_string(), cos));
        out.push((RECONSTRUCTION_WL.to_string(), scores.wl));
    }
    Ok(out)
}

/// One line of the privacy/utility trade-off table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub metric: String,
    pub value: f64,
    pub std: f64,
}

/// Evaluates every β with `repeats` independent noise draws; reports mean and
/// population standard deviation per metric.
pub fn sweep<T: Scalar>(
    target: &TrainedEncoder<T>,
    attacks: &SweepAttacks<T>,
    graphs: &[Graph],
    betas: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one repeat".into()));
    }
    for &b in betas {
        check_beta(b)?;
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &beta in betas {
        let mut runs: Vec<Vec<(String, f64)>> = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let release = NoisyOracle::new(target, beta, seeds.random())?;
            runs.push(evaluate_release(target, &release, attacks, graphs)?);
        }
        for (k, (metric, _)) in runs[0].iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|r| r[k].1).collect();
            let mean = values.iter().sum::<f64>() / repeats as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / repeats as f64;
            rows.push(SweepRow {
                beta,
                metric: metric.clone(),
                value: mean,
                std: var.sqrt(),
            });
        }
        log::info!("defense sweep: beta {beta} done");
    }
    Ok(rows)
}
