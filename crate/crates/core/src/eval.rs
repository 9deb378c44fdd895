//! Quantitative assessment: the averaged two-sample Cramer-von-Mises
//! discrepancy between test and generated copula samples, the average mean
//! squared prediction error, the one-sample Cramer-von-Mises statistic
//! against a known copula, and the synthetic copula-learning benchmark.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::{tau_to_param, CopulaFamily, CopulaModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gmmn::{Architecture, GeneratorNetwork, KernelMixture, TrainConfig};
use crate::matrix::Matrix;
use crate::pipeline::JointModel;
use crate::rng::{mix_seed, substream};
use crate::scalar::Real;

/// Empirical copula value C_n(u) = (1/n) #{rows k : U_k <= u componentwise}.
pub fn empirical_copula_value<F: Real>(u: &Matrix<F>, point: &[F]) -> F {
    let count = u
        .rows()
        .filter(|row| row.iter().zip(point).all(|(&r, &p)| r <= p))
        .count();
    F::from_count(count) / F::from_count(u.nrows())
}

/// Exact integral over the unit hypercube of the squared difference of two
/// empirical copulas, via Int 1(a<=t) 1(b<=t) dt = 1 - max(a, b) per
/// coordinate.
pub fn cvm_integral_two_sample<F: Real>(u1: &Matrix<F>, u2: &Matrix<F>) -> Result<F> {
    if u1.ncols() != u2.ncols() {
        return Err(Error::dim(format!(
            "samples have {} and {} columns",
            u1.ncols(),
            u2.ncols()
        )));
    }
    let s11 = product_sum(u1, u1);
    let s12 = product_sum(u1, u2);
    let s22 = product_sum(u2, u2);
    let n1 = F::from_count(u1.nrows());
    let n2 = F::from_count(u2.nrows());
    Ok(s11 / (n1 * n1) - F::of(2.0) * s12 / (n1 * n2) + s22 / (n2 * n2))
}

fn product_sum<F: Real>(a: &Matrix<F>, b: &Matrix<F>) -> F {
    let partials: Vec<F> = (0..a.nrows())
        .into_par_iter()
        .map(|k| {
            let ak = a.row(k);
            let mut s = F::zero();
            for l in 0..b.nrows() {
                let bl = b.row(l);
                let mut prod = F::one();
                for (&x, &y) in ak.iter().zip(bl) {
                    prod = prod * (F::one() - x.max(y));
                }
                s = s + prod;
            }
            s
        })
        .collect();
    partials.into_iter().sum()
}

/// One replication of the scaled two-sample statistic:
/// (1 / sqrt(1/n_tst + 1/n_gen)) * Int (C_tst - C_gen)^2 du.
pub fn acvm_statistic<F: Real>(u_tst: &Matrix<F>, u_gen: &Matrix<F>) -> Result<F> {
    let integral = cvm_integral_two_sample(u_tst, u_gen)?;
    let scale = (F::one() / F::from_count(u_tst.nrows())
        + F::one() / F::from_count(u_gen.nrows()))
    .sqrt();
    Ok(integral / scale)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcvmResult<F> {
    pub value: F,
    pub per_replication: Vec<F>,
}

/// Averaged two-sample statistic over `n_rep` freshly generated dependence
/// samples; the test side is mapped through the training-fitted margins
/// once.
pub fn acvm<F: Real>(
    model: &JointModel<F>,
    test: &Dataset<F>,
    n_rep: usize,
    n_gen: usize,
    seed: u64,
) -> Result<AcvmResult<F>> {
    if test.n() < 2 {
        return Err(Error::invalid("acvm needs at least two test rows"));
    }
    if n_rep == 0 || n_gen == 0 {
        return Err(Error::invalid("n_rep and n_gen must be positive"));
    }
    let u_tst = model.test_pseudo_observations(test)?;
    let per_replication: Vec<F> = (0..n_rep)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, 0x3000 + i as u64);
            let u_gen = model.dependence.sample(n_gen, &mut rng)?;
            acvm_statistic(&u_tst, &u_gen)
        })
        .collect::<Result<_>>()?;
    let value = per_replication.iter().copied().sum::<F>() / F::from_count(n_rep);
    Ok(AcvmResult {
        value,
        per_replication,
    })
}

/// Average over test rows of the mean squared Euclidean distance between
/// predictive draws and the observed response vector.
pub fn amse<F: Real>(
    model: &JointModel<F>,
    test: &Dataset<F>,
    n_gen: usize,
    seed: u64,
) -> Result<F> {
    if n_gen == 0 {
        return Err(Error::invalid("n_gen must be positive"));
    }
    let rows: Vec<F> = (0..test.n())
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, 0x4000 + k as u64);
            let sample = model.predict_distribution(test.covariates().row(k), n_gen, &mut rng)?;
            let truth = test.responses().row(k);
            let mut total = F::zero();
            for i in 0..sample.draws.nrows() {
                let mut sq = F::zero();
                for (j, &t) in truth.iter().enumerate() {
                    let d = sample.draws[(i, j)] - t;
                    sq = sq + d * d;
                }
                total = total + sq;
            }
            Ok(total / F::from_count(n_gen))
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().copied().sum::<F>() / F::from_count(test.n()))
}

/// Full evaluation report for one model on one test set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport<F> {
    pub acvm: F,
    pub amse: F,
    pub n_rep: usize,
    pub n_gen: usize,
    pub n_tst: usize,
    pub per_replication: Vec<F>,
    pub seed: u64,
}

pub fn evaluate<F: Real>(
    model: &JointModel<F>,
    test: &Dataset<F>,
    n_rep: usize,
    n_gen: usize,
    seed: u64,
) -> Result<EvalReport<F>> {
    let acvm_res = acvm(model, test, n_rep, n_gen, seed)?;
    let amse_val = amse(model, test, n_gen, mix_seed(seed, 0xA5E))?;
    Ok(EvalReport {
        acvm: acvm_res.value,
        amse: amse_val,
        n_rep,
        n_gen,
        n_tst: test.n(),
        per_replication: acvm_res.per_replication,
        seed,
    })
}

/// One-sample statistic: sum over sample points of the squared difference
/// between the empirical copula of the sample and the reference copula
/// (the dC_n integral is the empirical average, which cancels the n_gen
/// prefactor into a plain sum).
pub fn cvm_one_sample<F: Real>(u_gen: &Matrix<F>, truth: &CopulaModel<F>) -> Result<F> {
    Ok(cvm_one_sample_with_se(u_gen, truth, crate::copulas::DEFAULT_MC_CDF_SAMPLES)?.0)
}

/// As [`cvm_one_sample`], also reporting the mean Monte-Carlo standard error
/// of the reference CDF when it is estimated rather than exact.
pub fn cvm_one_sample_with_se<F: Real>(
    u_gen: &Matrix<F>,
    truth: &CopulaModel<F>,
    mc_cdf_samples: usize,
) -> Result<(F, Option<F>)> {
    let evaluator = truth.cdf_evaluator(mc_cdf_samples, crate::copulas::DEFAULT_MC_CDF_SEED)?;
    let n = u_gen.nrows();
    let pieces: Vec<(F, Option<F>)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let point = u_gen.row(k);
            let c_n = empirical_copula_value(u_gen, point);
            let (c, se) = evaluator.value_with_se(point)?;
            let d = c_n - c;
            Ok((d * d, se))
        })
        .collect::<Result<_>>()?;
    let stat: F = pieces.iter().map(|p| p.0).sum();
    let ses: Vec<F> = pieces.iter().filter_map(|p| p.1).collect();
    let mean_se = if ses.is_empty() {
        None
    } else {
        Some(ses.iter().copied().sum::<F>() / F::from_count(ses.len()))
    };
    Ok((stat, mean_se))
}

/// Reference family for the synthetic copula-learning benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchmarkFamily {
    Clayton,
    T4,
}

impl std::str::FromStr for BenchmarkFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clayton" => Ok(BenchmarkFamily::Clayton),
            "t4" => Ok(BenchmarkFamily::T4),
            other => Err(Error::invalid(format!(
                "unsupported benchmark family `{other}` (expected clayton or t4)"
            ))),
        }
    }
}

impl std::fmt::Display for BenchmarkFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BenchmarkFamily::Clayton => "clayton",
            BenchmarkFamily::T4 => "t4",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkConfig<F> {
    pub family: BenchmarkFamily,
    pub dim: usize,
    pub tau: F,
    pub n_trn: usize,
    /// (hidden layers, width) per architecture.
    pub architectures: Vec<(usize, usize)>,
    pub epochs: usize,
    /// Number of generated samples per architecture (B).
    pub reps: usize,
    pub n_gen: usize,
    pub batch_size: Option<usize>,
    pub mc_cdf_samples: usize,
    pub seed: u64,
}

impl<F: Real> Default for BenchmarkConfig<F> {
    /// Desk-scale defaults: the full-scale experiment uses n_trn = 50000;
    /// the training size here is scaled down for runtime while epochs, B,
    /// and n_gen keep their reference values.
    fn default() -> Self {
        BenchmarkConfig {
            family: BenchmarkFamily::Clayton,
            dim: 2,
            tau: F::of(0.5),
            n_trn: 5000,
            architectures: vec![(1, 100), (1, 300), (1, 600), (2, 600), (3, 300)],
            epochs: 300,
            reps: 25,
            n_gen: 1000,
            batch_size: Some(500),
            mc_cdf_samples: crate::copulas::DEFAULT_MC_CDF_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkRow<F> {
    pub architecture: String,
    pub replication: usize,
    pub cvm: F,
    /// Mean Monte-Carlo standard error of the reference CDF, when estimated.
    pub truth_cdf_se: Option<F>,
}

/// Build the reference copula for a benchmark configuration.
pub fn benchmark_truth<F: Real>(cfg: &BenchmarkConfig<F>) -> Result<CopulaModel<F>> {
    if cfg.dim < 2 {
        return Err(Error::invalid("benchmark needs dim >= 2"));
    }
    match cfg.family {
        BenchmarkFamily::Clayton => Ok(CopulaModel::Clayton {
            theta: tau_to_param(CopulaFamily::Clayton, cfg.tau)?,
            dim: cfg.dim,
        }),
        BenchmarkFamily::T4 => {
            let rho = tau_to_param(CopulaFamily::StudentT, cfg.tau)?;
            let corr = Matrix::from_fn(cfg.dim, cfg.dim, |i, j| {
                if i == j {
                    F::one()
                } else {
                    rho
                }
            });
            Ok(CopulaModel::StudentT {
                corr,
                df: F::of(4.0),
            })
        }
    }
}

/// For each architecture: train one generator on samples from the reference
/// copula, generate `reps` samples of size `n_gen`, and score each against
/// the truth with the one-sample statistic.
pub fn benchmark_copula_learning<F: Real>(
    cfg: &BenchmarkConfig<F>,
) -> Result<Vec<BenchmarkRow<F>>> {
    let truth = benchmark_truth(cfg)?;
    let mut train_rng = substream(cfg.seed, 0xB000);
    let u_trn = truth.sample(cfg.n_trn, &mut train_rng)?;

    let mut rows = Vec::with_capacity(cfg.architectures.len() * cfg.reps);
    for (a_idx, &(layers, width)) in cfg.architectures.iter().enumerate() {
        let arch = Architecture::new(cfg.dim, &vec![width; layers])?;
        let label = arch.label();
        let net = GeneratorNetwork::new(arch, mix_seed(cfg.seed, 0xC00 + a_idx as u64))?;
        let trained = net.train(
            &u_trn,
            &TrainConfig {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                learning_rate: F::of(1e-3),
                kernel: KernelMixture::default(),
                seed: mix_seed(cfg.seed, 0xD00 + a_idx as u64),
            },
        )?;
        for rep in 0..cfg.reps {
            let mut rng = substream(cfg.seed, 0xE000 + (a_idx * 1000 + rep) as u64);
            let sample = trained.sample(cfg.n_gen, true, &mut rng)?;
            let (cvm, truth_cdf_se) =
                cvm_one_sample_with_se(&sample, &truth, cfg.mc_cdf_samples)?;
            rows.push(BenchmarkRow {
                architecture: label.clone(),
                replication: rep,
                cvm,
                truth_cdf_se,
            });
        }
    }
    Ok(rows)
}
