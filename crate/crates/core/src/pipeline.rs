//! Composition layer: fits {forest | gamma GLM} margins and a {generator
//! network | parametric copula} dependence model into one joint model, and
//! turns it into predictive samples and joint-probability estimates.

use serde::{Deserialize, Serialize};

use crate::copulas::{fit_copula, CopulaFamily, CopulaModel};
use crate::data::{encode_row, pseudo_observations, Dataset, EmpiricalMargin, Encoding};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestConfig, ForestModel};
use crate::glm::{fit_gamma_glm, GammaGlmModel};
use crate::gmmn::{Architecture, GeneratorNetwork, KernelMixture, TrainConfig};
use crate::matrix::Matrix;
use crate::rng::SeedStream;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginalKind {
    Forest,
    Glm,
}

impl std::str::FromStr for MarginalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(MarginalKind::Forest),
            "glm" => Ok(MarginalKind::Glm),
            other => Err(Error::invalid(format!("unknown marginal kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for MarginalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MarginalKind::Forest => "forest",
            MarginalKind::Glm => "glm",
        })
    }
}

/// Requested dependence model (fit-time).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DependenceKind {
    Gmmn,
    Copula(CopulaFamily),
}

impl std::str::FromStr for DependenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gmmn" {
            Ok(DependenceKind::Gmmn)
        } else {
            Ok(DependenceKind::Copula(s.parse()?))
        }
    }
}

impl std::fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DependenceKind::Gmmn => f.write_str("gmmn"),
            DependenceKind::Copula(fam) => f.write_str(fam.name()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum MarginalModels<F> {
    Forest {
        forests: Vec<ForestModel<F>>,
        margins: Vec<EmpiricalMargin<F>>,
    },
    Glm {
        models: Vec<GammaGlmModel<F>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum DependenceModel<F> {
    Gmmn(GeneratorNetwork<F>),
    Copula(CopulaModel<F>),
}

impl<F: Real> DependenceModel<F> {
    pub fn sample(&self, n: usize, rng: &mut SeedStream) -> Result<Matrix<F>> {
        match self {
            DependenceModel::Gmmn(net) => net.sample(n, true, rng),
            DependenceModel::Copula(cop) => cop.sample(n, rng),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DependenceModel::Gmmn(net) => format!("gmmn-{}", net.architecture().label()),
            DependenceModel::Copula(cop) => cop.family().name().to_string(),
        }
    }
}

/// Column names and categorical encodings carried along with the model so
/// prediction-time inputs are mapped exactly like training data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schema {
    pub covariate_names: Vec<String>,
    pub response_names: Vec<String>,
    pub categorical: Vec<bool>,
    pub encodings: Vec<Option<Encoding>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig<F> {
    pub forest: ForestConfig,
    pub gmmn_hidden: Vec<usize>,
    pub gmmn_epochs: usize,
    pub gmmn_batch: Option<usize>,
    pub gmmn_learning_rate: F,
    pub gmmn_dropout: f64,
    pub gmmn_batch_norm: bool,
    pub bandwidths: Vec<F>,
    pub seed: u64,
}

impl<F: Real> Default for FitConfig<F> {
    fn default() -> Self {
        FitConfig {
            forest: ForestConfig::default(),
            gmmn_hidden: vec![100],
            gmmn_epochs: 1000,
            gmmn_batch: None,
            gmmn_learning_rate: F::of(1e-3),
            gmmn_dropout: 0.1,
            gmmn_batch_norm: true,
            bandwidths: KernelMixture::default().bandwidths().to_vec(),
            seed: 0,
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Fitted joint model: marginal models per response dimension plus one
/// dependence model trained on the margins' own pseudo-observations (the
/// stored hash ties the two together).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointModel<F> {
    pub version: u32,
    pub marginal_kind: MarginalKind,
    pub marginals: MarginalModels<F>,
    pub dependence: DependenceModel<F>,
    pub schema: Schema,
    pub seed: u64,
    pub u_hat: Matrix<F>,
    pub u_hat_hash: u64,
}

/// Draws from the empirical predictive distribution for one covariate row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictiveSample<F> {
    pub draws: Matrix<F>,
    pub covariate: Vec<F>,
    pub model_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ineq {
    Gt,
    Lt,
}

/// One `dimension <op> threshold` constraint of a joint-probability event.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventAtom<F> {
    /// 0-based response dimension.
    pub dim: usize,
    pub op: Ineq,
    pub threshold: F,
}

pub fn fit_joint<F: Real>(
    train: &Dataset<F>,
    marginal_kind: MarginalKind,
    dependence_kind: DependenceKind,
    cfg: &FitConfig<F>,
) -> Result<JointModel<F>> {
    let d = train.d();
    let n = train.n();
    let responses = train.responses();

    let (marginals, u_hat) = match marginal_kind {
        MarginalKind::Forest => {
            let mut forests = Vec::with_capacity(d);
            let mut margins = Vec::with_capacity(d);
            let mut residual_matrix = Matrix::zeros(n, d);
            for j in 0..d {
                let y = responses.column(j);
                let forest_cfg = ForestConfig {
                    seed: crate::rng::mix_seed(cfg.seed, 100 + j as u64),
                    ..cfg.forest.clone()
                };
                let forest = fit_forest(train.covariates(), &y, &forest_cfg)?;
                let residuals = forest.oob_residuals(&y)?;
                margins.push(EmpiricalMargin::fit(&residuals)?);
                residual_matrix.set_column(j, &residuals);
                forests.push(forest);
            }
            let u_hat = pseudo_observations(&residual_matrix);
            (MarginalModels::Forest { forests, margins }, u_hat)
        }
        MarginalKind::Glm => {
            let mut models = Vec::with_capacity(d);
            let mut u_hat = Matrix::zeros(n, d);
            for j in 0..d {
                let y = responses.column(j);
                let model = fit_gamma_glm(train.covariates(), &y)?;
                for k in 0..n {
                    u_hat[(k, j)] = clamp_open_unit(model.cdf(y[k], train.covariates().row(k))?);
                }
                models.push(model);
            }
            (MarginalModels::Glm { models }, u_hat)
        }
    };

    let dependence = match dependence_kind {
        DependenceKind::Gmmn => {
            let mut arch = Architecture::new(d, &cfg.gmmn_hidden)?;
            arch.use_batch_norm = cfg.gmmn_batch_norm;
            arch.dropout_rate = cfg.gmmn_dropout;
            let net = GeneratorNetwork::new(arch, crate::rng::mix_seed(cfg.seed, 200))?;
            let train_cfg = TrainConfig {
                epochs: cfg.gmmn_epochs,
                batch_size: cfg.gmmn_batch,
                learning_rate: cfg.gmmn_learning_rate,
                kernel: KernelMixture::new(cfg.bandwidths.clone())?,
                seed: crate::rng::mix_seed(cfg.seed, 201),
            };
            DependenceModel::Gmmn(net.train(&u_hat, &train_cfg)?)
        }
        DependenceKind::Copula(family) => {
            // a single response has no dependence structure to fit
            let model = if d < 2 {
                CopulaModel::Independence { dim: d }
            } else {
                fit_copula(family, &u_hat)?
            };
            DependenceModel::Copula(model)
        }
    };

    let schema = Schema {
        covariate_names: train.covariate_names().to_vec(),
        response_names: train.response_names().to_vec(),
        categorical: train.categorical_flags().to_vec(),
        encodings: train.encodings().to_vec(),
    };
    let u_hat_hash = hash_matrix(&u_hat);
    Ok(JointModel {
        version: MODEL_FORMAT_VERSION,
        marginal_kind,
        marginals,
        dependence,
        schema,
        seed: cfg.seed,
        u_hat,
        u_hat_hash,
    })
}

fn clamp_open_unit<F: Real>(v: F) -> F {
    let eps = F::of(1e-12);
    v.max(eps).min(F::one() - eps)
}

impl<F: Real> JointModel<F> {
    pub fn d(&self) -> usize {
        self.schema.response_names.len()
    }

    pub fn p(&self) -> usize {
        self.schema.covariate_names.len()
    }

    pub fn n_train(&self) -> usize {
        self.u_hat.nrows()
    }

    pub fn model_id(&self) -> String {
        format!("{:016x}", self.u_hat_hash)
    }

    pub fn dependence_label(&self) -> String {
        self.dependence.label()
    }

    /// Map named covariate values through the stored schema/encodings.
    pub fn encode_covariates(&self, pairs: &[(String, String)]) -> Result<Vec<F>> {
        encode_row(&self.schema.covariate_names, &self.schema.encodings, pairs)
    }

    fn check_covariate_row(&self, z: &[F]) -> Result<()> {
        if z.len() != self.p() {
            return Err(Error::dim(format!(
                "covariate row has {} values, model expects {}",
                z.len(),
                self.p()
            )));
        }
        Ok(())
    }

    /// Re-margin one block of dependence samples for covariate row `z`.
    fn remargin(&self, u: &Matrix<F>, z: &[F]) -> Result<Matrix<F>> {
        let d = self.d();
        let mut draws = Matrix::zeros(u.nrows(), d);
        match &self.marginals {
            MarginalModels::Forest { forests, margins } => {
                for j in 0..d {
                    let mean = forests[j].predict_mean(z)?;
                    for i in 0..u.nrows() {
                        draws[(i, j)] = margins[j].quantile(u[(i, j)])? + mean;
                    }
                }
            }
            MarginalModels::Glm { models } => {
                for j in 0..d {
                    for i in 0..u.nrows() {
                        draws[(i, j)] = models[j].quantile(u[(i, j)], z)?;
                    }
                }
            }
        }
        Ok(draws)
    }

    /// Algorithm: sample the dependence model, then map each coordinate back
    /// through the marginal quantile (plus the forest mean in the forest
    /// path).
    pub fn predict_distribution(
        &self,
        z: &[F],
        n_gen: usize,
        rng: &mut SeedStream,
    ) -> Result<PredictiveSample<F>> {
        self.check_covariate_row(z)?;
        if n_gen == 0 {
            return Err(Error::invalid("n_gen must be positive"));
        }
        let u = self.dependence.sample(n_gen, rng)?;
        let draws = self.remargin(&u, z)?;
        Ok(PredictiveSample {
            draws,
            covariate: z.to_vec(),
            model_id: self.model_id(),
        })
    }

    /// Block scheme over a covariate matrix: one shared generated-U batch of
    /// rows(z) * n_gen_each rows, split into contiguous per-row blocks, then
    /// re-margined per covariate row.
    pub fn batch_predict(
        &self,
        z: &Matrix<F>,
        n_gen_each: usize,
        rng: &mut SeedStream,
    ) -> Result<Vec<PredictiveSample<F>>> {
        if n_gen_each == 0 {
            return Err(Error::invalid("n_gen_each must be positive"));
        }
        let rows = z.nrows();
        if rows == 0 {
            return Err(Error::invalid("batch_predict needs at least one covariate row"));
        }
        let u = self.dependence.sample(rows * n_gen_each, rng)?;
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            self.check_covariate_row(z.row(r))?;
            let block: Vec<usize> = (r * n_gen_each..(r + 1) * n_gen_each).collect();
            let u_block = u.select_rows(&block);
            let draws = self.remargin(&u_block, z.row(r))?;
            out.push(PredictiveSample {
                draws,
                covariate: z.row(r).to_vec(),
                model_id: self.model_id(),
            });
        }
        Ok(out)
    }

    /// Pseudo-observations of a test set under the training-fitted margins
    /// (forest path: ecdf of training residuals applied to test residuals;
    /// GLM path: fitted gamma CDF). Values are clamped into the open unit
    /// interval.
    pub fn test_pseudo_observations(&self, test: &Dataset<F>) -> Result<Matrix<F>> {
        if test.d() != self.d() {
            return Err(Error::dim(format!(
                "test set has {} responses, model {}",
                test.d(),
                self.d()
            )));
        }
        let n = test.n();
        let d = self.d();
        let mut u = Matrix::zeros(n, d);
        match &self.marginals {
            MarginalModels::Forest { forests, margins } => {
                for j in 0..d {
                    let floor = F::one() / F::from_count(margins[j].n() + 1);
                    for k in 0..n {
                        let z = test.covariates().row(k);
                        let r = test.responses()[(k, j)] - forests[j].predict_mean(z)?;
                        // the ecdf returns 0 below the smallest residual;
                        // clamp to its positive support
                        u[(k, j)] = margins[j].cdf(r).max(floor);
                    }
                }
            }
            MarginalModels::Glm { models } => {
                for j in 0..d {
                    for k in 0..n {
                        let z = test.covariates().row(k);
                        u[(k, j)] =
                            clamp_open_unit(models[j].cdf(test.responses()[(k, j)], z)?);
                    }
                }
            }
        }
        Ok(u)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: JointModel<F> = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Integrity(format!(
                "model format version {}, expected {}",
                model.version, MODEL_FORMAT_VERSION
            )));
        }
        let recomputed = hash_matrix(&model.u_hat);
        if recomputed != model.u_hat_hash {
            return Err(Error::Integrity(
                "stored pseudo-observation hash does not match: the dependence \
                 model and margins were not fit together"
                    .into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Fraction of draws satisfying every constraint; an empty event is
/// vacuously certain (callers should warn).
pub fn joint_probability<F: Real>(
    sample: &PredictiveSample<F>,
    event: &[EventAtom<F>],
) -> Result<F> {
    let d = sample.draws.ncols();
    for atom in event {
        if atom.dim >= d {
            return Err(Error::invalid(format!(
                "event dimension {} out of range (d = {d})",
                atom.dim + 1
            )));
        }
    }
    let n = sample.draws.nrows();
    let count = sample
        .draws
        .rows()
        .filter(|row| {
            event.iter().all(|a| match a.op {
                Ineq::Gt => row[a.dim] > a.threshold,
                Ineq::Lt => row[a.dim] < a.threshold,
            })
        })
        .count();
    Ok(F::from_count(count) / F::from_count(n))
}

/// FNV-1a over the IEEE bit patterns, row-major.
fn hash_matrix<F: Real>(m: &Matrix<F>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut mix = |bits: u64| {
        for byte in bits.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100_0000_01b3);
        }
    };
    mix(m.nrows() as u64);
    mix(m.ncols() as u64);
    for &v in m.data() {
        mix(v.as_f64().to_bits());
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::CopulaModel;
    use crate::rng::stream;

    fn synthetic_dataset(n: usize, seed: u64) -> Dataset<f64> {
        use rand::Rng;
        let mut rng = stream(seed);
        let mut cov = Matrix::zeros(n, 2);
        let mut resp = Matrix::zeros(n, 2);
        for i in 0..n {
            let z0: f64 = rng.gen_range(0.0..1.0);
            let z1: f64 = rng.gen_range(0.0..1.0);
            cov[(i, 0)] = z0;
            cov[(i, 1)] = z1;
            let noise0 = f64::standard_normal(&mut rng);
            let noise1 = 0.8 * noise0 + 0.6 * f64::standard_normal(&mut rng);
            resp[(i, 0)] = 2.0 * z0 + noise0;
            resp[(i, 1)] = -z1 + noise1;
        }
        Dataset::new(
            cov,
            resp,
            vec!["z0".into(), "z1".into()],
            vec!["x0".into(), "x1".into()],
        )
        .unwrap()
    }

    fn quick_cfg(seed: u64) -> FitConfig<f64> {
        FitConfig {
            forest: ForestConfig {
                n_trees: 30,
                ..ForestConfig::default()
            },
            gmmn_hidden: vec![16],
            gmmn_epochs: 5,
            seed,
            ..FitConfig::default()
        }
    }

    #[test]
    fn forest_copula_fit_has_unit_interval_u_hat() {
        let ds = synthetic_dataset(80, 1);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Gaussian),
            &quick_cfg(5),
        )
        .unwrap();
        assert!(model.u_hat.data().iter().all(|&u| u > 0.0 && u < 1.0));
        // pseudo-observation columns average to 1/2 exactly without ties
        for j in 0..2 {
            let mean: f64 = model.u_hat.column(j).iter().sum::<f64>() / 80.0;
            assert!((mean - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn glm_path_rejects_non_positive_responses() {
        let ds = synthetic_dataset(60, 2); // responses include negatives
        let err = fit_joint(
            &ds,
            MarginalKind::Glm,
            DependenceKind::Copula(CopulaFamily::Independence),
            &quick_cfg(1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn independence_draws_have_small_correlation() {
        let ds = synthetic_dataset(120, 3);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Independence),
            &quick_cfg(7),
        )
        .unwrap();
        let mut rng = stream(11);
        let s = model
            .predict_distribution(&[0.5, 0.5], 1000, &mut rng)
            .unwrap();
        let a = s.draws.column(0);
        let b = s.draws.column(1);
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(&b).map(|(&x, &y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let sa = (a.iter().map(|&x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
        let sb = (b.iter().map(|&y| (y - mb).powi(2)).sum::<f64>() / n).sqrt();
        assert!((cov / (sa * sb)).abs() < 0.1);
    }

    #[test]
    fn single_draw_stays_within_residual_envelope() {
        let ds = synthetic_dataset(90, 4);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Independence),
            &quick_cfg(9),
        )
        .unwrap();
        let z = [0.3, 0.7];
        let mut rng = stream(13);
        let s = model.predict_distribution(&z, 1, &mut rng).unwrap();
        assert_eq!(s.draws.nrows(), 1);
        if let MarginalModels::Forest { forests, margins } = &model.marginals {
            for j in 0..2 {
                let mean = forests[j].predict_mean(&z).unwrap();
                let v = s.draws[(0, j)];
                assert!(v >= margins[j].min() + mean && v <= margins[j].max() + mean);
            }
        } else {
            unreachable!();
        }
    }

    #[test]
    fn prediction_is_seed_deterministic() {
        let ds = synthetic_dataset(70, 5);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Gmmn,
            &quick_cfg(3),
        )
        .unwrap();
        let z = [0.2, 0.9];
        let a = model
            .predict_distribution(&z, 50, &mut stream(77))
            .unwrap();
        let b = model
            .predict_distribution(&z, 50, &mut stream(77))
            .unwrap();
        assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn batch_predict_partitions_one_shared_batch() {
        let ds = synthetic_dataset(70, 6);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Independence),
            &quick_cfg(2),
        )
        .unwrap();
        let z = Matrix::from_rows(vec![vec![0.1, 0.1], vec![0.9, 0.9], vec![0.5, 0.5]]).unwrap();
        let samples = model.batch_predict(&z, 5, &mut stream(21)).unwrap();
        assert_eq!(samples.len(), 3);
        assert!(samples.iter().all(|s| s.draws.nrows() == 5));
        let one = model.batch_predict(&z, 1, &mut stream(21)).unwrap();
        assert_eq!(one.len(), 3);
        assert!(one.iter().all(|s| s.draws.nrows() == 1));
    }

    #[test]
    fn joint_probability_counts_constraints() {
        let draws = Matrix::from_rows(vec![
            vec![1.0, 10.0],
            vec![2.0, 20.0],
            vec![3.0, 30.0],
            vec![4.0, 40.0],
        ])
        .unwrap();
        let s = PredictiveSample {
            draws,
            covariate: vec![0.0],
            model_id: "test".into(),
        };
        let p = joint_probability(
            &s,
            &[
                EventAtom { dim: 0, op: Ineq::Gt, threshold: 1.5 },
                EventAtom { dim: 1, op: Ineq::Lt, threshold: 35.0 },
            ],
        )
        .unwrap();
        assert_eq!(p, 0.5);
        // impossible event
        let p = joint_probability(
            &s,
            &[EventAtom { dim: 0, op: Ineq::Gt, threshold: 100.0 }],
        )
        .unwrap();
        assert_eq!(p, 0.0);
        // empty event is vacuously certain
        assert_eq!(joint_probability(&s, &[]).unwrap(), 1.0);
        // complementary events sum to one
        let above = joint_probability(
            &s,
            &[EventAtom { dim: 0, op: Ineq::Gt, threshold: 2.5 }],
        )
        .unwrap();
        let below = joint_probability(
            &s,
            &[EventAtom { dim: 0, op: Ineq::Lt, threshold: 2.5 }],
        )
        .unwrap();
        assert_eq!(above + below, 1.0);
        // out-of-range dimension
        assert!(joint_probability(
            &s,
            &[EventAtom { dim: 5, op: Ineq::Gt, threshold: 0.0 }],
        )
        .is_err());
    }

    #[test]
    fn single_response_degenerates_gracefully() {
        use rand::Rng;
        let mut rng = stream(15);
        let cov = Matrix::from_fn(50, 1, |_, _| rng.gen_range(0.0..1.0));
        let resp = Matrix::from_fn(50, 1, |i, _| cov[(i, 0)] + f64::standard_normal(&mut rng));
        let ds = Dataset::new(cov, resp, vec!["z".into()], vec!["y".into()]).unwrap();
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Gaussian),
            &quick_cfg(11),
        )
        .unwrap();
        // a copula request on d = 1 degenerates to independence
        assert!(matches!(
            model.dependence,
            DependenceModel::Copula(CopulaModel::Independence { dim: 1 })
        ));
        let s = model.predict_distribution(&[0.5], 20, &mut stream(1)).unwrap();
        assert_eq!(s.draws.nrows(), 20);
        assert_eq!(s.draws.ncols(), 1);
    }

    #[test]
    fn serialization_round_trip_is_bit_identical() {
        let ds = synthetic_dataset(60, 7);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Gmmn,
            &quick_cfg(4),
        )
        .unwrap();
        let json = model.to_json().unwrap();
        let restored = JointModel::<f64>::from_json(&json).unwrap();
        let a = model
            .predict_distribution(&[0.4, 0.6], 25, &mut stream(99))
            .unwrap();
        let b = restored
            .predict_distribution(&[0.4, 0.6], 25, &mut stream(99))
            .unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(json, restored.to_json().unwrap());
    }

    #[test]
    fn tampered_model_blob_is_rejected() {
        let ds = synthetic_dataset(60, 8);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Independence),
            &quick_cfg(6),
        )
        .unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        value["u_hat"]["data"][0] = serde_json::json!(0.123456);
        let text = serde_json::to_string(&value).unwrap();
        match JointModel::<f64>::from_json(&text) {
            Err(Error::Integrity(_)) => {}
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn remargin_reproduces_training_data_within_grid_gap() {
        // applying the de-margin then re-margin maps to the training
        // responses up to the quantile grid resolution
        let ds = synthetic_dataset(50, 9);
        let model = fit_joint(
            &ds,
            MarginalKind::Forest,
            DependenceKind::Copula(CopulaFamily::Independence),
            &quick_cfg(8),
        )
        .unwrap();
        if let MarginalModels::Forest { forests, margins } = &model.marginals {
            for j in 0..model.d() {
                let y = ds.responses().column(j);
                let res = forests[j].oob_residuals(&y).unwrap();
                let sorted = margins[j].sorted_residuals();
                let max_gap = sorted
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(0.0f64, f64::max);
                for (k, &r) in res.iter().enumerate() {
                    let u = model.u_hat[(k, j)];
                    let back = margins[j].quantile(u).unwrap();
                    assert!(
                        (back - r).abs() <= max_gap + 1e-12,
                        "dim {j} row {k}: {back} vs {r}"
                    );
                }
            }
        }
    }
}
