//! Parametric and empirical copula models: Kendall-tau fitting, sampling by
//! frailty/elliptical constructions, and pointwise CDF evaluation for the
//! goodness-of-fit statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream;
use crate::scalar::{beta as beta_draw, chi_squared, Real};
use crate::special::{debye1, gauss_legendre, ln_gamma, normal_cdf, normal_pdf, normal_quantile, t_cdf, t_pdf, t_quantile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CopulaFamily {
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    EmpiricalBeta,
    Independence,
}

impl CopulaFamily {
    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::StudentT => "t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
            CopulaFamily::EmpiricalBeta => "empirical-beta",
            CopulaFamily::Independence => "independence",
        }
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(CopulaFamily::Gaussian),
            "t" | "student-t" | "student_t" => Ok(CopulaFamily::StudentT),
            "clayton" => Ok(CopulaFamily::Clayton),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            "frank" => Ok(CopulaFamily::Frank),
            "empirical-beta" | "empirical_beta" => Ok(CopulaFamily::EmpiricalBeta),
            "independence" | "indep" => Ok(CopulaFamily::Independence),
            other => Err(Error::invalid(format!("unknown copula family `{other}`"))),
        }
    }
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fitted dependence model with sampling and (where supported) pointwise CDF
/// evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum CopulaModel<F> {
    Gaussian { corr: Matrix<F> },
    StudentT { corr: Matrix<F>, df: F },
    Clayton { theta: F, dim: usize },
    Gumbel { theta: F, dim: usize },
    Frank { theta: F, dim: usize },
    EmpiricalBeta { pseudo: Matrix<F>, smooth: bool },
    Independence { dim: usize },
}

/// Tie-adjusted sample Kendall's tau (tau_b).
pub fn kendall_tau<F: Real>(x: &[F], y: &[F]) -> Result<F> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::dim(format!("{} vs {} observations", n, y.len())));
    }
    if n < 2 {
        return Err(Error::invalid("kendall_tau needs n >= 2"));
    }
    let mut concordant_minus_discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).expect("finite");
            let dy = y[i].partial_cmp(&y[j]).expect("finite");
            use std::cmp::Ordering::*;
            match (dx, dy) {
                (Equal, Equal) => {
                    ties_x += 1;
                    ties_y += 1;
                }
                (Equal, _) => ties_x += 1,
                (_, Equal) => ties_y += 1,
                (a, b) if a == b => concordant_minus_discordant += 1,
                _ => concordant_minus_discordant -= 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if ties_x == n0 || ties_y == n0 {
        return Err(Error::invalid("kendall_tau undefined for constant input"));
    }
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    Ok(F::of(concordant_minus_discordant as f64 / denom))
}

/// Analytic Kendall's tau for the one-parameter families.
pub fn tau_of_theta<F: Real>(family: CopulaFamily, theta: F) -> Result<F> {
    match family {
        CopulaFamily::Clayton => Ok(theta / (theta + F::of(2.0))),
        CopulaFamily::Gumbel => Ok(F::one() - F::one() / theta),
        CopulaFamily::Frank => {
            if theta == F::zero() {
                return Err(Error::invalid("Frank theta must be nonzero"));
            }
            Ok(F::one() - F::of(4.0) / theta * (F::one() - debye1(theta)))
        }
        other => Err(Error::Unsupported(format!(
            "tau_of_theta not defined for {other}"
        ))),
    }
}

/// Invert Kendall's tau to the family parameter: closed forms for Clayton
/// and Gumbel, numeric Debye inversion for Frank, sin(pi tau / 2) for the
/// elliptical families.
pub fn tau_to_param<F: Real>(family: CopulaFamily, tau: F) -> Result<F> {
    let one = F::one();
    match family {
        CopulaFamily::Clayton => {
            if tau <= F::zero() || tau >= one {
                return Err(Error::invalid(format!(
                    "Clayton requires tau in (0,1), got {tau}"
                )));
            }
            Ok(F::of(2.0) * tau / (one - tau))
        }
        CopulaFamily::Gumbel => {
            if tau <= F::zero() || tau >= one {
                return Err(Error::invalid(format!(
                    "Gumbel requires tau in (0,1), got {tau}"
                )));
            }
            Ok(one / (one - tau))
        }
        CopulaFamily::Frank => {
            if tau.abs() >= one || tau == F::zero() {
                return Err(Error::invalid(format!(
                    "Frank requires tau in (-1,1) \\ {{0}}, got {tau}"
                )));
            }
            // tau(theta) is odd and increasing; bisection on theta > 0
            let target = tau.abs();
            let mut lo = F::of(1e-10);
            let mut hi = F::one();
            while tau_of_theta(CopulaFamily::Frank, hi)? < target {
                hi = hi * F::of(2.0);
                if hi > F::of(1e6) {
                    return Err(Error::Numerical("Frank tau inversion out of range".into()));
                }
            }
            for _ in 0..200 {
                let mid = (lo + hi) * F::of(0.5);
                if tau_of_theta(CopulaFamily::Frank, mid)? < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < F::of(1e-10) {
                    break;
                }
            }
            let theta = (lo + hi) * F::of(0.5);
            Ok(if tau > F::zero() { theta } else { -theta })
        }
        CopulaFamily::Gaussian | CopulaFamily::StudentT => {
            if tau.abs() >= one {
                return Err(Error::invalid(format!(
                    "elliptical families require tau in (-1,1), got {tau}"
                )));
            }
            Ok((F::of(std::f64::consts::PI) * tau * F::of(0.5)).sin())
        }
        other => Err(Error::Unsupported(format!(
            "tau_to_param not defined for {other}"
        ))),
    }
}

/// Project a symmetric matrix to the nearest correlation matrix by clipping
/// eigenvalues at 1e-8 and rescaling to a unit diagonal.
fn repair_correlation<F: Real>(mut corr: Matrix<F>) -> Matrix<F> {
    let d = corr.nrows();
    let needs_repair = corr.cholesky().is_none();
    if needs_repair {
        let (eig, v) = corr.symmetric_eigen();
        let floor = F::of(1e-8);
        let mut a = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut s = F::zero();
                for k in 0..d {
                    s = s + v[(i, k)] * eig[k].max(floor) * v[(j, k)];
                }
                a[(i, j)] = s;
            }
        }
        corr = a;
    }
    let scale: Vec<F> = (0..d).map(|i| corr[(i, i)].sqrt()).collect();
    for i in 0..d {
        for j in 0..d {
            corr[(i, j)] = corr[(i, j)] / (scale[i] * scale[j]);
        }
    }
    for i in 0..d {
        corr[(i, i)] = F::one();
    }
    corr
}

fn pairwise_tau_matrix<F: Real>(u: &Matrix<F>) -> Result<Matrix<F>> {
    let d = u.ncols();
    let mut m = Matrix::identity(d);
    let cols: Vec<Vec<F>> = (0..d).map(|j| u.column(j)).collect();
    for a in 0..d {
        for b in a + 1..d {
            let t = kendall_tau(&cols[a], &cols[b])?;
            m[(a, b)] = t;
            m[(b, a)] = t;
        }
    }
    Ok(m)
}

fn average_pairwise_tau<F: Real>(u: &Matrix<F>) -> Result<F> {
    let d = u.ncols();
    let taus = pairwise_tau_matrix(u)?;
    let mut sum = F::zero();
    let mut count = 0usize;
    for a in 0..d {
        for b in a + 1..d {
            sum = sum + taus[(a, b)];
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("average pairwise tau needs d >= 2"));
    }
    Ok(sum / F::from_count(count))
}

/// Fit a copula model to pseudo-observations by Kendall-tau inversion
/// (elliptical correlation entries pairwise, Archimedean theta from the
/// average pairwise tau); Student-t degrees of freedom picked from the grid
/// 2..=30 by pseudo-log-likelihood.
pub fn fit_copula<F: Real>(family: CopulaFamily, u_hat: &Matrix<F>) -> Result<CopulaModel<F>> {
    let n = u_hat.nrows();
    let d = u_hat.ncols();
    if n < 10 {
        return Err(Error::invalid("copula fit needs n >= 10"));
    }
    if u_hat
        .data()
        .iter()
        .any(|&v| v <= F::zero() || v >= F::one())
    {
        return Err(Error::invalid("pseudo-observations must lie in (0,1)"));
    }
    if d < 2 && family != CopulaFamily::Independence && family != CopulaFamily::EmpiricalBeta {
        return Ok(CopulaModel::Independence { dim: d });
    }
    match family {
        CopulaFamily::Independence => Ok(CopulaModel::Independence { dim: d }),
        CopulaFamily::EmpiricalBeta => Ok(CopulaModel::EmpiricalBeta {
            pseudo: u_hat.clone(),
            smooth: true,
        }),
        CopulaFamily::Gaussian => {
            let taus = pairwise_tau_matrix(u_hat)?;
            let corr = repair_correlation(taus.map(|t| {
                (F::of(std::f64::consts::PI) * t * F::of(0.5)).sin()
            }));
            Ok(CopulaModel::Gaussian { corr })
        }
        CopulaFamily::StudentT => {
            let taus = pairwise_tau_matrix(u_hat)?;
            let corr = repair_correlation(taus.map(|t| {
                (F::of(std::f64::consts::PI) * t * F::of(0.5)).sin()
            }));
            let df = select_t_df(&corr, u_hat)?;
            Ok(CopulaModel::StudentT { corr, df })
        }
        CopulaFamily::Clayton | CopulaFamily::Gumbel | CopulaFamily::Frank => {
            let tau = average_pairwise_tau(u_hat)?;
            if family == CopulaFamily::Frank && d > 2 && tau <= F::zero() {
                return Err(Error::invalid(
                    "Frank with d > 2 requires positive dependence",
                ));
            }
            let theta = tau_to_param(family, tau)?;
            Ok(match family {
                CopulaFamily::Clayton => CopulaModel::Clayton { theta, dim: d },
                CopulaFamily::Gumbel => CopulaModel::Gumbel { theta, dim: d },
                _ => CopulaModel::Frank { theta, dim: d },
            })
        }
    }
}

/// Pick the Student-t degrees of freedom on the grid {2,...,30} maximizing
/// the pseudo-log-likelihood at fixed correlation.
fn select_t_df<F: Real>(corr: &Matrix<F>, u: &Matrix<F>) -> Result<F> {
    let d = corr.nrows();
    let chol = corr
        .cholesky()
        .ok_or_else(|| Error::Numerical("correlation matrix not positive definite".into()))?;
    let log_det: F = (0..d).map(|i| chol[(i, i)].ln() * F::of(2.0)).sum();
    let mut best = (F::neg_infinity(), F::of(4.0));
    for nu_i in 2..=30u32 {
        let nu = F::of(nu_i as f64);
        let mut ll = F::zero();
        for k in 0..u.nrows() {
            let x: Vec<F> = u.row(k).iter().map(|&v| t_quantile(v, nu)).collect();
            // quadratic form through the Cholesky factor
            let mut w = x.clone();
            for i in 0..d {
                let mut s = w[i];
                for j in 0..i {
                    s = s - chol[(i, j)] * w[j];
                }
                w[i] = s / chol[(i, i)];
            }
            let quad: F = w.iter().map(|&v| v * v).sum();
            let half = F::of(0.5);
            let df_d = F::from_count(d);
            let joint = ln_gamma((nu + df_d) * half) - ln_gamma(nu * half)
                - df_d * half * (nu * F::of(std::f64::consts::PI)).ln()
                - half * log_det
                - (nu + df_d) * half * (F::one() + quad / nu).ln();
            let margins: F = x.iter().map(|&xi| t_pdf(xi, nu).ln()).sum();
            ll = ll + joint - margins;
        }
        if ll > best.0 {
            best = (ll, nu);
        }
    }
    Ok(best.1)
}

impl<F: Real> CopulaModel<F> {
    pub fn dim(&self) -> usize {
        match self {
            CopulaModel::Gaussian { corr } | CopulaModel::StudentT { corr, .. } => corr.nrows(),
            CopulaModel::Clayton { dim, .. }
            | CopulaModel::Gumbel { dim, .. }
            | CopulaModel::Frank { dim, .. }
            | CopulaModel::Independence { dim } => *dim,
            CopulaModel::EmpiricalBeta { pseudo, .. } => pseudo.ncols(),
        }
    }

    pub fn family(&self) -> CopulaFamily {
        match self {
            CopulaModel::Gaussian { .. } => CopulaFamily::Gaussian,
            CopulaModel::StudentT { .. } => CopulaFamily::StudentT,
            CopulaModel::Clayton { .. } => CopulaFamily::Clayton,
            CopulaModel::Gumbel { .. } => CopulaFamily::Gumbel,
            CopulaModel::Frank { .. } => CopulaFamily::Frank,
            CopulaModel::EmpiricalBeta { .. } => CopulaFamily::EmpiricalBeta,
            CopulaModel::Independence { .. } => CopulaFamily::Independence,
        }
    }

    /// Draw an n x d sample; every entry lies in (0,1).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix<F>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let d = self.dim();
        let mut out = Matrix::zeros(n, d);
        match self {
            CopulaModel::Independence { .. } => {
                for i in 0..n {
                    for j in 0..d {
                        out[(i, j)] = F::uniform_open01(rng);
                    }
                }
            }
            CopulaModel::Gaussian { corr } => {
                let chol = corr
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("correlation not positive definite".into()))?;
                let mut z = vec![F::zero(); d];
                for i in 0..n {
                    for zj in z.iter_mut() {
                        *zj = F::standard_normal(rng);
                    }
                    for j in 0..d {
                        let mut s = F::zero();
                        for k in 0..=j {
                            s = s + chol[(j, k)] * z[k];
                        }
                        out[(i, j)] = clamp_unit(normal_cdf(s));
                    }
                }
            }
            CopulaModel::StudentT { corr, df } => {
                let chol = corr
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("correlation not positive definite".into()))?;
                let mut z = vec![F::zero(); d];
                for i in 0..n {
                    for zj in z.iter_mut() {
                        *zj = F::standard_normal(rng);
                    }
                    let w = chi_squared(*df, rng);
                    let scale = (*df / w).sqrt();
                    for j in 0..d {
                        let mut s = F::zero();
                        for k in 0..=j {
                            s = s + chol[(j, k)] * z[k];
                        }
                        out[(i, j)] = clamp_unit(t_cdf(s * scale, *df));
                    }
                }
            }
            CopulaModel::Clayton { theta, .. } => {
                let shape = F::one() / *theta;
                for i in 0..n {
                    let w = F::sample_gamma(shape, F::one(), rng);
                    for j in 0..d {
                        let e = F::exp1(rng);
                        out[(i, j)] = clamp_unit((F::one() + e / w).powf(-F::one() / *theta));
                    }
                }
            }
            CopulaModel::Gumbel { theta, .. } => {
                let alpha = F::one() / *theta;
                if (*theta - F::one()).abs() < F::of(1e-12) {
                    for i in 0..n {
                        for j in 0..d {
                            out[(i, j)] = F::uniform_open01(rng);
                        }
                    }
                } else {
                    for i in 0..n {
                        let v = positive_stable(alpha, rng);
                        for j in 0..d {
                            let e = F::exp1(rng);
                            out[(i, j)] = clamp_unit((-(e / v).powf(alpha)).exp());
                        }
                    }
                }
            }
            CopulaModel::Frank { theta, dim } => {
                if *theta > F::zero() {
                    // logarithmic-series frailty (Marshall-Olkin)
                    let p = F::one() - (-*theta).exp();
                    for i in 0..n {
                        let v = F::from_count(log_series(p, rng));
                        for j in 0..*dim {
                            let e = F::exp1(rng);
                            let inner = F::one() - p * (-(e / v)).exp();
                            out[(i, j)] = clamp_unit(-inner.ln() / *theta);
                        }
                    }
                } else if *dim == 2 {
                    // conditional inversion supports theta < 0 in d = 2
                    for i in 0..n {
                        let u1 = F::uniform_open01(rng);
                        let w = F::uniform_open01(rng);
                        out[(i, 0)] = u1;
                        out[(i, 1)] = clamp_unit(frank_conditional_inverse(*theta, u1, w));
                    }
                } else {
                    return Err(Error::Unsupported(
                        "Frank with theta < 0 requires d = 2".into(),
                    ));
                }
            }
            CopulaModel::EmpiricalBeta { pseudo, smooth } => {
                let m = pseudo.nrows();
                // integer column ranks of the stored pseudo-observations
                let ranks: Vec<Vec<usize>> = (0..d)
                    .map(|j| {
                        let col = pseudo.column(j);
                        let mut order: Vec<usize> = (0..m).collect();
                        order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite"));
                        let mut r = vec![0usize; m];
                        for (pos, &idx) in order.iter().enumerate() {
                            r[idx] = pos + 1;
                        }
                        r
                    })
                    .collect();
                for i in 0..n {
                    let k = rng.gen_range(0..m);
                    for j in 0..d {
                        if *smooth {
                            let a = F::from_count(ranks[j][k]);
                            let b = F::from_count(m + 1 - ranks[j][k]);
                            out[(i, j)] = clamp_unit(beta_draw(a, b, rng));
                        } else {
                            out[(i, j)] = pseudo[(k, j)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copula CDF at one point. Closed form for the Archimedean families and
    /// independence, deterministic quadrature for the elliptical families at
    /// d = 2, and seeded Monte Carlo for elliptical d > 2 (see
    /// [`CopulaModel::cdf_evaluator`] for batch use and standard errors).
    pub fn cdf(&self, u: &[F]) -> Result<F> {
        self.cdf_evaluator(DEFAULT_MC_CDF_SAMPLES, DEFAULT_MC_CDF_SEED)?
            .value(u)
    }

    /// Build a reusable evaluator; for Monte-Carlo families this presamples
    /// once so repeated evaluations stay cheap.
    pub fn cdf_evaluator(&self, mc_samples: usize, mc_seed: u64) -> Result<CdfEvaluator<'_, F>> {
        match self {
            CopulaModel::EmpiricalBeta { .. } => Err(Error::Unsupported(
                "copula CDF not implemented for the empirical beta family".into(),
            )),
            CopulaModel::Gaussian { corr } | CopulaModel::StudentT { corr, .. }
                if corr.nrows() > 2 =>
            {
                let mut rng = stream(mc_seed);
                let sample = self.sample(mc_samples, &mut rng)?;
                Ok(CdfEvaluator {
                    model: self,
                    mc_sample: Some(sample),
                })
            }
            _ => Ok(CdfEvaluator {
                model: self,
                mc_sample: None,
            }),
        }
    }
}

pub const DEFAULT_MC_CDF_SAMPLES: usize = 20_000;
pub const DEFAULT_MC_CDF_SEED: u64 = 0x05ee_dcdf;

/// Pointwise CDF evaluation, with a presampled reference for Monte-Carlo
/// families.
pub struct CdfEvaluator<'a, F> {
    model: &'a CopulaModel<F>,
    mc_sample: Option<Matrix<F>>,
}

impl<F: Real> CdfEvaluator<'_, F> {
    pub fn value(&self, u: &[F]) -> Result<F> {
        Ok(self.value_with_se(u)?.0)
    }

    /// CDF value plus a standard error when the value is a Monte-Carlo
    /// estimate (None for exact/quadrature families).
    pub fn value_with_se(&self, u: &[F]) -> Result<(F, Option<F>)> {
        let d = self.model.dim();
        if u.len() != d {
            return Err(Error::dim(format!("point has {} coordinates, copula {}", u.len(), d)));
        }
        if u.iter().any(|&v| v <= F::zero()) {
            return Ok((F::zero(), None));
        }
        let u: Vec<F> = u.iter().map(|&v| v.min(F::one())).collect();
        if let Some(sample) = &self.mc_sample {
            let m = sample.nrows();
            let count = sample
                .rows()
                .filter(|row| row.iter().zip(&u).all(|(&r, &b)| r <= b))
                .count();
            let p = F::from_count(count) / F::from_count(m);
            let se = (p * (F::one() - p) / F::from_count(m)).sqrt();
            return Ok((p, Some(se)));
        }
        let value = match self.model {
            CopulaModel::Independence { .. } => u.iter().copied().fold(F::one(), |a, b| a * b),
            CopulaModel::Clayton { theta, .. } => {
                let t = *theta;
                let s: F = u.iter().map(|&v| v.powf(-t)).sum();
                let base = s - F::from_count(u.len() - 1);
                base.max(F::zero()).powf(-F::one() / t)
            }
            CopulaModel::Gumbel { theta, .. } => {
                let t = *theta;
                let s: F = u.iter().map(|&v| (-v.ln()).powf(t)).sum();
                (-s.powf(F::one() / t)).exp()
            }
            CopulaModel::Frank { theta, .. } => {
                let t = *theta;
                let em1 = (-t).exp() - F::one();
                let mut prod = F::one();
                for &v in &u {
                    prod = prod * ((-t * v).exp() - F::one());
                }
                let denom = em1.powi(u.len() as i32 - 1);
                -(F::one() + prod / denom).ln() / t
            }
            CopulaModel::Gaussian { corr } => {
                let rho = corr[(0, 1)];
                bivariate_gaussian_cdf(u[0], u[1], rho)
            }
            CopulaModel::StudentT { corr, df } => {
                let rho = corr[(0, 1)];
                bivariate_t_cdf(u[0], u[1], rho, *df)
            }
            CopulaModel::EmpiricalBeta { .. } => unreachable!("rejected in cdf_evaluator"),
        };
        Ok((clamp_unit_closed(value), None))
    }
}

fn clamp_unit<F: Real>(v: F) -> F {
    // keep strictly inside (0,1) for downstream rank/quantile transforms
    let eps = F::of(1e-15);
    v.max(eps).min(F::one() - eps)
}

fn clamp_unit_closed<F: Real>(v: F) -> F {
    v.max(F::zero()).min(F::one())
}

/// One-sided positive stable draw with Laplace transform exp(-t^alpha),
/// alpha in (0,1), by the Chambers-Mallows-Stuck / Kanter representation.
fn positive_stable<F: Real, R: Rng + ?Sized>(alpha: F, rng: &mut R) -> F {
    let pi = F::of(std::f64::consts::PI);
    let theta = F::uniform_open01(rng) * pi;
    let e = F::exp1(rng);
    let one = F::one();
    let ln_a = (alpha * (alpha * theta).sin().ln()
        + (one - alpha) * ((one - alpha) * theta).sin().ln()
        - theta.sin().ln())
        / (one - alpha);
    (((one - alpha) / alpha) * (ln_a - e.ln())).exp()
}

/// Logarithmic-series draw with parameter p in (0,1) (Kemp's second
/// algorithm); pmf p^k / (k * (-ln(1-p))).
fn log_series<F: Real, R: Rng + ?Sized>(p: F, rng: &mut R) -> usize {
    let u = F::uniform_open01(rng);
    if u > p {
        return 1;
    }
    let v = F::uniform_open01(rng);
    let q = F::one() - (F::one() - p).powf(v);
    if u < q * q {
        let k = (F::one() + u.ln() / q.ln()).floor().as_f64();
        return k.max(1.0) as usize;
    }
    if u > q {
        1
    } else {
        2
    }
}

/// Inverse of the Frank conditional CDF C(v | u) used for d = 2 sampling
/// (covers theta < 0).
fn frank_conditional_inverse<F: Real>(theta: F, u: F, w: F) -> F {
    let one = F::one();
    let a = (-theta * u).exp();
    let d = (-theta).exp() - one;
    let b = w * d / (a - w * (a - one));
    -(one + b).ln() / theta
}

/// Bivariate standard normal CDF via one-dimensional quadrature of the
/// conditional decomposition; absolute error well below 1e-6.
fn bivariate_gaussian_cdf<F: Real>(u1: F, u2: F, rho: F) -> F {
    let one = F::one();
    if u1 >= one {
        return u2.min(one);
    }
    if u2 >= one {
        return u1;
    }
    let a = normal_quantile(u1);
    let b = normal_quantile(u2);
    let s2 = one - rho * rho;
    if s2 < F::of(1e-12) {
        return if rho > F::zero() {
            u1.min(u2)
        } else {
            (u1 + u2 - one).max(F::zero())
        };
    }
    let s = s2.sqrt();
    let f = |x: F| normal_pdf(x) * normal_cdf((b - rho * x) / s);
    integrate_tail_panels(f, F::of(-9.0), a.min(F::of(9.0)))
}

/// Bivariate Student-t CDF via the conditional representation: given X = x,
/// (Y - rho x) * sqrt((nu+1) / ((nu + x^2)(1 - rho^2))) is t with nu+1
/// degrees of freedom.
fn bivariate_t_cdf<F: Real>(u1: F, u2: F, rho: F, nu: F) -> F {
    let one = F::one();
    if u1 >= one {
        return u2.min(one);
    }
    if u2 >= one {
        return u1;
    }
    let a = t_quantile(u1, nu);
    let b = t_quantile(u2, nu);
    let s2 = one - rho * rho;
    if s2 < F::of(1e-12) {
        return if rho > F::zero() {
            u1.min(u2)
        } else {
            (u1 + u2 - one).max(F::zero())
        };
    }
    let f = |x: F| {
        let scale = ((nu + one) / ((nu + x * x) * s2)).sqrt();
        t_pdf(x, nu) * t_cdf((b - rho * x) * scale, nu + one)
    };
    // heavy tails need a wider window than the normal case
    integrate_tail_panels(f, F::of(-400.0), a.min(F::of(400.0)))
}

/// Composite Gauss-Legendre over panels that refine near the origin and
/// stretch geometrically into the tails.
fn integrate_tail_panels<F: Real>(f: impl Fn(F) -> F, lo: F, hi: F) -> F {
    if hi <= lo {
        return F::zero();
    }
    let breaks_f64 = [
        -400.0, -200.0, -100.0, -50.0, -25.0, -12.0, -8.0, -6.0, -5.0, -4.0, -3.0, -2.5, -2.0,
        -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0, 25.0,
        50.0, 100.0, 200.0, 400.0,
    ];
    let mut total = F::zero();
    let mut prev = lo;
    for &bk in breaks_f64.iter() {
        let b = F::of(bk);
        if b <= prev {
            continue;
        }
        let end = b.min(hi);
        if end > prev {
            total = total + gauss_legendre(&f, prev, end, 32);
            prev = end;
        }
        if prev >= hi {
            break;
        }
    }
    if prev < hi {
        total = total + gauss_legendre(&f, prev, hi, 32);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn kendall_tau_perfect_orders() {
        let x: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0];
        let y_up = x.clone();
        let y_down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&x, &y_up).unwrap(), 1.0);
        assert_eq!(kendall_tau(&x, &y_down).unwrap(), -1.0);
    }

    #[test]
    fn kendall_tau_hand_counted() {
        // pairs {(1,1),(2,3),(3,2),(4,4)}: 5 concordant, 1 discordant
        let x: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![1.0, 3.0, 2.0, 4.0];
        let tau = kendall_tau(&x, &y).unwrap();
        assert!((tau - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_tau_rejects_constant() {
        let x: Vec<f64> = vec![2.0, 2.0, 2.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(kendall_tau(&x, &y).is_err());
    }

    #[test]
    fn tau_inversions_match_closed_forms() {
        let theta: f64 = tau_to_param(CopulaFamily::Clayton, 0.5).unwrap();
        assert!((theta - 2.0).abs() < 1e-12);
        let theta: f64 = tau_to_param(CopulaFamily::Gumbel, 0.5).unwrap();
        assert!((theta - 2.0).abs() < 1e-12);
        let rho: f64 = tau_to_param(CopulaFamily::Gaussian, 0.5).unwrap();
        assert!((rho - (std::f64::consts::PI / 4.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn tau_round_trips_through_theta() {
        for family in [CopulaFamily::Clayton, CopulaFamily::Gumbel, CopulaFamily::Frank] {
            for tau in [0.1, 0.3, 0.5, 0.7] {
                let theta: f64 = tau_to_param(family, tau).unwrap();
                let back = tau_of_theta(family, theta).unwrap();
                assert!((back - tau).abs() < 1e-8, "{family} tau={tau} got {back}");
            }
        }
    }

    #[test]
    fn clayton_gumbel_rejects_nonpositive_tau() {
        assert!(tau_to_param::<f64>(CopulaFamily::Clayton, 0.0).is_err());
        assert!(tau_to_param::<f64>(CopulaFamily::Gumbel, -0.2).is_err());
    }

    #[test]
    fn clayton_cdf_closed_form() {
        let c: CopulaModel<f64> = CopulaModel::Clayton { theta: 2.0, dim: 2 };
        let got = c.cdf(&[0.5, 0.5]).unwrap();
        assert!((got - 7.0f64.powf(-0.5)).abs() < 1e-12);
        assert_eq!(c.cdf(&[0.0, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn independence_cdf_is_product() {
        let c: CopulaModel<f64> = CopulaModel::Independence { dim: 2 };
        assert!((c.cdf(&[0.5, 0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!((c.cdf(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frank_negative_theta_sampling_matches_tau() {
        let theta: f64 = tau_to_param(CopulaFamily::Frank, -0.4).unwrap();
        assert!(theta < 0.0);
        let c: CopulaModel<f64> = CopulaModel::Frank { theta, dim: 2 };
        let mut rng = stream(3);
        let s = c.sample(4000, &mut rng).unwrap();
        let tau = kendall_tau(&s.column(0), &s.column(1)).unwrap();
        assert!((tau + 0.4).abs() < 0.05, "tau = {tau}");
    }

    #[test]
    fn log_series_matches_pmf() {
        let p = 0.9f64;
        let mut rng = stream(17);
        let n = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let k = log_series(p, &mut rng);
            if k <= 5 {
                counts[k] += 1;
            }
        }
        let norm = -(1.0 - p).ln();
        for (k, &count) in counts.iter().enumerate().take(6).skip(1) {
            let expect = p.powi(k as i32) / (k as f64 * norm);
            let got = count as f64 / n as f64;
            assert!(
                (got - expect).abs() < 4.0 * (expect * (1.0 - expect) / n as f64).sqrt() + 1e-4,
                "k={k} expect {expect} got {got}"
            );
        }
    }

    #[test]
    fn gaussian_bivariate_cdf_independence_case() {
        let c: CopulaModel<f64> = CopulaModel::Gaussian {
            corr: Matrix::identity(2),
        };
        let got = c.cdf(&[0.3, 0.7]).unwrap();
        assert!((got - 0.21).abs() < 1e-8, "{got}");
    }

    #[test]
    fn gaussian_bivariate_cdf_diagonal_symmetry() {
        // C(u, u) at rho = 0.5 equals u/2 + asin-based closed form at u = 0.5:
        // P(X<=0, Y<=0) = 1/4 + asin(rho)/(2 pi)
        let corr: Matrix<f64> = Matrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let c = CopulaModel::Gaussian { corr };
        let want = 0.25 + (0.5f64).asin() / (2.0 * std::f64::consts::PI);
        let got = c.cdf(&[0.5, 0.5]).unwrap();
        assert!((got - want).abs() < 1e-8, "want {want} got {got}");
    }

    #[test]
    fn t_bivariate_cdf_origin_matches_gaussian_identity() {
        // the orthant probability identity holds for any elliptical copula
        let corr: Matrix<f64> = Matrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let c = CopulaModel::StudentT { corr, df: 4.0 };
        let want = 0.25 + (0.5f64).asin() / (2.0 * std::f64::consts::PI);
        let got = c.cdf(&[0.5, 0.5]).unwrap();
        assert!((got - want).abs() < 1e-6, "want {want} got {got}");
    }

    #[test]
    fn elliptical_high_dim_cdf_uses_monte_carlo_with_se() {
        let c: CopulaModel<f64> = CopulaModel::Gaussian {
            corr: Matrix::identity(3),
        };
        let ev = c.cdf_evaluator(50_000, 1).unwrap();
        let (v, se) = ev.value_with_se(&[0.5, 0.5, 0.5]).unwrap();
        let se = se.expect("MC path reports a standard error");
        assert!((v - 0.125).abs() < 4.0 * se + 1e-3);
    }

    #[test]
    fn empirical_beta_cdf_unsupported() {
        let pseudo: Matrix<f64> = Matrix::from_rows(vec![vec![0.25, 0.75], vec![0.5, 0.5], vec![0.75, 0.25]])
            .unwrap();
        let c = CopulaModel::EmpiricalBeta { pseudo, smooth: true };
        assert!(matches!(c.cdf(&[0.5, 0.5]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cdf_rejects_dimension_mismatch() {
        let c: CopulaModel<f64> = CopulaModel::Clayton { theta: 2.0, dim: 2 };
        assert!(c.cdf(&[0.5]).is_err());
    }

    #[test]
    fn sample_zero_rejected() {
        let c: CopulaModel<f64> = CopulaModel::Independence { dim: 2 };
        let mut rng = stream(0);
        assert!(c.sample(0, &mut rng).is_err());
    }
}
