//! Parametric gamma marginal model: shape alpha shared per dimension, rate
//! log-linear in the covariates. Fitting runs iteratively reweighted least
//! squares for the mean with a log link, then converts to the rate scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::special::{gamma_pdf_rate1, reg_lower_gamma};

/// Gamma margin with rate theta(z) = exp(beta' [1, z]) and shape alpha, so
/// the mean is alpha / theta(z).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaGlmModel<F> {
    /// Intercept plus coefficients on the log-rate scale (original covariate
    /// units).
    pub beta: Vec<F>,
    pub alpha: F,
}

const MAX_ITER: usize = 100;

/// Fit by IRLS on the mean scale (log link, unit working weights for the
/// gamma family), then estimate alpha by Pearson moments and convert the
/// mean coefficients to the rate parameterization.
pub fn fit_gamma_glm<F: Real>(z: &Matrix<F>, y: &[F]) -> Result<GammaGlmModel<F>> {
    let n = z.nrows();
    let p = z.ncols();
    if y.len() != n {
        return Err(Error::dim(format!("{} rows vs {} targets", n, y.len())));
    }
    if n <= p + 1 {
        return Err(Error::invalid(format!(
            "gamma GLM needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    if y.iter().any(|&v| v <= F::zero() || !v.is_finite()) {
        return Err(Error::invalid("gamma GLM requires strictly positive responses"));
    }

    // standardize covariates for IRLS stability
    let mut means = vec![F::zero(); p];
    let mut sds = vec![F::one(); p];
    for j in 0..p {
        let col = z.column(j);
        let m: F = col.iter().copied().sum::<F>() / F::from_count(n);
        let var: F = col.iter().map(|&v| (v - m) * (v - m)).sum::<F>() / F::from_count(n);
        means[j] = m;
        let sd = var.sqrt();
        sds[j] = if sd > F::zero() { sd } else { F::one() };
    }
    let design = Matrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            F::one()
        } else {
            (z[(i, j - 1)] - means[j - 1]) / sds[j - 1]
        }
    });

    // eta = X gamma, mu = exp(eta); working response eta + (y - mu)/mu,
    // constant working weights for gamma + log
    let mean_y: F = y.iter().copied().sum::<F>() / F::from_count(n);
    let mut coef = vec![F::zero(); p + 1];
    coef[0] = mean_y.ln();
    let mut deviance = F::infinity();
    let mut trace: Vec<f64> = Vec::new();

    let xtx = {
        let mut m = Matrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let row = design.row(i);
            for a in 0..p + 1 {
                for b in 0..p + 1 {
                    m[(a, b)] = m[(a, b)] + row[a] * row[b];
                }
            }
        }
        m
    };

    for _iter in 0..MAX_ITER {
        let eta: Vec<F> = (0..n)
            .map(|i| {
                design
                    .row(i)
                    .iter()
                    .zip(&coef)
                    .map(|(&x, &c)| x * c)
                    .sum()
            })
            .collect();
        let mu: Vec<F> = eta.iter().map(|&e| e.exp()).collect();
        if mu.iter().any(|&m| !m.is_finite() || m <= F::zero()) {
            return Err(Error::Numerical(format!(
                "IRLS diverged (non-finite mean); iterations: {trace:?}"
            )));
        }
        let new_dev = gamma_deviance(y, &mu);
        trace.push(new_dev.as_f64());
        if new_dev > deviance + F::of(1e-8) * (F::one() + deviance.abs()) {
            return Err(Error::Numerical(format!(
                "IRLS deviance increased; iterations: {trace:?}"
            )));
        }
        deviance = new_dev;

        let working: Vec<F> = (0..n).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]).collect();
        let mut xtz = vec![F::zero(); p + 1];
        for (i, &w) in working.iter().enumerate() {
            let row = design.row(i);
            for a in 0..p + 1 {
                xtz[a] = xtz[a] + row[a] * w;
            }
        }
        let next = xtx.solve_spd(&xtz)?;
        let delta = next
            .iter()
            .zip(&coef)
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), F::max);
        coef = next;
        if delta < F::of(1e-10) {
            break;
        }
    }

    // fitted means and Pearson shape estimate
    let mu: Vec<F> = (0..n)
        .map(|i| {
            design
                .row(i)
                .iter()
                .zip(&coef)
                .map(|(&x, &c)| x * c)
                .sum::<F>()
                .exp()
        })
        .collect();
    let pearson: F = (0..n)
        .map(|i| {
            let r = (y[i] - mu[i]) / mu[i];
            r * r
        })
        .sum();
    // dispersion below ~1e-12 is a numerical point mass
    if pearson <= F::from_count(n - p - 1) * F::of(1e-12) {
        return Err(Error::Numerical(
            "zero dispersion: responses are degenerate at the fitted mean".into(),
        ));
    }
    let alpha = F::from_count(n - p - 1) / pearson;

    // de-standardize the mean coefficients, then move to the rate scale:
    // log theta(z) = log alpha - log mu(z)
    let mut mean_coef = vec![F::zero(); p + 1];
    mean_coef[0] = coef[0];
    for j in 0..p {
        mean_coef[j + 1] = coef[j + 1] / sds[j];
        mean_coef[0] = mean_coef[0] - coef[j + 1] * means[j] / sds[j];
    }
    let mut beta = vec![F::zero(); p + 1];
    beta[0] = alpha.ln() - mean_coef[0];
    for j in 0..p {
        beta[j + 1] = -mean_coef[j + 1];
    }

    Ok(GammaGlmModel { beta, alpha })
}

fn gamma_deviance<F: Real>(y: &[F], mu: &[F]) -> F {
    y.iter()
        .zip(mu)
        .map(|(&yi, &mi)| F::of(2.0) * (-(yi / mi).ln() + (yi - mi) / mi))
        .sum()
}

impl<F: Real> GammaGlmModel<F> {
    pub fn p(&self) -> usize {
        self.beta.len() - 1
    }

    /// Rate theta(z) = exp(beta0 + beta' z).
    pub fn rate(&self, z: &[F]) -> Result<F> {
        if z.len() + 1 != self.beta.len() {
            return Err(Error::dim(format!(
                "covariate row has {} columns, model expects {}",
                z.len(),
                self.beta.len() - 1
            )));
        }
        let lin: F = self.beta[0]
            + z.iter()
                .zip(&self.beta[1..])
                .map(|(&zi, &b)| zi * b)
                .sum::<F>();
        Ok(lin.exp())
    }

    /// Fitted mean alpha / theta(z).
    pub fn mean(&self, z: &[F]) -> Result<F> {
        Ok(self.alpha / self.rate(z)?)
    }

    /// Gamma CDF at x: regularized lower incomplete gamma P(alpha, theta(z) x).
    /// Non-positive x maps to 0 by convention.
    pub fn cdf(&self, x: F, z: &[F]) -> Result<F> {
        let theta = self.rate(z)?;
        if x <= F::zero() {
            return Ok(F::zero());
        }
        Ok(reg_lower_gamma(self.alpha, theta * x))
    }

    /// Numeric inverse of [`Self::cdf`]: bracketed bisection refined with
    /// Newton, absolute tolerance 1e-10 on the probability scale.
    pub fn quantile(&self, u: F, z: &[F]) -> Result<F> {
        if u <= F::zero() || u >= F::one() {
            return Err(Error::invalid(format!("quantile requires u in (0,1), got {u}")));
        }
        let theta = self.rate(z)?;
        // invert on the rate-1 scale then rescale
        let target = u;
        let alpha = self.alpha;

        // bracket [lo, hi] with P(alpha, hi) >= u
        let mut hi = alpha.max(F::one());
        for _ in 0..200 {
            if reg_lower_gamma(alpha, hi) >= target {
                break;
            }
            hi = hi * F::of(2.0);
        }
        let mut lo = F::zero();
        let mut x = alpha.min(hi * F::of(0.5)).max(hi * F::of(1e-6));
        for _ in 0..200 {
            let f = reg_lower_gamma(alpha, x) - target;
            if f.abs() < F::of(1e-10) {
                break;
            }
            if f > F::zero() {
                hi = x;
            } else {
                lo = x;
            }
            let d = gamma_pdf_rate1(alpha, x);
            let newton = if d > F::zero() { x - f / d } else { F::neg_infinity() };
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) * F::of(0.5)
            };
        }
        Ok(x / theta)
    }
}
