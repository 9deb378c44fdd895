//! Special functions and quadrature used by the parametric margins and
//! copulas: log-gamma, regularized incomplete gamma/beta, normal and
//! Student-t distribution functions, the first Debye function, and
//! Gauss-Legendre nodes.

use crate::scalar::Real;

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for x > 0.
pub fn ln_gamma<F: Real>(x: F) -> F {
    const COEF: [f64; 9] = [
        0.9999999999998099,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.3234287776531,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984369578019572e-06,
        1.505_632_735_149_311_6e-7,
    ];
    if x < F::of(0.5) {
        // reflection formula
        let pi = F::of(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut a = F::of(COEF[0]);
    let t = x + F::of(7.5);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a = a + F::of(c) / (x + F::from_count(i));
    }
    F::of(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + F::of(0.5)) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
pub fn reg_lower_gamma<F: Real>(a: F, x: F) -> F {
    if x <= F::zero() {
        return F::zero();
    }
    if x < a + F::one() {
        // series representation
        let mut term = F::one() / a;
        let mut sum = term;
        let mut n = F::one();
        for _ in 0..500 {
            term = term * x / (a + n);
            sum = sum + term;
            if term.abs() < sum.abs() * F::of(1e-16) {
                break;
            }
            n = n + F::one();
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // continued fraction for Q(a, x), modified Lentz
        let tiny = F::of(1e-300);
        let mut b = x + F::one() - a;
        let mut c = F::one() / tiny;
        let mut d = F::one() / b;
        let mut h = d;
        for i in 1..500 {
            let an = -F::from_count(i) * (F::from_count(i) - a);
            b = b + F::of(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = F::one() / d;
            let del = d * c;
            h = h * del;
            if (del - F::one()).abs() < F::of(1e-16) {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        (F::one() - q).max(F::zero()).min(F::one())
    }
}

/// Gamma density with shape `a` and rate 1 at x; used for Newton refinement.
pub fn gamma_pdf_rate1<F: Real>(a: F, x: F) -> F {
    if x <= F::zero() {
        return F::zero();
    }
    ((a - F::one()) * x.ln() - x - ln_gamma(a)).exp()
}

/// Regularized incomplete beta I_x(a, b) via the standard continued fraction.
pub fn reg_inc_beta<F: Real>(a: F, b: F, x: F) -> F {
    if x <= F::zero() {
        return F::zero();
    }
    if x >= F::one() {
        return F::one();
    }
    let front = (a * x.ln() + b * (F::one() - x).ln() + ln_gamma(a + b)
        - ln_gamma(a)
        - ln_gamma(b))
    .exp();
    // use the symmetry that converges fastest; <= keeps the boundary case
    // (x equal to the pivot) from recursing forever
    if x <= (a + F::one()) / (a + b + F::of(2.0)) {
        front * beta_cf(a, b, x) / a
    } else {
        F::one() - reg_inc_beta(b, a, F::one() - x)
    }
}

fn beta_cf<F: Real>(a: F, b: F, x: F) -> F {
    let tiny = F::of(1e-300);
    let qab = a + b;
    let qap = a + F::one();
    let qam = a - F::one();
    let mut c = F::one();
    let mut d = F::one() - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = F::one() / d;
    let mut h = d;
    for m in 1..500 {
        let m_f = F::from_count(m);
        let m2 = F::of(2.0) * m_f;
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = F::one() + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = F::one() + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = F::one() / d;
        h = h * d * c;
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = F::one() + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = F::one() + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = F::one() / d;
        let del = d * c;
        h = h * del;
        if (del - F::one()).abs() < F::of(1e-16) {
            break;
        }
    }
    h
}

/// Standard normal CDF through the incomplete gamma function.
pub fn normal_cdf<F: Real>(x: F) -> F {
    let half = F::of(0.5);
    let p = reg_lower_gamma(half, x * x * half);
    if x >= F::zero() {
        half + half * p
    } else {
        half - half * p
    }
}

pub fn normal_pdf<F: Real>(x: F) -> F {
    F::of(1.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-x * x * F::of(0.5)).exp()
}

/// Standard normal quantile: Acklam's rational approximation refined with one
/// Halley step against `normal_cdf`.
pub fn normal_quantile<F: Real>(p: F) -> F {
    assert!(p > F::zero() && p < F::one(), "quantile domain is (0,1)");
    let p64 = p.as_f64();
    let x0 = acklam(p64);
    let mut x = F::of(x0);
    // Halley refinement
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        x = x - u / (F::one() + x * u * F::of(0.5));
    }
    x
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        138.357751867269,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Student-t CDF with `nu` degrees of freedom.
pub fn t_cdf<F: Real>(x: F, nu: F) -> F {
    let half = F::of(0.5);
    if x == F::zero() {
        return half;
    }
    let ib = reg_inc_beta(nu * half, half, nu / (nu + x * x));
    if x > F::zero() {
        F::one() - half * ib
    } else {
        half * ib
    }
}

pub fn t_pdf<F: Real>(x: F, nu: F) -> F {
    let half = F::of(0.5);
    let c = ln_gamma((nu + F::one()) * half)
        - ln_gamma(nu * half)
        - half * (nu * F::of(std::f64::consts::PI)).ln();
    (c - (nu + F::one()) * half * (F::one() + x * x / nu).ln()).exp()
}

/// Student-t quantile: Newton iterations on `t_cdf` from a normal start.
pub fn t_quantile<F: Real>(p: F, nu: F) -> F {
    assert!(p > F::zero() && p < F::one(), "quantile domain is (0,1)");
    let mut x = normal_quantile(p);
    for _ in 0..60 {
        let f = t_cdf(x, nu) - p;
        let d = t_pdf(x, nu);
        if d <= F::zero() {
            break;
        }
        let step = f / d;
        x = x - step;
        if step.abs() < F::of(1e-13) * (F::one() + x.abs()) {
            break;
        }
    }
    x
}

/// First Debye function D1(x) = (1/x) * Int_0^x t/(e^t - 1) dt, x != 0.
pub fn debye1<F: Real>(x: F) -> F {
    let ax = x.abs();
    // integrand has a removable singularity at 0 where it equals 1
    let f = |t: F| {
        if t.abs() < F::of(1e-8) {
            F::one() - t * F::of(0.5)
        } else {
            t / (t.exp() - F::one())
        }
    };
    let n_panels = 8;
    let mut total = F::zero();
    let width = ax / F::from_count(n_panels);
    for i in 0..n_panels {
        let lo = width * F::from_count(i);
        total = total + gauss_legendre(f, lo, lo + width, 32);
    }
    let d1 = total / ax;
    // D1(-x) = D1(x) + x/2
    if x >= F::zero() {
        d1
    } else {
        d1 + ax * F::of(0.5)
    }
}

/// Nodes/weights for n-point Gauss-Legendre on [-1, 1]; computed once per
/// order and cached (CDF quadrature evaluates thousands of panels).
pub fn gauss_legendre_nodes<F: Real>(n: usize) -> Vec<(F, F)> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    type NodeTable = HashMap<usize, Arc<Vec<(f64, f64)>>>;
    static CACHE: OnceLock<Mutex<NodeTable>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let nodes = {
        let mut guard = cache.lock().expect("node cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(compute_gauss_legendre_nodes(n)))
            .clone()
    };
    nodes.iter().map(|&(x, w)| (F::of(x), F::of(w))).collect()
}

fn compute_gauss_legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // evaluate Legendre P_n and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        out.push((-x, w));
    }
    out
}

/// n-point Gauss-Legendre integral of `f` over [a, b].
pub fn gauss_legendre<F: Real>(f: impl Fn(F) -> F, a: F, b: F, n: usize) -> F {
    let half = F::of(0.5);
    let mid = (a + b) * half;
    let len = (b - a) * half;
    let mut s = F::zero();
    for (x, w) in gauss_legendre_nodes::<F>(n) {
        s = s + w * f(mid + len * x);
    }
    s * len
}
