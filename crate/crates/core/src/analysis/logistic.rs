use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 40;

/// Coefficient row as reported in the regression table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient<R> {
    pub term: String,
    pub estimate: R,
    pub std_error: R,
    pub z_value: R,
    pub p_value: R,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticFit<R> {
    pub coefficients: Vec<Coefficient<R>>,
    pub log_likelihood: R,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted step, starting from the null model.
    pub trace: Vec<R>,
}

impl<R: Real> LogisticFit<R> {
    pub fn estimate(&self, term: &str) -> Option<R> {
        self.coefficients.iter().find(|c| c.term == term).map(|c| c.estimate)
    }

    pub fn coefficient(&self, term: &str) -> Option<&Coefficient<R>> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Fails when a pivot is not clearly positive relative to the diagonal scale.
pub fn cholesky<R: Real>(a: &[Vec<R>]) -> Option<Vec<Vec<R>>> {
    let n = a.len();
    let scale = a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(R::zero(), R::max);
    let tol = scale * R::epsilon() * R::of_usize(n.max(1)) * R::lit(16.0);
    let mut l = vec![vec![R::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > tol) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b`.
pub fn cholesky_solve<R: Real>(l: &[Vec<R>], b: &[R]) -> Vec<R> {
    let n = l.len();
    let mut y = vec![R::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![R::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn sigmoid<R: Real>(eta: R) -> R {
    if eta >= R::zero() {
        R::one() / (R::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (R::one() + e)
    }
}

/// log(1 + exp(x)) without overflow.
fn softplus<R: Real>(x: R) -> R {
    if x > R::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn linear<R: Real>(row: &[R], beta: &[R]) -> R {
    row.iter().zip(beta).fold(R::zero(), |a, (&x, &b)| a + x * b)
}

pub fn log_likelihood<R: Real>(x: &[Vec<R>], y: &[bool], beta: &[R]) -> R {
    x.iter().zip(y).fold(R::zero(), |acc, (row, &yi)| {
        let eta = linear(row, beta);
        acc - if yi { softplus(-eta) } else { softplus(eta) }
    })
}

/// Gradient and Fisher information at `beta`.
fn score_and_information<R: Real>(x: &[Vec<R>], y: &[bool], beta: &[R]) -> (Vec<R>, Vec<Vec<R>>) {
    let p = beta.len();
    let mut g = vec![R::zero(); p];
    let mut h = vec![vec![R::zero(); p]; p];
    for (row, &yi) in x.iter().zip(y) {
        let mu = sigmoid(linear(row, beta));
        let w = mu * (R::one() - mu);
        let r = if yi { R::one() - mu } else { -mu };
        for j in 0..p {
            g[j] = g[j] + row[j] * r;
            let wj = w * row[j];
            for k in 0..=j {
                h[j][k] = h[j][k] + wj * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            h[k][j] = h[j][k];
        }
    }
    (g, h)
}

/// Two-sided normal tail probability of `z`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. `x` rows must include the intercept column if one is wanted.
pub fn fit_logistic<R: Real>(x: &[Vec<R>], y: &[bool], terms: &[&str]) -> Result<LogisticFit<R>> {
    let p = terms.len();
    if x.len() != y.len() {
        return Err(Error::Analysis(format!("{} design rows for {} outcomes", x.len(), y.len())));
    }
    if let Some(bad) = x.iter().position(|r| r.len() != p) {
        return Err(Error::Analysis(format!("design row {bad} has {} columns, expected {p}", x[bad].len())));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Analysis("outcome needs both correct and incorrect rows".into()));
    }
    let mut gram = vec![vec![R::zero(); p]; p];
    for row in x {
        for j in 0..p {
            for k in 0..p {
                gram[j][k] = gram[j][k] + row[j] * row[k];
            }
        }
    }
    if cholesky(&gram).is_none() {
        return Err(Error::RankDeficient(format!("{p} columns over {} rows are linearly dependent", x.len())));
    }

    let tol = R::lit(1e-8).max(R::epsilon() * R::lit(100.0));
    let mut beta = vec![R::zero(); p];
    let mut ll = log_likelihood(x, y, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (g, h) = score_and_information(x, y, &beta);
        let l = cholesky(&h).ok_or_else(|| {
            Error::NotConverged(format!(
                "information matrix became singular at iteration {iterations}; the outcome is probably perfectly separated"
            ))
        })?;
        let delta = cholesky_solve(&l, &g);
        let mut step = R::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<R> = beta.iter().zip(&delta).map(|(&b, &d)| b + step * d).collect();
            let trial_ll = log_likelihood(x, y, &trial);
            if trial_ll >= ll {
                accepted = Some((trial, trial_ll));
                break;
            }
            step = step * R::lit(0.5);
        }
        let Some((next, next_ll)) = accepted else {
            converged = true;
            break;
        };
        let change = beta.iter().zip(&next).map(|(&a, &b)| (a - b).abs()).fold(R::zero(), R::max);
        beta = next;
        ll = next_ll;
        trace.push(ll);
        if change < tol {
            converged = true;
            break;
        }
    }
    let fitted_extreme = x.iter().zip(y).all(|(row, &yi)| {
        let mu = sigmoid(linear(row, &beta));
        let miss = if yi { R::one() - mu } else { mu };
        miss < R::lit(1e-6)
    });
    if fitted_extreme {
        return Err(Error::NotConverged(format!(
            "the outcome is perfectly separated (log-likelihood {} after {iterations} iterations)",
            ll
        )));
    }
    if !converged {
        return Err(Error::NotConverged(format!(
            "no convergence after {MAX_ITERATIONS} iterations (log-likelihood {ll})"
        )));
    }

    let (_, h) = score_and_information(x, y, &beta);
    let l = cholesky(&h).ok_or_else(|| Error::NotConverged("information matrix singular at the optimum".into()))?;
    let coefficients = (0..p)
        .map(|j| {
            let mut e = vec![R::zero(); p];
            e[j] = R::one();
            let var = cholesky_solve(&l, &e)[j];
            let se = var.sqrt();
            let z = beta[j] / se;
            Coefficient {
                term: terms[j].to_string(),
                estimate: beta[j],
                std_error: se,
                z_value: z,
                p_value: R::lit(normal_two_sided_p(z.as_f64())),
            }
        })
        .collect();
    Ok(LogisticFit { coefficients, log_likelihood: ll, iterations, converged, trace })
}

pub const REGRESSION_HEADER: &str = "term,Estimate,Std. Error,z value,Pr(>|z|)";

fn format_p(p: f64) -> String {
    if p < 2e-16 {
        "<2e-16".into()
    } else if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn regression_csv<R: Real>(fit: &LogisticFit<R>) -> String {
    let mut out = format!("{REGRESSION_HEADER}\n");
    for c in &fit.coefficients {
        let term = if c.term.contains(',') { format!("\"{}\"", c.term) } else { c.term.clone() };
        out.push_str(&format!(
            "{term},{:.6},{:.6},{:.3},{}\n",
            c.estimate.as_f64(),
            c.std_error.as_f64(),
            c.z_value.as_f64(),
            format_p(c.p_value.as_f64())
        ));
    }
    out
}
