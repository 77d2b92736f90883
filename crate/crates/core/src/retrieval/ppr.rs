use serde::Serialize;

use super::RetrievalError;
use crate::rule_graph::Transition;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PprResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// L1 residual after each update.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Power iteration `pi <- alpha*gamma + (1-alpha)*pi*A` from `pi = gamma`
/// until the L1 change is at most `epsilon`.
pub fn run_ppr(
    transition: &Transition,
    gamma: &[f64],
    alpha: f64,
    epsilon: f64,
    max_iterations: usize,
) -> Result<PprResult, RetrievalError> {
    let n = transition.len();
    if gamma.len() != n {
        return Err(RetrievalError::InvalidParameter(format!(
            "gamma has {} entries for {n} nodes",
            gamma.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RetrievalError::InvalidParameter(format!("alpha {alpha} not in (0, 1)")));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(RetrievalError::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    let mut pi = gamma.to_vec();
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut residual = f64::INFINITY;
    while residuals.len() < max_iterations {
        for (x, g) in next.iter_mut().zip(gamma) {
            *x = alpha * g;
        }
        for (i, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let m = (1.0 - alpha) * mass;
            for (j, w) in transition.row(i) {
                next[j] += m * w;
            }
        }
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        residuals.push(residual);
        if residual <= epsilon {
            return Ok(PprResult {
                scores: pi,
                iterations: residuals.len(),
                residual,
                alpha,
                epsilon,
                residuals,
            });
        }
    }
    Err(RetrievalError::NonConvergence {
        iterations: max_iterations,
        residual,
    })
}
