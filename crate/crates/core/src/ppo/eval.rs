//! Best-of-N sampling of a trained policy.

use std::time::Instant;

use crate::circuit::{Circuit, Method, SynthesisResult};
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::rlenv::{action_gate, observe_into};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::net::{sample_action, PolicyParams};

#[derive(Debug, Clone)]
pub struct BestOf {
    /// Shortest solving circuit, `None` when no run solved.
    pub result: Option<SynthesisResult>,
    pub runs: usize,
    pub solved_runs: usize,
}

impl BestOf {
    pub fn solved(&self) -> bool {
        self.result.is_some()
    }

    pub fn cnot_count(&self) -> Option<usize> {
        self.result.as_ref().map(SynthesisResult::cnot_count)
    }
}

/// Samples the stochastic policy `runs` times on `m` and keeps the shortest
/// solving circuit. Run `r` uses stream `r` of `seed`, and a run stops as
/// soon as it can no longer beat the best so far, so the best count over the
/// first `N` runs never increases with `N`.
pub fn evaluate_best_of<T: Scalar>(
    params: &PolicyParams<T>,
    m: &BitMatrix,
    runs: usize,
    max_steps: usize,
    seed: u64,
) -> Result<BestOf> {
    let n = m.n();
    if params.arch().input != n * n || params.arch().actions != n * (n - 1) {
        return Err(Error::DimensionMismatch {
            left: params.arch().input,
            right: n * n,
        });
    }
    if runs == 0 {
        return Err(Error::Config("best-of evaluation needs at least one run".into()));
    }
    let start = Instant::now();
    if m.is_identity() {
        let result = SynthesisResult::checked(m, Circuit::new(n), Method::Rl, 0.0)?;
        return Ok(BestOf {
            result: Some(result),
            runs,
            solved_runs: 1,
        });
    }

    let mut best: Option<Vec<usize>> = None;
    let mut solved_runs = 0;
    let mut obs = Vec::with_capacity(n * n);
    let mut actions = Vec::with_capacity(max_steps);
    for run in 0..runs {
        let limit = best.as_ref().map_or(max_steps, |b| b.len().saturating_sub(1).min(max_steps));
        let mut rng = Rng::with_stream(seed, run as u64);
        let mut state = m.clone();
        actions.clear();
        while actions.len() < limit {
            observe_into(&state, &mut obs);
            let (logits, _) = params.forward(&obs)?;
            let a = sample_action(&logits, &mut rng);
            let g = action_gate(a, n)?;
            state.xor_row(g.control, g.target);
            actions.push(a);
            if state.is_identity() {
                break;
            }
        }
        if state.is_identity() {
            solved_runs += 1;
            best = Some(actions.clone());
        }
    }

    let result = match best {
        Some(acts) => {
            let gates = acts.iter().map(|&a| action_gate(a, n)).collect::<Result<Vec<_>>>()?;
            let circuit = Circuit::from_gates(n, gates)?;
            let r = SynthesisResult::checked(m, circuit, Method::Rl, start.elapsed().as_secs_f64())?;
            if !r.verified {
                return Err(Error::Verification("policy circuit does not reduce the matrix".into()));
            }
            Some(r)
        }
        None => None,
    };
    Ok(BestOf {
        result,
        runs,
        solved_runs,
    })
}
