//! Patel-Markov-Hayes stripe elimination.
//!
//! The matrix is cut into vertical stripes of `stripe_width` columns. Within
//! each stripe, rows sharing a sub-row pattern are first merged into the
//! lowest-index row with that pattern, then ordinary Gaussian elimination
//! clears the entries below the diagonal. After all stripes the matrix is
//! unit upper triangular. The same lower pass on the transpose finishes the
//! job; a row operation `(c, t)` there is a column operation on the
//! untransposed matrix, so pass-two gates are emitted reversed with control
//! and target exchanged.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CnotGate, Method, SynthesisResult};
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmhConfig {
    pub stripe_width: usize,
}

impl Default for PmhConfig {
    fn default() -> Self {
        Self { stripe_width: 2 }
    }
}

impl PmhConfig {
    pub fn new(stripe_width: usize) -> Self {
        Self { stripe_width }
    }

    /// Effective width on an `n x n` matrix; anything wider than `n` is a
    /// single stripe.
    fn width(&self, n: usize) -> Result<usize> {
        if self.stripe_width == 0 {
            return Err(Error::Config("stripe width must be at least 1".into()));
        }
        Ok(self.stripe_width.min(n.max(1)))
    }
}

#[inline]
fn low_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// One lower-elimination pass over columns `0..cols` in stripes of `width`.
///
/// Every applied row operation is appended to `gates`. With
/// `controls_below == false` (the transposed pass), any operation whose control
/// index exceeds its target is a bug, as it would refill a zeroed region.
pub(crate) fn lower_pass(
    m: &mut BitMatrix,
    width: usize,
    cols: usize,
    gates: &mut Vec<CnotGate>,
    controls_below: bool,
) -> Result<()> {
    let n = m.n();
    debug_assert!(width >= 1 && cols <= n);
    let mut start = 0;
    while start < cols {
        let end = (start + width).min(cols);
        let mask = low_mask(end - start);

        // Merge duplicate sub-rows into the first row carrying the pattern.
        let mut seen: Vec<(u64, usize)> = Vec::new();
        for r in start..n {
            let pattern = (m.row(r) >> start) & mask;
            if pattern == 0 {
                continue;
            }
            match seen.iter().find(|(p, _)| *p == pattern) {
                Some(&(_, rep)) => {
                    m.xor_row(rep, r);
                    gates.push(CnotGate::new(rep, r));
                }
                None => seen.push((pattern, r)),
            }
        }

        for col in start..end {
            let mut has_pivot = m.get(col, col);
            for r in col + 1..n {
                if !m.get(r, col) {
                    continue;
                }
                if !has_pivot {
                    if !controls_below {
                        return Err(Error::Verification(format!(
                            "transposed pass needs pivot repair at column {col}"
                        )));
                    }
                    m.xor_row(r, col);
                    gates.push(CnotGate::new(r, col));
                    has_pivot = true;
                }
                m.xor_row(col, r);
                gates.push(CnotGate::new(col, r));
            }
            if !has_pivot {
                return Err(Error::NotInvertible);
            }
        }
        start = end;
    }
    Ok(())
}

/// Zeroes everything below the diagonal, returning the unit upper-triangular
/// result; each row operation is pushed onto `recorder`.
pub fn eliminate_lower(m: &BitMatrix, cfg: PmhConfig, recorder: &mut Vec<CnotGate>) -> Result<BitMatrix> {
    let width = cfg.width(m.n())?;
    let mut work = m.clone();
    lower_pass(&mut work, width, m.n(), recorder, true)?;
    Ok(work)
}

/// Full PMH circuit reducing `m` to the identity.
pub fn pmh_circuit(m: &BitMatrix, cfg: PmhConfig) -> Result<Circuit> {
    let n = m.n();
    let width = cfg.width(n)?;
    let mut first = Vec::new();
    let upper = eliminate_lower(m, cfg, &mut first)?;

    let mut transposed = upper.transpose();
    let mut second = Vec::new();
    lower_pass(&mut transposed, width, n, &mut second, false)?;
    debug_assert!(transposed.is_identity());
    debug_assert!(second.iter().all(|g| g.control < g.target));

    let mut gates = first;
    gates.extend(second.into_iter().rev().map(CnotGate::swapped));
    Circuit::from_gates(n, gates)
}

pub fn synthesize_pmh(m: &BitMatrix, cfg: PmhConfig) -> Result<SynthesisResult> {
    if !m.is_invertible() {
        return Err(Error::NotInvertible);
    }
    let start = Instant::now();
    let circuit = pmh_circuit(m, cfg)?;
    SynthesisResult::checked(m, circuit, Method::Pmh, start.elapsed().as_secs_f64())
}

/// Candidate stripe widths `{1, 2, ceil(log2 n)}` clipped to `[1, n]`.
pub fn sweep_widths(n: usize) -> Vec<usize> {
    let log = (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize;
    let mut widths: Vec<usize> = [1, 2, log].into_iter().map(|k| k.clamp(1, n)).collect();
    widths.sort_unstable();
    widths.dedup();
    widths
}

/// Best PMH result over [`sweep_widths`]; ties go to the smaller width.
pub fn sweep_stripe_width(m: &BitMatrix) -> Result<SynthesisResult> {
    let start = Instant::now();
    let mut best: Option<SynthesisResult> = None;
    for k in sweep_widths(m.n()) {
        let r = synthesize_pmh(m, PmhConfig::new(k))?;
        if best.as_ref().is_none_or(|b| r.cnot_count() < b.cnot_count()) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one width");
    best.wall_time = start.elapsed().as_secs_f64();
    Ok(best)
}
