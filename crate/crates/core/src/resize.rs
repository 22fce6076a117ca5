//! Adapting an `n x n` instance to a solver that only handles size `m`.
//!
//! For `n > m`, Gaussian striping clears the first `k = n - m` columns with a
//! single PMH stripe of width `k`, then clears the first `k` rows by running
//! the same stripe on the transpose. The first pass is a row-operation
//! prefix; the second acts on columns, so its gates are emitted as a suffix
//! that runs after the block solution:
//!
//! ```text
//! prefix ++ lift(solution of reduced) ++ suffix   solves M
//! ```
//!
//! For `n < m`, the instance is embedded as `block_diag(I, M)`.

use std::time::Instant;

use crate::circuit::{replay, Circuit, CnotGate, Method, SynthesisResult};
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::pmh::{lower_pass, pmh_circuit, PmhConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeReduction {
    /// Row operations of the first pass, applied to the source first.
    pub prefix: Circuit,
    /// Column operations of the transposed pass, as gates to run last.
    pub suffix: Circuit,
    /// The `m x m` block left for the finishing solver.
    pub reduced: BitMatrix,
    /// Number of cleared leading rows/columns, `n - m`.
    pub k: usize,
}

impl StripeReduction {
    /// Gates spent on the reduction itself.
    pub fn overhead(&self) -> usize {
        self.prefix.len() + self.suffix.len()
    }

    /// The intermediate matrix `G M C` produced by the two passes, rebuilt
    /// from the recorded gates: prefix rows first, then suffix gates undone
    /// as column operations.
    pub fn middle(&self, source: &BitMatrix) -> Result<BitMatrix> {
        let mut t = replay(source, &self.prefix)?.transpose();
        for g in self.suffix.gates().iter().rev() {
            t.xor_row(g.target, g.control);
        }
        Ok(t.transpose())
    }

    /// Full circuit on `n` wires given a circuit solving `reduced`.
    pub fn compose(&self, block_solution: &Circuit) -> Result<Circuit> {
        let n = self.prefix.n();
        let lifted = lift_circuit(block_solution, self.k, n)?;
        let mut out = self.prefix.clone();
        out.extend(&lifted)?;
        out.extend(&self.suffix)?;
        Ok(out)
    }
}

/// Gaussian striping of `source` (size `n`) down to an `m x m` block, using
/// one stripe of width `n - m` in each pass.
pub fn gaussian_stripe(source: &BitMatrix, m: usize) -> Result<StripeReduction> {
    let n = source.n();
    if m == 0 || m >= n {
        return Err(Error::Config(format!("target size {m} must be in [1, {n})")));
    }
    gaussian_stripe_with_width(source, m, n - m)
}

/// As [`gaussian_stripe`] but with PMH stripes of `width` inside the cleared region.
pub fn gaussian_stripe_with_width(source: &BitMatrix, m: usize, width: usize) -> Result<StripeReduction> {
    let n = source.n();
    if m == 0 || m >= n {
        return Err(Error::Config(format!("target size {m} must be in [1, {n})")));
    }
    let k = n - m;
    if !(1..=k).contains(&width) {
        return Err(Error::Config(format!("stripe width {width} outside [1, {k}]")));
    }
    if !source.is_invertible() {
        return Err(Error::NotInvertible);
    }

    let mut work = source.clone();
    let mut first = Vec::new();
    lower_pass(&mut work, width, k, &mut first, true)?;

    let mut transposed = work.transpose();
    let mut second = Vec::new();
    lower_pass(&mut transposed, width, k, &mut second, false)?;
    debug_assert!(second.iter().all(|g| g.control < g.target));

    let reduced_t = transposed.block(k, m)?;
    debug_assert_eq!(transposed, BitMatrix::block_diag_identity(k, &reduced_t)?);

    Ok(StripeReduction {
        prefix: Circuit::from_gates(n, first)?,
        suffix: Circuit::from_gates(n, second.into_iter().rev().map(CnotGate::swapped).collect())?,
        reduced: reduced_t.transpose(),
        k,
    })
}

/// `block_diag(identity(m - n), source)`.
pub fn embed(source: &BitMatrix, m: usize) -> Result<BitMatrix> {
    if source.n() >= m {
        return Err(Error::Config(format!(
            "embedding needs n < m, got n = {} and m = {m}",
            source.n()
        )));
    }
    BitMatrix::block_diag_identity(m - source.n(), source)
}

/// Shifts every wire of a block circuit by `offset`, producing an `n`-wire circuit.
pub fn lift_circuit(block: &Circuit, offset: usize, n: usize) -> Result<Circuit> {
    let gates = block
        .gates()
        .iter()
        .map(|g| CnotGate::new(g.control + offset, g.target + offset))
        .collect();
    Circuit::from_gates(n, gates)
}

/// Inverse of [`lift_circuit`] for embedded instances: maps an `m`-wire
/// circuit back onto the `n` embedded wires. Fails if any gate touches a
/// padding wire.
pub fn unembed_circuit(c: &Circuit, n: usize) -> Result<Circuit> {
    let pad = c.n().checked_sub(n).ok_or(Error::DimensionMismatch {
        left: c.n(),
        right: n,
    })?;
    let gates = c
        .gates()
        .iter()
        .map(|g| {
            if g.control < pad || g.target < pad {
                Err(Error::IndexOutOfRange {
                    index: g.control.min(g.target),
                    n: pad,
                })
            } else {
                Ok(CnotGate::new(g.control - pad, g.target - pad))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Circuit::from_gates(n, gates)
}

/// Striping to `m` followed by PMH on the reduced block.
pub fn synthesize_pmh_star(source: &BitMatrix, m: usize, cfg: PmhConfig) -> Result<(SynthesisResult, usize)> {
    let start = Instant::now();
    let red = gaussian_stripe(source, m)?;
    let block = pmh_circuit(&red.reduced, cfg)?;
    let circuit = red.compose(&block)?;
    let result = SynthesisResult::checked(source, circuit, Method::PmhStar, start.elapsed().as_secs_f64())?;
    Ok((result, red.overhead()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::verify_solves;
    use crate::generators::{gen_random_cnots, gen_suite, LogBase, Setting};
    use crate::rng::Rng;

    fn assert_block_form(source: &BitMatrix, red: &StripeReduction) {
        let mid = red.middle(source).unwrap();
        assert_eq!(mid, BitMatrix::block_diag_identity(red.k, &red.reduced).unwrap());
        assert!(red.reduced.is_invertible());
    }

    #[test]
    fn already_block_diagonal_needs_nothing() {
        let mut rng = Rng::seed(1);
        let inner = gen_random_cnots(8, 64, &mut rng);
        let m = BitMatrix::block_diag_identity(3, &inner).unwrap();
        let red = gaussian_stripe(&m, 8).unwrap();
        assert!(red.prefix.is_empty());
        assert!(red.suffix.is_empty());
        assert_eq!(red.reduced, inner);
    }

    #[test]
    fn rare_nine_to_eight() {
        let suite = gen_suite(Setting::Rare, 9, 100, 5, LogBase::Natural).unwrap();
        for m in &suite {
            let red = gaussian_stripe(m, 8).unwrap();
            assert_block_form(m, &red);
        }
    }

    #[test]
    fn block_form_for_all_widths() {
        let mut rng = Rng::seed(2);
        for _ in 0..500 {
            let n = 3 + rng.below(13);
            let m = 1 + rng.below(n - 1);
            let src = gen_random_cnots(n, n * n, &mut rng);
            let width = 1 + rng.below(n - m);
            let red = gaussian_stripe_with_width(&src, m, width).unwrap();
            assert_block_form(&src, &red);
            assert!(red.suffix.gates().iter().all(|g| g.control > g.target));
        }
    }

    #[test]
    fn composed_pipeline_solves_n12() {
        let mut rng = Rng::seed(3);
        for _ in 0..1000 {
            let src = gen_random_cnots(12, 144, &mut rng);
            let red = gaussian_stripe(&src, 8).unwrap();
            let block = pmh_circuit(&red.reduced, PmhConfig::default()).unwrap();
            let full = red.compose(&block).unwrap();
            assert!(verify_solves(&src, &full).unwrap());
            assert_eq!(full.len(), red.overhead() + block.len());
        }
    }

    #[test]
    fn pmh_star_verifies() {
        let mut rng = Rng::seed(4);
        for n in 9..=15 {
            let src = gen_random_cnots(n, n * n, &mut rng);
            let (r, overhead) = synthesize_pmh_star(&src, 8, PmhConfig::default()).unwrap();
            assert!(r.verified);
            assert!(overhead <= r.cnot_count());
        }
    }

    #[test]
    fn stripe_errors() {
        let i = BitMatrix::identity(5).unwrap();
        assert!(gaussian_stripe(&i, 5).is_err());
        assert!(gaussian_stripe(&i, 0).is_err());
        let singular = BitMatrix::from_bits(&[&[1, 1, 0], &[1, 1, 0], &[0, 0, 1]]).unwrap();
        assert!(matches!(gaussian_stripe(&singular, 2), Err(Error::NotInvertible)));
    }

    #[test]
    fn embed_examples() {
        assert_eq!(
            embed(&BitMatrix::identity(3).unwrap(), 8).unwrap(),
            BitMatrix::identity(8).unwrap()
        );
        let swap = BitMatrix::from_bits(&[&[0, 1], &[1, 0]]).unwrap();
        let e = embed(&swap, 3).unwrap();
        assert_eq!(e, BitMatrix::from_bits(&[&[1, 0, 0], &[0, 0, 1], &[0, 1, 0]]).unwrap());
        assert_eq!(e.hamming_to_identity(), swap.hamming_to_identity());
        assert!(embed(&swap, 2).is_err());
    }

    #[test]
    fn lift_examples() {
        let c = Circuit::from_gates(3, vec![CnotGate::new(0, 1)]).unwrap();
        assert_eq!(lift_circuit(&c, 0, 3).unwrap(), c);
        assert_eq!(
            lift_circuit(&c, 2, 5).unwrap().gates(),
            &[CnotGate::new(2, 3)]
        );
        assert!(lift_circuit(&c, 3, 4).is_err());
    }

    #[test]
    fn embed_solve_unembed() {
        let mut rng = Rng::seed(6);
        for _ in 0..300 {
            let n = 3 + rng.below(5);
            let src = gen_random_cnots(n, n * n, &mut rng);
            let e = embed(&src, 8).unwrap();
            let c = pmh_circuit(&e, PmhConfig::default()).unwrap();
            assert!(c.within(8 - n, 8));
            let back = unembed_circuit(&c, n).unwrap();
            assert!(verify_solves(&src, &back).unwrap());
        }
        let touching = Circuit::from_gates(4, vec![CnotGate::new(0, 2)]).unwrap();
        assert!(unembed_circuit(&touching, 3).is_err());
    }
}
