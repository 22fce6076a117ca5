//! The CNOT-minimization decision process seen by the agent.
//!
//! State: an `m x m` matrix. Action: an ordered pair `(i, j)`, `i != j`,
//! meaning "XOR row `j` into row `i`", i.e. the gate with control `j` and
//! target `i`. Episodes end when the identity is reached or after
//! `max_steps` moves.

use std::fs;
use std::path::Path;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::circuit::CnotGate;
use crate::error::{Error, Result};
use crate::generators::{BudgetExpr, LogBase, MatrixClass};
use crate::gf2::BitMatrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec<T> {
    pub solve_bonus: T,
    pub diag_coeff: T,
    pub offdiag_coeff: T,
    /// Numerator of the idle penalty; the applied penalty is `-idle_penalty / n^2`.
    pub idle_penalty: T,
}

impl<T: Float> Default for RewardSpec<T> {
    fn default() -> Self {
        let c = |v: f64| T::from(v).expect("representable constant");
        Self {
            solve_bonus: c(0.7),
            diag_coeff: c(0.2),
            offdiag_coeff: c(0.1),
            idle_penalty: c(0.001),
        }
    }
}

/// Shaped reward for moving from `before` to `after` by a single CNOT.
///
/// * `after` is the identity: the solve bonus alone.
/// * Hamming distance to the identity changed: `0.2 d/n - 0.1 dbar/n^2`,
///   where `d` and `dbar` are the changes in diagonal and off-diagonal ones.
/// * Otherwise the idle penalty.
pub fn reward<T: Float>(before: &BitMatrix, after: &BitMatrix, spec: &RewardSpec<T>) -> Result<T> {
    if before.n() != after.n() {
        return Err(Error::DimensionMismatch {
            left: before.n(),
            right: after.n(),
        });
    }
    if after.is_identity() {
        return Ok(spec.solve_bonus);
    }
    let n = T::from(before.n()).expect("small integer");
    if before.hamming_to_identity() != after.hamming_to_identity() {
        let d = T::from(after.diag_ones() as i64 - before.diag_ones() as i64).expect("small integer");
        let dbar = T::from(after.offdiag_ones() as i64 - before.offdiag_ones() as i64).expect("small integer");
        Ok(spec.diag_coeff * d / n - spec.offdiag_coeff * dbar / (n * n))
    } else {
        Ok(-spec.idle_penalty / (n * n))
    }
}

pub fn action_count(m: usize) -> usize {
    m * (m - 1)
}

/// Action index to the pair `(i, j)`: row `i` is XORed with row `j`.
pub fn action_decode(action: usize, m: usize) -> Result<(usize, usize)> {
    if m < 2 || action >= action_count(m) {
        return Err(Error::IndexOutOfRange {
            index: action,
            n: action_count(m),
        });
    }
    let i = action / (m - 1);
    let mut j = action % (m - 1);
    if j >= i {
        j += 1;
    }
    Ok((i, j))
}

pub fn action_encode(i: usize, j: usize, m: usize) -> Result<usize> {
    if i >= m || j >= m {
        return Err(Error::IndexOutOfRange { index: i.max(j), n: m });
    }
    if i == j {
        return Err(Error::SameControlTarget(i));
    }
    Ok(i * (m - 1) + if j > i { j - 1 } else { j })
}

/// The gate realized by an action under the row-XOR convention.
pub fn action_gate(action: usize, m: usize) -> Result<CnotGate> {
    let (i, j) = action_decode(action, m)?;
    Ok(CnotGate::new(j, i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub matrix: BitMatrix,
    pub steps_taken: usize,
    pub max_steps: usize,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    pub reward: T,
    pub done: bool,
    pub solved: bool,
}

/// Default episode cap: `3 m^2` moves.
pub fn default_max_steps(m: usize) -> usize {
    3 * m * m
}

#[derive(Debug, Clone)]
pub struct CnotEnv<T> {
    m: usize,
    reward: RewardSpec<T>,
    state: EnvState,
}

impl<T: Float> CnotEnv<T> {
    pub fn new(m: usize, max_steps: usize, reward: RewardSpec<T>) -> Result<Self> {
        if m < 2 {
            return Err(Error::DimensionOutOfRange { n: m, max: 64 });
        }
        Ok(Self {
            m,
            reward,
            state: EnvState {
                matrix: BitMatrix::identity(m)?,
                steps_taken: 0,
                max_steps,
                done: true,
            },
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn reset(&mut self, matrix: BitMatrix) -> Result<()> {
        if matrix.n() != self.m {
            return Err(Error::DimensionMismatch {
                left: self.m,
                right: matrix.n(),
            });
        }
        self.state.done = matrix.is_identity();
        self.state.matrix = matrix;
        self.state.steps_taken = 0;
        Ok(())
    }

    /// Writes the row-major 0/1 observation into `out`.
    pub fn observe(&self, out: &mut Vec<T>) {
        observe_into(&self.state.matrix, out);
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome<T>> {
        if self.state.done {
            return Err(Error::EpisodeDone);
        }
        let gate = action_gate(action, self.m)?;
        let before = self.state.matrix.clone();
        self.state.matrix.xor_row(gate.control, gate.target);
        self.state.steps_taken += 1;
        let reward = reward(&before, &self.state.matrix, &self.reward)?;
        let solved = self.state.matrix.is_identity();
        self.state.done = solved || self.state.steps_taken >= self.state.max_steps;
        Ok(StepOutcome {
            reward,
            done: self.state.done,
            solved,
        })
    }
}

pub fn observe_into<T: Float>(m: &BitMatrix, out: &mut Vec<T>) {
    out.clear();
    for i in 0..m.n() {
        let row = m.row(i);
        for j in 0..m.n() {
            out.push(if (row >> j) & 1 == 1 { T::one() } else { T::zero() });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumPhase {
    pub start: usize,
    pub end: usize,
    pub source: MatrixClass,
}

/// Ordered, contiguous phases covering `0..total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    phases: Vec<CurriculumPhase>,
}

/// Episode boundaries of the full-length curriculum.
const FULL_SCHEDULE: [(usize, usize, MatrixClass); 7] = [
    (0, 1500, MatrixClass::Permutation),
    (1500, 3000, MatrixClass::Triangular),
    (3000, 6000, MatrixClass::StructuredMix),
    (6000, 10_000, MatrixClass::RandomCnots(BudgetExpr::HalfN)),
    (10_000, 20_000, MatrixClass::RandomCnots(BudgetExpr::N)),
    (20_000, 50_000, MatrixClass::RandomCnots(BudgetExpr::NLogN)),
    (50_000, 100_000, MatrixClass::RandomCnots(BudgetExpr::NSq)),
];

impl Schedule {
    pub fn new(phases: Vec<CurriculumPhase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Config("schedule has no phases".into()));
        }
        let mut expected = 0;
        for p in &phases {
            if p.start != expected || p.end <= p.start {
                return Err(Error::Config(format!(
                    "phase [{}, {}) does not continue at episode {expected}",
                    p.start, p.end
                )));
            }
            expected = p.end;
        }
        Ok(Self { phases })
    }

    /// 100k episodes: permutations, triangular, a mix of both, then random
    /// matrices with `n/2`, `n`, `n log n` and `n^2` CNOTs.
    pub fn standard() -> Self {
        Self::new(
            FULL_SCHEDULE
                .iter()
                .map(|&(start, end, source)| CurriculumPhase { start, end, source })
                .collect(),
        )
        .expect("static schedule is valid")
    }

    /// Same phase proportions stretched or shrunk to `total` episodes.
    /// Phases that would round to zero length are dropped.
    pub fn scaled_to(&self, total: usize) -> Result<Self> {
        if total == 0 {
            return Err(Error::Config("scaled schedule needs at least one episode".into()));
        }
        let old = self.total() as f64;
        let scale = |e: usize| ((e as f64) * total as f64 / old).round() as usize;
        let phases = self
            .phases
            .iter()
            .map(|p| CurriculumPhase {
                start: scale(p.start),
                end: scale(p.end),
                source: p.source,
            })
            .filter(|p| p.end > p.start)
            .collect();
        Self::new(phases)
    }

    pub fn total(&self) -> usize {
        self.phases.last().map_or(0, |p| p.end)
    }

    pub fn phases(&self) -> &[CurriculumPhase] {
        &self.phases
    }

    pub fn phase_index(&self, episode: usize) -> Result<usize> {
        self.phases
            .iter()
            .position(|p| (p.start..p.end).contains(&episode))
            .ok_or(Error::EpisodeOutOfRange {
                episode,
                total: self.total(),
            })
    }

    pub fn source(&self, episode: usize) -> Result<MatrixClass> {
        Ok(self.phases[self.phase_index(episode)?].source)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<ScheduleEntry> = serde_json::from_str(text)?;
        Self::new(entries.into_iter().map(ScheduleEntry::into_phase).collect::<Result<_>>()?)
    }

    pub fn to_json(&self) -> Result<String> {
        let entries: Vec<ScheduleEntry> = self.phases.iter().map(ScheduleEntry::from_phase).collect();
        Ok(serde_json::to_string_pretty(&entries)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn curriculum_source(episode: usize, schedule: &Schedule) -> Result<MatrixClass> {
    schedule.source(episode)
}

/// Draws the starting matrix for `episode`, redrawing identities.
pub fn sample_start(episode: usize, schedule: &Schedule, m: usize, base: LogBase, rng: &mut Rng) -> Result<BitMatrix> {
    let class = schedule.source(episode)?;
    loop {
        let mat = class.sample(m, base, rng);
        if !mat.is_identity() {
            return Ok(mat);
        }
    }
}

/// On-disk schedule entry: `{start, end, class, budget_expr}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScheduleEntry {
    start: usize,
    end: usize,
    class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget_expr: Option<BudgetExpr>,
}

impl ScheduleEntry {
    fn from_phase(p: &CurriculumPhase) -> Self {
        let (class, budget_expr) = match p.source {
            MatrixClass::Permutation => ("permutation", None),
            MatrixClass::UpperTriangular => ("upper_triangular", None),
            MatrixClass::LowerTriangular => ("lower_triangular", None),
            MatrixClass::Triangular => ("triangular", None),
            MatrixClass::StructuredMix => ("mixture", None),
            MatrixClass::RandomCnots(e) => ("random_cnots", Some(e)),
        };
        Self {
            start: p.start,
            end: p.end,
            class: class.into(),
            budget_expr,
        }
    }

    fn into_phase(self) -> Result<CurriculumPhase> {
        let source = match (self.class.as_str(), self.budget_expr) {
            ("permutation", None) => MatrixClass::Permutation,
            ("upper_triangular", None) => MatrixClass::UpperTriangular,
            ("lower_triangular", None) => MatrixClass::LowerTriangular,
            ("triangular", None) => MatrixClass::Triangular,
            ("mixture", None) => MatrixClass::StructuredMix,
            ("random_cnots", Some(e)) => MatrixClass::RandomCnots(e),
            (c, b) => {
                return Err(Error::Config(format!(
                    "bad schedule entry class {c:?} with budget {b:?}"
                )))
            }
        };
        Ok(CurriculumPhase {
            start: self.start,
            end: self.end,
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_random_cnots;

    fn spec() -> RewardSpec<f64> {
        RewardSpec::default()
    }

    #[test]
    fn decode_examples() {
        assert_eq!(action_decode(0, 2).unwrap(), (0, 1));
        assert_eq!(action_decode(1, 2).unwrap(), (1, 0));
        assert_eq!(action_count(8), 56);
        for m in 2..=9 {
            let mut seen = std::collections::HashSet::new();
            for a in 0..action_count(m) {
                let (i, j) = action_decode(a, m).unwrap();
                assert_ne!(i, j);
                assert!(seen.insert((i, j)));
                assert_eq!(action_encode(i, j, m).unwrap(), a);
            }
        }
        assert!(action_decode(56, 8).is_err());
        assert!(action_encode(2, 2, 8).is_err());
    }

    #[test]
    fn action_gate_convention() {
        // (i, j) = (1, 0): row 1 ^= row 0, so control 0 and target 1.
        let a = action_encode(1, 0, 3).unwrap();
        assert_eq!(action_gate(a, 3).unwrap(), CnotGate::new(0, 1));
    }

    #[test]
    fn reward_solve() {
        let i = BitMatrix::identity(8).unwrap();
        let before = i.apply_cnot(0, 1).unwrap();
        assert_eq!(reward(&before, &i, &spec()).unwrap(), 0.7);
    }

    fn with_rows(n: usize, edits: &[(usize, u64)]) -> BitMatrix {
        let mut rows: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
        for &(i, r) in edits {
            rows[i] = r;
        }
        BitMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn reward_diag_gain_only() {
        // row 0 = e1, row 2 = e0 + e1 + e2; row 0 ^= row 2 gives e0 + e2:
        // one diagonal one gained, off-diagonal count unchanged.
        let m1 = with_rows(8, &[(0, 0b010), (2, 0b111)]);
        let m2 = m1.apply_cnot(2, 0).unwrap();
        assert_eq!(m2.diag_ones() as i64 - m1.diag_ones() as i64, 1);
        assert_eq!(m2.offdiag_ones(), m1.offdiag_ones());
        let r = reward(&m1, &m2, &spec()).unwrap();
        assert!((r - 0.025).abs() < 1e-15);
    }

    #[test]
    fn reward_uses_offdiag_delta() {
        // row 0 = e1, row 1 = e0 + e1; row 0 ^= row 1 gives e0: d = +1, dbar = -1.
        let m1 = with_rows(8, &[(0, 0b10), (1, 0b11)]);
        let m2 = m1.apply_cnot(1, 0).unwrap();
        let r = reward(&m1, &m2, &spec()).unwrap();
        assert!((r - (0.2 / 8.0 + 0.1 / 64.0)).abs() < 1e-15);
        // Adding an off-diagonal one is penalized: row 3 ^= row 5 on the identity.
        let i8 = BitMatrix::identity(8).unwrap();
        let m3 = i8.apply_cnot(5, 3).unwrap();
        let m4 = m3.apply_cnot(6, 3).unwrap();
        let r = reward(&m3, &m4, &spec()).unwrap();
        assert!((r + 0.1 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn reward_idle() {
        // row 2 = e2 + e3, row 4 = e3 + e4; row 2 ^= row 4 gives e2 + e4.
        let m1 = with_rows(8, &[(2, 0b01100), (4, 0b11000)]);
        let m2 = m1.apply_cnot(4, 2).unwrap();
        assert_eq!(m1.hamming_to_identity(), m2.hamming_to_identity());
        let r = reward(&m1, &m2, &spec()).unwrap();
        assert_eq!(r, -0.001 / 64.0);
        assert_eq!(r, -1.5625e-5);
    }

    #[test]
    fn reward_works_in_f32() {
        let i = BitMatrix::identity(4).unwrap();
        let r: f32 = reward(&i.apply_cnot(0, 1).unwrap(), &i, &RewardSpec::default()).unwrap();
        assert_eq!(r, 0.7f32);
    }

    #[test]
    fn step_lifecycle() {
        let mut env = CnotEnv::<f64>::new(4, 48, RewardSpec::default()).unwrap();
        let start = BitMatrix::identity(4).unwrap().apply_cnot(2, 0).unwrap();
        env.reset(start.clone()).unwrap();
        let a = action_encode(0, 2, 4).unwrap();
        let out = env.step(a).unwrap();
        assert!(out.done && out.solved);
        assert_eq!(out.reward, 0.7);
        assert!(matches!(env.step(a), Err(Error::EpisodeDone)));

        env.reset(start.clone()).unwrap();
        let other = action_encode(1, 3, 4).unwrap();
        env.step(other).unwrap();
        env.step(other).unwrap();
        assert_eq!(env.state().matrix, start);

        env.reset(BitMatrix::identity(4).unwrap()).unwrap();
        assert!(env.state().done);
    }

    #[test]
    fn truncation() {
        let mut env = CnotEnv::<f64>::new(3, 2, RewardSpec::default()).unwrap();
        env.reset(BitMatrix::identity(3).unwrap().apply_cnot(0, 1).unwrap()).unwrap();
        let a = action_encode(2, 0, 3).unwrap();
        assert!(!env.step(a).unwrap().done);
        let out = env.step(a).unwrap();
        assert!(out.done && !out.solved);
    }

    #[test]
    fn step_identities_hold_on_random_steps() {
        let mut rng = Rng::seed(12);
        for _ in 0..10_000 {
            let n = 2 + rng.below(14);
            let m1 = gen_random_cnots(n, n * n, &mut rng);
            if m1.is_identity() {
                continue;
            }
            let a = rng.below(action_count(n));
            let g = action_gate(a, n).unwrap();
            let m2 = m1.apply_cnot(g.control, g.target).unwrap();
            let d = m2.diag_ones() as i64 - m1.diag_ones() as i64;
            let dbar = m2.offdiag_ones() as i64 - m1.offdiag_ones() as i64;
            assert!(d.abs() <= 1);
            assert!(dbar.unsigned_abs() as usize <= n - 1);
            let dh = m2.hamming_to_identity() as i64 - m1.hamming_to_identity() as i64;
            assert_eq!(dh, dbar - d);
            let r = reward(&m1, &m2, &spec()).unwrap();
            let nf = n as f64;
            let lo = -0.2 / nf - 0.1 * (nf - 1.0) / (nf * nf);
            assert!(r >= lo - 1e-12 && r <= 0.7, "n={n} r={r}");
        }
    }

    #[test]
    fn schedule_lookup() {
        let s = Schedule::standard();
        assert_eq!(s.total(), 100_000);
        assert_eq!(curriculum_source(500, &s).unwrap(), MatrixClass::Permutation);
        assert_eq!(
            curriculum_source(15_000, &s).unwrap(),
            MatrixClass::RandomCnots(BudgetExpr::N)
        );
        assert_eq!(
            curriculum_source(70_000, &s).unwrap(),
            MatrixClass::RandomCnots(BudgetExpr::NSq)
        );
        assert!(matches!(
            curriculum_source(100_000, &s),
            Err(Error::EpisodeOutOfRange { .. })
        ));
    }

    #[test]
    fn scaled_schedule() {
        let s = Schedule::standard().scaled_to(5000).unwrap();
        let ends: Vec<usize> = s.phases().iter().map(|p| p.end).collect();
        assert_eq!(ends, vec![75, 150, 300, 500, 1000, 2500, 5000]);
        assert_eq!(s.source(4999).unwrap(), MatrixClass::RandomCnots(BudgetExpr::NSq));
    }

    #[test]
    fn schedule_json_round_trip() {
        let s = Schedule::standard();
        let text = s.to_json().unwrap();
        assert!(text.contains("\"budget_expr\": \"n_log_n\""));
        assert_eq!(Schedule::from_json(&text).unwrap(), s);
        assert!(Schedule::from_json(r#"[{"start":0,"end":5,"class":"random_cnots"}]"#).is_err());
        assert!(Schedule::from_json(r#"[{"start":1,"end":5,"class":"permutation"}]"#).is_err());
    }

    #[test]
    fn sampled_starts_are_never_identity() {
        let s = Schedule::standard().scaled_to(1000).unwrap();
        let mut rng = Rng::seed(3);
        for e in 0..1000 {
            let m = sample_start(e, &s, 2, LogBase::Natural, &mut rng).unwrap();
            assert!(!m.is_identity());
        }
    }
}
