//! Reproducible matrix families: permutations, unit triangular matrices and
//! identities scrambled by random CNOTs, plus the Rare / Medium / Overcooked
//! benchmark suites built from the latter.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::rng::Rng;

/// How many random CNOTs to apply, as a function of the matrix size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetExpr {
    /// `ceil(n / 2)`
    HalfN,
    N,
    /// `round(n * log(n))`, base set by [`LogBase`]
    NLogN,
    NSq,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl BudgetExpr {
    pub fn eval(self, n: usize, base: LogBase) -> usize {
        match self {
            BudgetExpr::HalfN => n.div_ceil(2),
            BudgetExpr::N => n,
            BudgetExpr::NLogN => {
                let nf = n as f64;
                let log = match base {
                    LogBase::Natural => nf.ln(),
                    LogBase::Two => nf.log2(),
                };
                (nf * log).round() as usize
            }
            BudgetExpr::NSq => n * n,
            BudgetExpr::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    Rare,
    Medium,
    Overcooked,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Rare, Setting::Medium, Setting::Overcooked];

    pub fn budget_expr(self) -> BudgetExpr {
        match self {
            Setting::Rare => BudgetExpr::HalfN,
            Setting::Medium => BudgetExpr::NLogN,
            Setting::Overcooked => BudgetExpr::NSq,
        }
    }

    pub fn budget(self, n: usize, base: LogBase) -> usize {
        self.budget_expr().eval(n, base)
    }

    fn id(self) -> u64 {
        match self {
            Setting::Rare => 1,
            Setting::Medium => 2,
            Setting::Overcooked => 3,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Rare => "Rare",
            Setting::Medium => "Medium",
            Setting::Overcooked => "Overcooked",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rare" => Ok(Setting::Rare),
            "medium" => Ok(Setting::Medium),
            "overcooked" => Ok(Setting::Overcooked),
            _ => Err(Error::Config(format!("unknown setting {s:?}"))),
        }
    }
}

/// Source of training matrices for one curriculum phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixClass {
    Permutation,
    UpperTriangular,
    LowerTriangular,
    /// Upper or lower triangular with equal probability.
    Triangular,
    /// Permutation or triangular (either orientation), picked uniformly.
    StructuredMix,
    RandomCnots(BudgetExpr),
}

impl MatrixClass {
    pub fn sample(self, n: usize, base: LogBase, rng: &mut Rng) -> BitMatrix {
        match self {
            MatrixClass::Permutation => gen_permutation(n, rng),
            MatrixClass::UpperTriangular => gen_triangular(n, true, rng),
            MatrixClass::LowerTriangular => gen_triangular(n, false, rng),
            MatrixClass::Triangular => {
                let upper = rng.bit();
                gen_triangular(n, upper, rng)
            }
            MatrixClass::StructuredMix => match rng.below(3) {
                0 => gen_permutation(n, rng),
                1 => gen_triangular(n, true, rng),
                _ => gen_triangular(n, false, rng),
            },
            MatrixClass::RandomCnots(expr) => gen_random_cnots(n, expr.eval(n, base), rng),
        }
    }
}

/// Uniform permutation matrix via Fisher-Yates; row `i` has its one in
/// column `perm[i]`.
pub fn gen_permutation(n: usize, rng: &mut Rng) -> BitMatrix {
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    BitMatrix::from_rows(perm.into_iter().map(|j| 1u64 << j).collect()).expect("valid dimension")
}

/// Unit-diagonal triangular matrix with i.i.d. uniform free entries.
pub fn gen_triangular(n: usize, upper: bool, rng: &mut Rng) -> BitMatrix {
    let mut m = BitMatrix::identity(n).expect("valid dimension");
    for i in 0..n {
        for j in 0..n {
            let free = if upper { j > i } else { j < i };
            if free && rng.bit() {
                m.set(i, j, true);
            }
        }
    }
    m
}

/// Identity with `k` CNOTs applied, each drawn uniformly from the
/// `n(n-1)` ordered (control, target) pairs.
pub fn gen_random_cnots(n: usize, k: usize, rng: &mut Rng) -> BitMatrix {
    let mut m = BitMatrix::identity(n).expect("valid dimension");
    if n < 2 {
        return m;
    }
    for _ in 0..k {
        let (c, t) = random_pair(n, rng);
        m.xor_row(c, t);
    }
    m
}

pub(crate) fn random_pair(n: usize, rng: &mut Rng) -> (usize, usize) {
    let idx = rng.below(n * (n - 1));
    let c = idx / (n - 1);
    let mut t = idx % (n - 1);
    if t >= c {
        t += 1;
    }
    (c, t)
}

/// `count` matrices for `(setting, n)`. Matrix `i` draws from its own stream
/// so any single matrix can be regenerated without the others.
pub fn gen_suite(setting: Setting, n: usize, count: usize, seed: u64, base: LogBase) -> Result<Vec<BitMatrix>> {
    if count == 0 {
        return Err(Error::Config("suite size must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::DimensionOutOfRange { n, max: 64 });
    }
    BitMatrix::identity(n)?;
    let budget = setting.budget(n, base);
    Ok((0..count)
        .map(|i| {
            let mut rng = Rng::with_stream(seed, suite_stream(setting, n, i));
            gen_random_cnots(n, budget, &mut rng)
        })
        .collect())
}

pub(crate) fn suite_stream(setting: Setting, n: usize, index: usize) -> u64 {
    (setting.id() << 56) | ((n as u64) << 40) | index as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub setting: Setting,
    pub n: usize,
    pub seed: u64,
    pub budget: usize,
    pub log_base: LogBase,
    pub files: Vec<String>,
}

/// Writes `matrix_<i>.txt` files plus `manifest.json` into `dir`.
pub fn write_suite(dir: &Path, setting: Setting, n: usize, seed: u64, base: LogBase, matrices: &[BitMatrix]) -> Result<SuiteManifest> {
    fs::create_dir_all(dir)?;
    let width = matrices.len().saturating_sub(1).to_string().len();
    let mut files = Vec::with_capacity(matrices.len());
    for (i, m) in matrices.iter().enumerate() {
        let name = format!("matrix_{i:0width$}.txt");
        fs::write(dir.join(&name), m.to_string())?;
        files.push(name);
    }
    let manifest = SuiteManifest {
        setting,
        n,
        seed,
        budget: setting.budget(n, base),
        log_base: base,
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn read_suite(dir: &Path) -> Result<(SuiteManifest, Vec<BitMatrix>)> {
    let manifest: SuiteManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let matrices = manifest
        .files
        .iter()
        .map(|f| fs::read_to_string(dir.join(f))?.parse())
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, matrices))
}
