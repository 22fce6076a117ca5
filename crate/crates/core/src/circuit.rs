//! CNOT gate sequences and their replay semantics.
//!
//! Gates apply left to right: replaying `[g0, g1, ...]` on `M` applies `g0`
//! first. A circuit *solves* `M` when replay turns it into the identity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CnotGate {
    pub control: usize,
    pub target: usize,
}

impl CnotGate {
    pub fn new(control: usize, target: usize) -> Self {
        Self { control, target }
    }

    /// Same wires with roles exchanged.
    pub fn swapped(self) -> Self {
        Self {
            control: self.target,
            target: self.control,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        for index in [self.control, self.target] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        if self.control == self.target {
            return Err(Error::SameControlTarget(self.control));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    n: usize,
    gates: Vec<CnotGate>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self { n, gates: Vec::new() }
    }

    pub fn from_gates(n: usize, gates: Vec<CnotGate>) -> Result<Self> {
        for g in &gates {
            g.validate(n)?;
        }
        Ok(Self { n, gates })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[CnotGate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: CnotGate) -> Result<()> {
        gate.validate(self.n)?;
        self.gates.push(gate);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, gate: CnotGate) {
        debug_assert!(gate.validate(self.n).is_ok());
        self.gates.push(gate);
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn concat(&self, other: &Circuit) -> Result<Circuit> {
        let mut out = self.clone();
        out.extend(other)?;
        Ok(out)
    }

    pub fn reversed(&self) -> Circuit {
        Circuit {
            n: self.n,
            gates: self.gates.iter().rev().copied().collect(),
        }
    }

    /// Every gate touches only wires in `lo..hi`.
    pub fn within(&self, lo: usize, hi: usize) -> bool {
        self.gates
            .iter()
            .all(|g| (lo..hi).contains(&g.control) && (lo..hi).contains(&g.target))
    }

    /// `cx q[c],q[t];` lines under an OpenQASM 2 header.
    pub fn to_qasm(&self) -> String {
        let mut out = format!("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[{}];\n", self.n);
        for g in &self.gates {
            out.push_str(&format!("cx q[{}],q[{}];\n", g.control, g.target));
        }
        out
    }
}

pub fn replay(m: &BitMatrix, circuit: &Circuit) -> Result<BitMatrix> {
    if m.n() != circuit.n {
        return Err(Error::DimensionMismatch {
            left: m.n(),
            right: circuit.n,
        });
    }
    let mut out = m.clone();
    for g in &circuit.gates {
        out.xor_row(g.control, g.target);
    }
    Ok(out)
}

pub fn verify_solves(m: &BitMatrix, circuit: &Circuit) -> Result<bool> {
    Ok(replay(m, circuit)?.is_identity())
}

/// The text format: header `n=<n>` followed by one `CNOT <control> <target>`
/// line per gate.
impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}", self.n)?;
        for g in &self.gates {
            write!(f, "\nCNOT {} {}", g.control, g.target)?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(ln, format!("bad header {header:?}")))?;
        let mut circuit = Circuit::new(n);
        for (ln, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some("CNOT"), Some(c), Some(t), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::parse(ln, format!("malformed gate line {line:?}")));
            };
            let parse_index = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::parse(ln, format!("bad index {v:?}")))
            };
            circuit.push(CnotGate::new(parse_index(c)?, parse_index(t)?))?;
        }
        Ok(circuit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pmh,
    Rl,
    #[serde(rename = "rl+stripe")]
    RlStripe,
    #[serde(rename = "rl+embed")]
    RlEmbed,
    PmhStar,
    Exact,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Pmh => "pmh",
            Method::Rl => "rl",
            Method::RlStripe => "rl+stripe",
            Method::RlEmbed => "rl+embed",
            Method::PmhStar => "pmh_star",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pmh" => Method::Pmh,
            "rl" => Method::Rl,
            "rl+stripe" => Method::RlStripe,
            "rl+embed" => Method::RlEmbed,
            "pmh_star" | "pmh-star" => Method::PmhStar,
            "exact" => Method::Exact,
            _ => return Err(Error::Config(format!("unknown method {s:?}"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub circuit: Circuit,
    pub method: Method,
    pub verified: bool,
    pub wall_time: f64,
}

impl SynthesisResult {
    /// Replays `circuit` on `source` to fill in `verified`.
    pub fn checked(source: &BitMatrix, circuit: Circuit, method: Method, wall_time: f64) -> Result<Self> {
        let verified = verify_solves(source, &circuit)?;
        Ok(Self {
            circuit,
            method,
            verified,
            wall_time,
        })
    }

    pub fn cnot_count(&self) -> usize {
        self.circuit.len()
    }
}
