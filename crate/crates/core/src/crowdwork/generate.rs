//! Seeded instance generators with planted solutions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::spec::{CmpOp, Constraint, Expr, Family, ProblemSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error("unsupported size for {family:?}: {reason}")]
    UnsupportedSize { family: Family, reason: String },
}

/// Size knobs per family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SizeParams {
    GraphColoring { vertices: u32, colors: u32, avg_degree: f64 },
    /// `base` 2 gives 4x4 grids, 3 gives 9x9.
    Sudoku { base: u32, blanks: u32 },
    ZeroOneProgramming { vars: u32, constraints: u32, max_coeff: i64 },
}

impl SizeParams {
    pub fn family(&self) -> Family {
        match self {
            SizeParams::GraphColoring { .. } => Family::GraphColoring,
            SizeParams::Sudoku { .. } => Family::Sudoku,
            SizeParams::ZeroOneProgramming { .. } => Family::ZeroOneProgramming,
        }
    }
}

/// Size presets per family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Hundreds to a few thousand solver steps; used by the network simulator.
    Sim,
    /// Calibrated to a median in the order of 10^5 solver steps.
    Desk,
}

impl Preset {
    pub fn params(self, family: Family) -> Result<SizeParams, GenerateError> {
        let p = match (self, family) {
            (Preset::Sim, Family::GraphColoring) => SizeParams::GraphColoring { vertices: 22, colors: 3, avg_degree: 3.5 },
            (Preset::Sim, Family::Sudoku) => SizeParams::Sudoku { base: 3, blanks: 32 },
            (Preset::Sim, Family::ZeroOneProgramming) => {
                SizeParams::ZeroOneProgramming { vars: 19, constraints: 14, max_coeff: 9 }
            }
            (Preset::Desk, Family::GraphColoring) => SizeParams::GraphColoring { vertices: 35, colors: 3, avg_degree: 4.0 },
            (Preset::Desk, Family::Sudoku) => SizeParams::Sudoku { base: 3, blanks: 43 },
            (Preset::Desk, Family::ZeroOneProgramming) => {
                SizeParams::ZeroOneProgramming { vars: 30, constraints: 22, max_coeff: 9 }
            }
            (_, Family::GenericCsp) => {
                return Err(GenerateError::UnsupportedSize { family, reason: "no generator for generic CSPs".into() })
            }
        };
        Ok(p)
    }
}

/// A generated instance and a solution known to satisfy every constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub spec: ProblemSpec,
    pub planted: Vec<i64>,
}

pub fn generate_instance(params: SizeParams, seed: u64) -> Result<Instance, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match params {
        SizeParams::GraphColoring { vertices, colors, avg_degree } => graph_coloring(vertices, colors, avg_degree, &mut rng),
        SizeParams::Sudoku { base, blanks } => sudoku(base, blanks, &mut rng),
        SizeParams::ZeroOneProgramming { vars, constraints, max_coeff } => {
            zero_one(vars, constraints, max_coeff, &mut rng)
        }
    }
}

fn unsupported(family: Family, reason: &str) -> GenerateError {
    GenerateError::UnsupportedSize { family, reason: reason.into() }
}

fn graph_coloring(n: u32, colors: u32, avg_degree: f64, rng: &mut ChaCha8Rng) -> Result<Instance, GenerateError> {
    let fam = Family::GraphColoring;
    if n < 2 || colors < 2 || !(avg_degree > 0.0) || avg_degree >= (n - 1) as f64 {
        return Err(unsupported(fam, "need n >= 2, colors >= 2 and 0 < degree < n - 1"));
    }
    let planted: Vec<i64> = (0..n).map(|_| rng.random_range(0..colors as i64)).collect();
    let target_edges = (avg_degree * n as f64 / 2.0).round() as usize;
    let mut candidates: Vec<(u32, u32)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| planted[a as usize] != planted[b as usize])
        .collect();
    if candidates.len() < target_edges {
        return Err(unsupported(fam, "too few cross-color pairs for the requested degree"));
    }
    candidates.shuffle(rng);
    candidates.truncate(target_edges);
    candidates.sort_unstable();
    let spec = ProblemSpec {
        family: fam,
        domains: vec![(0..colors as i64).collect(); n as usize],
        constraints: candidates.into_iter().map(|(a, b)| Constraint::ne(a, b)).collect(),
    };
    Ok(Instance { spec, planted })
}

fn sudoku(base: u32, blanks: u32, rng: &mut ChaCha8Rng) -> Result<Instance, GenerateError> {
    let fam = Family::Sudoku;
    if !(2..=4).contains(&base) {
        return Err(unsupported(fam, "base must be 2, 3 or 4"));
    }
    let side = (base * base) as usize;
    let cells = side * side;
    if blanks as usize > cells {
        return Err(unsupported(fam, "more blanks than cells"));
    }
    let b = base as usize;
    // Valid base pattern, then shuffle rows within bands, bands, columns within stacks,
    // stacks, and relabel digits. Each shuffle preserves validity.
    let pattern = |r: usize, c: usize| (b * (r % b) + r / b + c) % side;
    let shuffled = |rng: &mut ChaCha8Rng| {
        let mut groups: Vec<usize> = (0..b).collect();
        groups.shuffle(rng);
        let mut out = Vec::with_capacity(side);
        for g in groups {
            let mut inner: Vec<usize> = (0..b).collect();
            inner.shuffle(rng);
            out.extend(inner.into_iter().map(|i| g * b + i));
        }
        out
    };
    let rows = shuffled(rng);
    let cols = shuffled(rng);
    let mut digits: Vec<i64> = (1..=side as i64).collect();
    digits.shuffle(rng);
    let planted: Vec<i64> =
        (0..cells).map(|i| digits[pattern(rows[i / side], cols[i % side])]).collect();

    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(rng);
    let mut domains: Vec<Vec<i64>> = planted.iter().map(|&v| vec![v]).collect();
    for &i in order.iter().take(blanks as usize) {
        domains[i] = (1..=side as i64).collect();
    }
    let var = |r: usize, c: usize| (r * side + c) as u32;
    let mut constraints = Vec::with_capacity(3 * side);
    for r in 0..side {
        constraints.push(Constraint::AllDifferent((0..side).map(|c| var(r, c)).collect()));
    }
    for c in 0..side {
        constraints.push(Constraint::AllDifferent((0..side).map(|r| var(r, c)).collect()));
    }
    for br in 0..b {
        for bc in 0..b {
            let cells = (0..b).flat_map(|i| (0..b).map(move |j| var(br * b + i, bc * b + j)));
            constraints.push(Constraint::AllDifferent(cells.collect()));
        }
    }
    Ok(Instance { spec: ProblemSpec { family: fam, domains, constraints }, planted })
}

fn zero_one(n: u32, m: u32, max_coeff: i64, rng: &mut ChaCha8Rng) -> Result<Instance, GenerateError> {
    let fam = Family::ZeroOneProgramming;
    if n == 0 || m == 0 || max_coeff <= 0 {
        return Err(unsupported(fam, "need at least one variable, one constraint and positive coefficients"));
    }
    let planted: Vec<i64> = (0..n).map(|_| rng.random_range(0..=1)).collect();
    let mut constraints = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let coeffs: Vec<i64> = (0..n).map(|_| rng.random_range(-max_coeff..=max_coeff)).collect();
        let at_planted: i64 = coeffs.iter().zip(&planted).map(|(a, x)| a * x).sum();
        let slack = rng.random_range(0..=max_coeff / 3);
        let terms: Vec<(i64, u32)> = coeffs.iter().enumerate().map(|(j, &a)| (a, j as u32)).collect();
        constraints.push(Constraint::Compare {
            op: CmpOp::Le,
            lhs: Expr::linear(&terms),
            rhs: Expr::Const(at_planted + slack),
        });
    }
    Ok(Instance { spec: ProblemSpec { family: fam, domains: vec![vec![0, 1]; n as usize], constraints }, planted })
}
