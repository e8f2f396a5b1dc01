//! Random small LPs checked against vertex enumeration and random binary
//! programs checked against exhaustive enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reopt_core::model::{IndexKey, Instance, Row, Sense, VarType, Variable};
use reopt_core::solver::{check_feasible, solve_lp, solve_mip, SolveStatus, SolverConfig};

const REL: f64 = 1e-9;

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL * b.abs().max(1.0)
}

pub fn config() -> SolverConfig {
    SolverConfig {
        mip_gap_tolerance: 1e-9,
        ..SolverConfig::default()
    }
}

fn var(i: usize, t: VarType, lo: f64, hi: f64, obj: f64) -> Variable {
    Variable {
        key: format!("x({i})"),
        family: "x".into(),
        index: IndexKey::new(vec![i.to_string()]),
        var_type: t,
        lower: lo,
        upper: hi,
        obj,
    }
}

fn row(j: usize, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Row {
    Row {
        key: format!("r({j})"),
        family: "r".into(),
        index: IndexKey::new(vec![j.to_string()]),
        coefs,
        sense,
        rhs,
    }
}

pub fn random_lp(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(0..=4);
    let vars = (0..n)
        .map(|i| {
            let lo = rng.random_range(-3..=1) as f64;
            let hi = lo + rng.random_range(0..=6) as f64;
            var(i, VarType::Continuous, lo, hi, rng.random_range(-9..=9) as f64)
        })
        .collect();
    let rows = (0..m)
        .map(|j| {
            let mut coefs = Vec::new();
            for i in 0..n {
                let c = rng.random_range(-5..=5) as f64;
                if rng.random_bool(0.7) && c != 0.0 {
                    coefs.push((i, c));
                }
            }
            let sense = match rng.random_range(0..10) {
                0 | 1 => Sense::Eq,
                2..=5 => Sense::Ge,
                _ => Sense::Le,
            };
            row(j, coefs, sense, rng.random_range(-8..=12) as f64)
        })
        .collect();
    Instance::new(vars, rows)
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let p = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..k {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..k).map(|i| b[i] / a[i][i]).collect())
}

pub fn feasible(inst: &Instance, x: &[f64]) -> bool {
    let tol = 1e-9;
    inst.variables
        .iter()
        .zip(x)
        .all(|(v, &xi)| xi >= v.lower - tol && xi <= v.upper + tol)
        && inst.rows.iter().all(|r| {
            let lhs: f64 = r.coefs.iter().map(|&(i, c)| c * x[i]).sum();
            match r.sense {
                Sense::Le => lhs <= r.rhs + tol,
                Sense::Ge => lhs >= r.rhs - tol,
                Sense::Eq => (lhs - r.rhs).abs() <= tol,
            }
        })
}

/// Minimum over all vertices of the bounded polyhedron: each variable sits
/// at a bound or is basic, and basic variables are pinned by as many rows
/// held at equality.
pub fn vertex_oracle(inst: &Instance) -> Option<f64> {
    let n = inst.num_vars();
    let m = inst.num_rows();
    let mut best: Option<f64> = None;
    for pattern in 0..3usize.pow(n as u32) {
        let mut at = vec![0u8; n];
        let mut p = pattern;
        for s in at.iter_mut() {
            *s = (p % 3) as u8;
            p /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| at[i] == 2).collect();
        let k = free.len();
        if k > m {
            continue;
        }
        let mut x: Vec<f64> = (0..n)
            .map(|i| match at[i] {
                0 => inst.variables[i].lower,
                1 => inst.variables[i].upper,
                _ => 0.0,
            })
            .collect();
        for rows in subsets(m, k) {
            if k > 0 {
                let mut a = vec![vec![0.0; k]; k];
                let mut b = vec![0.0; k];
                for (r, &ri) in rows.iter().enumerate() {
                    let row = &inst.rows[ri];
                    b[r] = row.rhs;
                    for &(i, c) in &row.coefs {
                        match free.iter().position(|&f| f == i) {
                            Some(col) => a[r][col] = c,
                            None => b[r] -= c * x[i],
                        }
                    }
                }
                let Some(sol) = solve_dense(a, b) else { continue };
                for (col, &i) in free.iter().enumerate() {
                    x[i] = sol[col];
                }
            }
            if feasible(inst, &x) {
                let z = inst.objective_of(&x);
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
    }
    best
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0..1usize << m)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..m).filter(|i| s >> i & 1 == 1).collect())
        .collect()
}

pub fn random_binary(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=12);
    let m = rng.random_range(1..=4);
    let vars = (0..n)
        .map(|i| var(i, VarType::Binary, 0.0, 1.0, rng.random_range(-10..=10) as f64))
        .collect();
    let rows = (0..m)
        .map(|j| {
            let mut coefs = Vec::new();
            for i in 0..n {
                let c = rng.random_range(-4..=9) as f64;
                if rng.random_bool(0.6) && c != 0.0 {
                    coefs.push((i, c));
                }
            }
            let sense = match rng.random_range(0..10) {
                0 => Sense::Eq,
                1..=3 => Sense::Ge,
                _ => Sense::Le,
            };
            row(j, coefs, sense, rng.random_range(-2..=15) as f64)
        })
        .collect();
    Instance::new(vars, rows)
}

pub fn enumerate_binary(inst: &Instance) -> Option<f64> {
    let n = inst.num_vars();
    (0..1u32 << n)
        .map(|s| (0..n).map(|i| f64::from(s >> i & 1)).collect::<Vec<_>>())
        .filter(|x| feasible(inst, x))
        .map(|x| inst.objective_of(&x))
        .min_by(f64::total_cmp)
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub lp_cases: usize,
    pub lp_feasible: usize,
    pub lp_infeasible: usize,
    pub mip_cases: usize,
    pub mip_feasible: usize,
    pub mismatches: Vec<String>,
}

/// Runs random LPs until `lp_target` feasible ones were compared, then
/// random binary programs until `mip_target` feasible ones were.
pub fn run_oracle(seed: u64, lp_target: usize, mip_target: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = config();
    let mut r = OracleReport::default();
    while r.lp_feasible < lp_target {
        let case = r.lp_cases;
        r.lp_cases += 1;
        let inst = random_lp(&mut rng);
        let got = match solve_lp(&inst, &cfg) {
            Ok(g) => g,
            Err(e) => {
                r.mismatches.push(format!("lp {case}: {e}"));
                continue;
            }
        };
        match vertex_oracle(&inst) {
            Some(z) => {
                r.lp_feasible += 1;
                match got.objective {
                    Some(obj) if got.status == SolveStatus::Optimal && close(obj, z) => {
                        if check_feasible(&inst, got.assignment.as_ref().unwrap(), 1e-7).is_err() {
                            r.mismatches.push(format!("lp {case}: infeasible point"));
                        }
                    }
                    other => r.mismatches.push(format!("lp {case}: {:?} {other:?} vs {z}", got.status)),
                }
            }
            None => {
                r.lp_infeasible += 1;
                if got.status != SolveStatus::Infeasible {
                    r.mismatches.push(format!("lp {case}: {:?} vs infeasible", got.status));
                }
            }
        }
    }
    while r.mip_feasible < mip_target {
        let case = r.mip_cases;
        r.mip_cases += 1;
        let inst = random_binary(&mut rng);
        let got = match solve_mip(&inst, &cfg, None) {
            Ok(g) => g,
            Err(e) => {
                r.mismatches.push(format!("mip {case}: {e}"));
                continue;
            }
        };
        match enumerate_binary(&inst) {
            Some(z) => {
                r.mip_feasible += 1;
                match got.objective {
                    Some(obj) if got.status == SolveStatus::Optimal && close(obj, z) => {
                        if check_feasible(&inst, got.assignment.as_ref().unwrap(), 1e-7).is_err() {
                            r.mismatches.push(format!("mip {case}: infeasible point"));
                        }
                    }
                    other => r.mismatches.push(format!("mip {case}: {:?} {other:?} vs {z}", got.status)),
                }
            }
            None => {
                if got.status != SolveStatus::Infeasible {
                    r.mismatches.push(format!("mip {case}: {:?} vs infeasible", got.status));
                }
            }
        }
    }
    r
}
