//! Dense two-phase tableau simplex over bounded variables.

use std::time::Instant;

use super::SolverError;
use crate::model::Sense;

/// `min c.x` subject to rows and `lower <= x <= upper`.
#[derive(Clone, Debug)]
pub(crate) struct LpProblem<'a> {
    pub c: &'a [f64],
    pub rows: &'a [(Vec<(usize, f64)>, Sense, f64)],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    Interrupted,
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Clone, Copy, Debug)]
enum ColMap {
    Fixed(f64),
    /// x = base + y
    Shift(usize, f64),
    /// x = base - y
    Neg(usize, f64),
    /// x = y+ - y-
    Free(usize, usize),
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

enum RunEnd {
    Optimal,
    Unbounded,
    Interrupted,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][c] = 1.0;
        let pr = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pr) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pr) {
                *v -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn price(&mut self, cost: &[f64]) {
        self.obj = vec![0.0; self.width + 1];
        self.obj[..self.width].copy_from_slice(cost);
        for i in 0..self.rows.len() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (v, t) in self.obj.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * t;
                }
            }
        }
    }

    fn run(
        &mut self,
        enterable: &dyn Fn(usize) -> bool,
        deadline: Option<Instant>,
        max_iter: usize,
    ) -> Result<RunEnd, SolverError> {
        let mut degenerate = 0usize;
        for iter in 0..max_iter {
            if iter % 64 == 63 && deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(RunEnd::Interrupted);
            }
            let bland = degenerate >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -COST_EPS;
            for j in 0..self.width {
                let d = self.obj[j];
                if d < -COST_EPS && enterable(j) {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else {
                return Ok(RunEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[r] {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(RunEnd::Unbounded);
            };
            degenerate = if ratio <= 1e-12 { degenerate + 1 } else { 0 };
            self.pivot(r, c);
        }
        Err(SolverError::NumericalFailure(format!(
            "simplex iteration limit {max_iter} reached"
        )))
    }
}

pub(crate) fn solve(p: &LpProblem<'_>, deadline: Option<Instant>) -> Result<LpOutcome, SolverError> {
    let n = p.c.len();
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0usize;
    let mut cost = Vec::new();
    let mut extra: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l > u {
            return Ok(LpOutcome::Infeasible);
        }
        let m = if l == u {
            ColMap::Fixed(l)
        } else if l.is_finite() {
            cost.push(p.c[j]);
            if u.is_finite() {
                extra.push((vec![(ny, 1.0)], Sense::Le, u - l));
            }
            ny += 1;
            ColMap::Shift(ny - 1, l)
        } else if u.is_finite() {
            cost.push(-p.c[j]);
            ny += 1;
            ColMap::Neg(ny - 1, u)
        } else {
            cost.push(p.c[j]);
            cost.push(-p.c[j]);
            ny += 2;
            ColMap::Free(ny - 2, ny - 1)
        };
        maps.push(m);
    }

    let mut std_rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for (coefs, sense, rhs) in p.rows {
        let mut b = *rhs;
        let mut dense: Vec<(usize, f64)> = Vec::new();
        for &(j, a) in coefs {
            match maps[j] {
                ColMap::Fixed(v) => b -= a * v,
                ColMap::Shift(k, base) => {
                    b -= a * base;
                    dense.push((k, a));
                }
                ColMap::Neg(k, base) => {
                    b -= a * base;
                    dense.push((k, -a));
                }
                ColMap::Free(kp, kn) => {
                    dense.push((kp, a));
                    dense.push((kn, -a));
                }
            }
        }
        dense.retain(|&(_, a)| a != 0.0);
        if dense.is_empty() {
            let ok = match sense {
                Sense::Le => 0.0 <= b + 1e-9,
                Sense::Ge => 0.0 >= b - 1e-9,
                Sense::Eq => b.abs() <= 1e-9,
            };
            if !ok {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        std_rows.push((dense, *sense, b));
    }
    std_rows.extend(extra);

    let m = std_rows.len();
    // Column layout: structural | slack per row | artificial per row.
    let slack0 = ny;
    let art0 = ny + m;
    let width = ny + 2 * m;
    let mut rows = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0; m];
    let mut has_art = vec![false; m];
    for (i, (coefs, sense, b)) in std_rows.iter().enumerate() {
        let flip = *b < 0.0;
        let s = if flip { -1.0 } else { 1.0 };
        for &(k, a) in coefs {
            rows[i][k] += s * a;
        }
        rows[i][width] = s * b;
        let sense = match (sense, flip) {
            (Sense::Le, true) => Sense::Ge,
            (Sense::Ge, true) => Sense::Le,
            (x, _) => *x,
        };
        match sense {
            Sense::Le => {
                rows[i][slack0 + i] = 1.0;
                basis[i] = slack0 + i;
            }
            Sense::Ge => {
                rows[i][slack0 + i] = -1.0;
                rows[i][art0 + i] = 1.0;
                basis[i] = art0 + i;
                has_art[i] = true;
            }
            Sense::Eq => {
                rows[i][art0 + i] = 1.0;
                basis[i] = art0 + i;
                has_art[i] = true;
            }
        }
    }
    let is_slack_unused = |j: usize, rows: &Vec<Vec<f64>>| {
        j >= slack0 && j < art0 && rows[j - slack0][j] == 0.0
    };
    let unused: Vec<bool> = (0..width)
        .map(|j| (j >= art0 && !has_art[j - art0]) || is_slack_unused(j, &rows))
        .collect();

    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        width,
    };
    let max_iter = 20_000 + 50 * (width + m);

    if has_art.iter().any(|&a| a) {
        let mut c1 = vec![0.0; width];
        for (i, &a) in has_art.iter().enumerate() {
            if a {
                c1[art0 + i] = 1.0;
            }
        }
        tab.price(&c1);
        match tab.run(&|j| !unused[j], deadline, max_iter)? {
            RunEnd::Interrupted => return Ok(LpOutcome::Interrupted),
            RunEnd::Unbounded => {
                return Err(SolverError::NumericalFailure("phase 1 reported unbounded".into()))
            }
            RunEnd::Optimal => {}
        }
        let scale = 1.0 + tab.rows.iter().map(|r| r[width].abs()).fold(0.0, f64::max);
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= art0)
            .map(|i| tab.rhs(i))
            .sum();
        if infeas > 1e-7 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        for i in 0..m {
            if tab.basis[i] >= art0 {
                let col = (0..art0)
                    .filter(|&j| !unused[j])
                    .max_by(|&a, &b| tab.rows[i][a].abs().total_cmp(&tab.rows[i][b].abs()))
                    .filter(|&j| tab.rows[i][j].abs() > PIVOT_EPS);
                if let Some(j) = col {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut c2 = vec![0.0; width];
    c2[..ny].copy_from_slice(&cost);
    tab.price(&c2);
    match tab.run(&|j| j < art0 && !unused[j], deadline, max_iter)? {
        RunEnd::Interrupted => return Ok(LpOutcome::Interrupted),
        RunEnd::Unbounded => return Ok(LpOutcome::Unbounded),
        RunEnd::Optimal => {}
    }

    let mut y = vec![0.0; ny];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < ny {
            y[b] = tab.rhs(i).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let v = match *m {
                ColMap::Fixed(v) => v,
                ColMap::Shift(k, base) => base + y[k],
                ColMap::Neg(k, base) => base - y[k],
                ColMap::Free(kp, kn) => y[kp] - y[kn],
            };
            v.clamp(p.lower[j], p.upper[j])
        })
        .collect();
    let objective = x.iter().zip(p.c).map(|(x, c)| x * c).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(c: &[f64], rows: &[(Vec<(usize, f64)>, Sense, f64)], lo: &[f64], up: &[f64]) -> LpOutcome {
        solve(
            &LpProblem {
                c,
                rows,
                lower: lo,
                upper: up,
            },
            None,
        )
        .unwrap()
    }

    #[test]
    fn small_lp() {
        // min -x - y, x + 2y <= 4, 3x + y <= 6
        let rows = vec![
            (vec![(0, 1.0), (1, 2.0)], Sense::Le, 4.0),
            (vec![(0, 3.0), (1, 1.0)], Sense::Le, 6.0),
        ];
        let inf = f64::INFINITY;
        match run(&[-1.0, -1.0], &rows, &[0.0, 0.0], &[inf, inf]) {
            LpOutcome::Optimal { x, objective } => {
                assert!((objective + 2.8).abs() < 1e-12);
                assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_and_negative_bounds() {
        // min x, x >= -3 via row, x free
        let rows = vec![(vec![(0, 1.0)], Sense::Ge, -3.0)];
        let inf = f64::INFINITY;
        match run(&[1.0], &rows, &[-inf], &[inf]) {
            LpOutcome::Optimal { objective, .. } => assert!((objective + 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        match run(&[1.0], &[], &[-inf], &[5.0]) {
            LpOutcome::Unbounded => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_rows() {
        let rows = vec![
            (vec![(0, 1.0)], Sense::Ge, 3.0),
            (vec![(0, 1.0)], Sense::Le, 2.0),
        ];
        assert_eq!(run(&[1.0], &rows, &[0.0], &[f64::INFINITY]), LpOutcome::Infeasible);
    }

    #[test]
    fn redundant_equalities() {
        let rows = vec![
            (vec![(0, 1.0), (1, 1.0)], Sense::Eq, 2.0),
            (vec![(0, 2.0), (1, 2.0)], Sense::Eq, 4.0),
        ];
        match run(&[1.0, 2.0], &rows, &[0.0, 0.0], &[f64::INFINITY; 2]) {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
