use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::{Duration, Instant};

use super::simplex::{self, LpOutcome, LpProblem};
use super::{
    gap, violations_of, CancelToken, NodeSelection, SolveResult, SolveStatus, SolverConfig,
    SolverError, WarmStart, WarmStartReport,
};
use crate::model::{Instance, Sense};

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Open {
    Heap(BinaryHeap<Node>),
    Stack(Vec<Node>),
}

impl Open {
    fn push(&mut self, n: Node) {
        match self {
            Open::Heap(h) => h.push(n),
            Open::Stack(s) => s.push(n),
        }
    }
    fn pop(&mut self) -> Option<Node> {
        match self {
            Open::Heap(h) => h.pop(),
            Open::Stack(s) => s.pop(),
        }
    }
    fn min_bound(&self) -> Option<f64> {
        let it: Box<dyn Iterator<Item = &Node>> = match self {
            Open::Heap(h) => Box::new(h.iter()),
            Open::Stack(s) => Box::new(s.iter()),
        };
        it.map(|n| n.bound).reduce(f64::min)
    }
}

struct Ctx<'a> {
    instance: &'a Instance,
    c: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
    integral: Vec<bool>,
    tol: f64,
    deadline: Instant,
    cancel: Option<&'a CancelToken>,
}

impl Ctx<'_> {
    fn lp(&self, lower: &[f64], upper: &[f64]) -> Result<LpOutcome, SolverError> {
        simplex::solve(
            &LpProblem {
                c: &self.c,
                rows: &self.rows,
                lower,
                upper,
            },
            Some(self.deadline),
        )
    }

    fn stopped(&self) -> bool {
        Instant::now() >= self.deadline || self.cancel.is_some_and(CancelToken::is_cancelled)
    }

    /// Rounds integer entries and accepts the point if it checks out.
    fn accept(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let rounded: Vec<f64> = x
            .iter()
            .zip(&self.integral)
            .map(|(&v, &int)| if int { v.round() } else { v })
            .collect();
        for cand in [rounded, x.to_vec()] {
            if violations_of(self.instance, &cand, self.tol).is_empty() {
                let obj = self.instance.objective_of(&cand);
                return Some((cand, obj));
            }
        }
        None
    }
}

fn most_fractional(x: &[f64], integral: &[bool], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in x.iter().zip(integral).enumerate() {
        if !int {
            continue;
        }
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac > tol && best.is_none_or(|(_, f)| frac > f + 1e-12) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

pub(super) fn run(
    instance: &Instance,
    config: &SolverConfig,
    warm: Option<&WarmStart>,
    cancel: Option<&CancelToken>,
    integer: bool,
) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let limit = Duration::try_from_secs_f64(config.time_limit).unwrap_or(Duration::MAX);
    let deadline = start.checked_add(limit).unwrap_or(start + Duration::from_secs(86_400 * 365));
    let n = instance.num_vars();
    let tol = config.feasibility_tolerance;
    let integral: Vec<bool> = instance
        .variables
        .iter()
        .map(|v| integer && v.var_type.is_integral())
        .collect();
    let ctx = Ctx {
        instance,
        c: instance.variables.iter().map(|v| v.obj).collect(),
        rows: instance
            .rows
            .iter()
            .map(|r| (r.coefs.clone(), r.sense, r.rhs))
            .collect(),
        integral: integral.clone(),
        tol,
        deadline,
        cancel,
    };
    let mut lower: Vec<f64> = instance.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = instance.variables.iter().map(|v| v.upper).collect();
    for j in 0..n {
        if integral[j] {
            lower[j] = (lower[j] - tol).ceil();
            upper[j] = (upper[j] + tol).floor();
        }
    }

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut hint: Vec<Option<f64>> = vec![None; n];
    let mut report = None;
    if let Some(ws) = warm {
        let mut matched = 0;
        for (k, &v) in &ws.values {
            if let Some(j) = instance.position(k) {
                hint[j] = Some(v);
                matched += 1;
            }
        }
        incumbent = install_warm(&ctx, &hint, &lower, &upper)?;
        report = Some(WarmStartReport {
            source_label: ws.source_label,
            matched,
            dropped: ws.values.len() - matched,
            installed_as_incumbent: incumbent.is_some(),
        });
    }

    let mut open = match config.node_selection {
        NodeSelection::BestBound => Open::Heap(BinaryHeap::new()),
        NodeSelection::DepthFirst => Open::Stack(Vec::new()),
    };
    let mut seq = 0u64;
    open.push(Node {
        lower,
        upper,
        bound: f64::NEG_INFINITY,
        seq,
    });
    let mut nodes = 0u64;
    let mut pruned_min = f64::INFINITY;
    let mut stopped_at: Option<f64> = None;
    let prune_tol = |inc: f64| config.mip_gap_tolerance * inc.abs().max(1.0);

    while let Some(node) = open.pop() {
        if ctx.stopped() {
            stopped_at = Some(node.bound);
            break;
        }
        if let Some((_, inc)) = &incumbent {
            if node.bound >= inc - prune_tol(*inc) {
                pruned_min = pruned_min.min(node.bound);
                continue;
            }
        }
        let outcome = ctx.lp(&node.lower, &node.upper)?;
        nodes += 1;
        let (x, obj) = match outcome {
            LpOutcome::Interrupted => {
                stopped_at = Some(node.bound);
                break;
            }
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                return Ok(SolveResult {
                    status: SolveStatus::Unbounded,
                    assignment: None,
                    objective: None,
                    best_bound: None,
                    gap: None,
                    wall_time: start.elapsed().as_secs_f64(),
                    node_count: nodes,
                    warm_start: report,
                });
            }
            LpOutcome::Optimal { x, objective } => (x, objective),
        };
        if let Some((_, inc)) = &incumbent {
            if obj >= inc - prune_tol(*inc) {
                pruned_min = pruned_min.min(obj);
                continue;
            }
        }
        match most_fractional(&x, &integral, tol) {
            None => match ctx.accept(&x) {
                Some((xs, o)) => {
                    if incumbent.as_ref().is_none_or(|(_, inc)| o < *inc) {
                        incumbent = Some((xs, o));
                    }
                }
                None if !integer || !integral.iter().any(|&b| b) => {
                    tracing::warn!("lp optimum fails the feasibility check; accepting it as is");
                    let o = instance.objective_of(&x);
                    incumbent = Some((x, o));
                }
                None => {}
            },
            Some(j) => {
                let v = x[j];
                let mut down = Node {
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                    bound: obj,
                    seq: 0,
                };
                down.upper[j] = v.floor();
                let mut up = Node {
                    lower: node.lower,
                    upper: node.upper,
                    bound: obj,
                    seq: 0,
                };
                up.lower[j] = v.ceil();
                let up_first = hint[j].is_some_and(|h| h >= v);
                let (first, second) = if up_first { (up, down) } else { (down, up) };
                match &mut open {
                    Open::Heap(_) => {
                        for mut child in [first, second] {
                            seq += 1;
                            child.seq = seq;
                            open.push(child);
                        }
                    }
                    Open::Stack(_) => {
                        for mut child in [second, first] {
                            seq += 1;
                            child.seq = seq;
                            open.push(child);
                        }
                    }
                }
            }
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    let mut bound = pruned_min;
    if let Some(b) = stopped_at {
        bound = bound.min(b);
        if let Some(ob) = open.min_bound() {
            bound = bound.min(ob);
        }
    }
    let Some((x, obj)) = incumbent else {
        let status = if stopped_at.is_some() {
            SolveStatus::NoIncumbent
        } else {
            SolveStatus::Infeasible
        };
        return Ok(SolveResult {
            status,
            assignment: None,
            objective: None,
            best_bound: stopped_at.and(Some(bound)).filter(|b| b.is_finite()),
            gap: None,
            wall_time,
            node_count: nodes,
            warm_start: report,
        });
    };
    let bound = bound.min(obj);
    let g = gap(obj, bound);
    let status = if stopped_at.is_none() || g <= config.mip_gap_tolerance {
        SolveStatus::Optimal
    } else {
        SolveStatus::FeasibleTimeLimit
    };
    let assignment: BTreeMap<String, f64> = instance
        .variables
        .iter()
        .zip(&x)
        .map(|(v, &val)| (v.key.clone(), if val == 0.0 { 0.0 } else { val }))
        .collect();
    Ok(SolveResult {
        status,
        assignment: Some(assignment),
        objective: Some(obj),
        best_bound: Some(bound),
        gap: Some(g),
        wall_time,
        node_count: nodes,
        warm_start: report,
    })
}

/// A complete feasible start becomes the incumbent. Otherwise the integer
/// part, when fully given, is fixed and the continuous part completed by LP.
fn install_warm(
    ctx: &Ctx<'_>,
    hint: &[Option<f64>],
    lower: &[f64],
    upper: &[f64],
) -> Result<Option<(Vec<f64>, f64)>, SolverError> {
    if hint.iter().all(Option::is_some) {
        let x: Vec<f64> = hint.iter().map(|h| h.unwrap_or(0.0)).collect();
        if let Some(found) = ctx.accept(&x) {
            return Ok(Some(found));
        }
    }
    let ints: Vec<usize> = (0..hint.len()).filter(|&j| ctx.integral[j]).collect();
    if ints.is_empty() || ints.iter().any(|&j| hint[j].is_none()) {
        return Ok(None);
    }
    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    for &j in &ints {
        let v = hint[j].unwrap_or(0.0).round();
        if v < lo[j] || v > up[j] {
            return Ok(None);
        }
        lo[j] = v;
        up[j] = v;
    }
    match ctx.lp(&lo, &up)? {
        LpOutcome::Optimal { x, .. } => Ok(ctx.accept(&x)),
        _ => Ok(None),
    }
}
