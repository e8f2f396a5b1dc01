//! Random instances for the four-stage exam warm start, checked against a
//! direct transcription of the stages and against the output invariants.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reopt_core::toolbox::{exam_heuristic_warm_start, ExamStage, ExamWarmStartParams};

pub fn random_params(rng: &mut ChaCha8Rng) -> ExamWarmStartParams {
    let n_slots = rng.random_range(2..=14u32);
    let mut days = BTreeMap::new();
    let mut s = 1;
    let mut d = 1;
    while s <= n_slots {
        let len = rng.random_range(1..=4).min(n_slots - s + 1);
        days.insert(format!("day{d:02}"), (s..s + len).collect());
        s += len;
        d += 1;
    }
    let n_virtual = rng.random_range(0..=2.min(n_slots as usize));
    let n_real = rng.random_range(0..=(n_slots as usize - n_virtual));
    let mut slot_pool: Vec<u32> = (1..=n_slots).collect();
    slot_pool.shuffle(rng);
    let mut p = ExamWarmStartParams::default();
    for i in 0..n_virtual {
        let v = format!("v{i:02}");
        p.reserved.insert(v.clone(), slot_pool[i]);
        p.enrollment.insert(v, 0);
    }
    for i in 0..n_real {
        let b = format!("b{i:02}");
        // Few distinct enrollments so sort ties are common.
        p.enrollment.insert(b.clone(), rng.random_range(1..=8u64) * 50);
        if rng.random_bool(0.8) {
            p.base.insert(b, rng.random_range(1..=n_slots));
        }
    }
    if rng.random_bool(0.8) {
        p.large_threshold = Some(rng.random_range(1..=8u64) * 50);
    }
    if rng.random_bool(0.8) {
        p.cutoff = Some(rng.random_range(1..=n_slots + 1));
    }
    for day in days.keys() {
        if rng.random_bool(0.4) {
            p.day_caps.insert(day.clone(), rng.random_range(0..=12u64) * 50);
        }
    }
    p.days = days;
    p
}

/// The stages written out with plain vectors and linear scans.
pub fn reference(p: &ExamWarmStartParams) -> BTreeMap<String, u32> {
    let e = |b: &str| p.enrollment.get(b).copied().unwrap_or(0);
    let mut blocks: Vec<String> = p
        .enrollment
        .keys()
        .chain(p.reserved.keys())
        .chain(p.base.keys())
        .cloned()
        .collect();
    blocks.sort();
    blocks.dedup();
    let mut free: Vec<u32> = p.days.values().flatten().copied().collect();
    free.sort();
    let mut x: BTreeMap<String, u32> = BTreeMap::new();
    let take = |free: &mut Vec<u32>, s: u32| free.retain(|&f| f != s);

    for (v, &s) in &p.reserved {
        x.insert(v.clone(), s);
        take(&mut free, s);
    }
    if let Some(tau) = p.large_threshold {
        let mut large: Vec<&String> = blocks.iter().filter(|b| !x.contains_key(*b) && e(b) >= tau).collect();
        large.sort_by(|a, b| e(b).cmp(&e(a)).then(a.cmp(b)));
        for b in large {
            let pre: Vec<u32> = free.iter().copied().filter(|&s| p.cutoff.is_some_and(|c| s < c)).collect();
            if let Some(&s) = pre.iter().min() {
                x.insert(b.clone(), s);
                take(&mut free, s);
            }
        }
    }
    for (d, &cap) in &p.day_caps {
        let day = &p.days[d];
        let mut load: u64 = x.iter().filter(|(_, s)| day.contains(s)).map(|(b, _)| e(b)).sum();
        let mut rest: Vec<&String> = blocks.iter().filter(|b| !x.contains_key(*b)).collect();
        rest.sort_by(|a, b| e(a).cmp(&e(b)).then(a.cmp(b)));
        for b in rest {
            let open: Vec<u32> = free.iter().copied().filter(|s| day.contains(s)).collect();
            if open.is_empty() || load + e(b) > cap {
                break;
            }
            let s = *open.iter().min().unwrap();
            x.insert(b.clone(), s);
            take(&mut free, s);
            load += e(b);
        }
    }
    for b in &blocks {
        if x.contains_key(b) {
            continue;
        }
        let s = match p.base.get(b) {
            Some(s) if free.contains(s) => *s,
            _ => *free.iter().min().unwrap(),
        };
        x.insert(b.clone(), s);
        take(&mut free, s);
    }
    x
}

#[derive(Debug, Default)]
pub struct ExamReport {
    pub cases: usize,
    pub violations: Vec<String>,
}

pub fn run(seed: u64, cases: usize) -> ExamReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = ExamReport::default();
    while r.cases < cases {
        r.cases += 1;
        let case = r.cases;
        let p = random_params(&mut rng);
        let out = match exam_heuristic_warm_start(&p) {
            Ok(o) => o,
            Err(err) => {
                r.violations.push(format!("case {case}: {err}"));
                continue;
            }
        };
        let x = &out.assignment;
        let mut bad = |what: &str| r.violations.push(format!("case {case}: {what}"));

        let mut used: Vec<u32> = x.values().copied().collect();
        used.sort();
        if used.windows(2).any(|w| w[0] == w[1]) {
            bad("not injective");
        }
        if p.reserved.iter().any(|(v, s)| x.get(v) != Some(s)) {
            bad("pin moved");
        }
        for (b, st) in &out.stage {
            if *st == ExamStage::FrontLoad && !p.cutoff.is_some_and(|c| x[b] < c) {
                bad("front-loaded block at or after the cutoff");
            }
        }
        for (d, loads) in &out.cap_loads {
            if loads.iter().any(|&l| l > p.day_caps[d]) {
                bad("day cap exceeded");
            }
        }
        if x.len() != p.blocks().len() || p.blocks().iter().any(|b| !x.contains_key(*b)) {
            bad("not total");
        }
        if x.values().any(|s| !p.slots().contains(s)) {
            bad("unknown slot");
        }
        if *x != reference(&p) {
            bad("differs from the stage-by-stage transcription");
        }
    }
    r
}
