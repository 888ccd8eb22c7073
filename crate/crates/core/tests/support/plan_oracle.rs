//! Brute-force liveness oracle over every precedence relation on small step
//! sets. Acyclicity and readiness are recomputed here from bitmasks, without
//! the plan module, and compared with what the plan module reports.

use coassembly::assembly::{
    ready_steps, validate_plan, Actor, AssemblyPlan, PlanError, ProgressState, Step, StepStatus,
};

#[derive(Debug, Default)]
pub struct OracleReport {
    pub relations: u64,
    pub validated: u64,
    pub rejected: u64,
    pub states: u64,
    pub violations: Vec<String>,
}

/// `preds[j]` has bit `i` set when step `i` must finish before step `j`.
fn acyclic(n: usize, preds: &[u32]) -> bool {
    let mut done = 0u32;
    for _ in 0..n {
        let next = (0..n).find(|&j| done & (1 << j) == 0 && preds[j] & !done == 0);
        match next {
            Some(j) => done |= 1 << j,
            None => return false,
        }
    }
    true
}

fn plan(n: usize, ids: &[String], edges: &[(usize, usize)]) -> AssemblyPlan {
    let actors = [Actor::Robot, Actor::Human, Actor::Joint];
    AssemblyPlan {
        version: 1,
        id: "oracle".into(),
        steps: (0..n)
            .map(|i| Step {
                id: ids[i].clone(),
                actor: actors[i % 3],
                needs: Vec::new(),
                duration: 1.0,
                description: String::new(),
            })
            .collect(),
        precedence: edges.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())).collect(),
        items: Vec::new(),
    }
}

fn progress_for(plan: &AssemblyPlan, done: u32) -> ProgressState {
    let mut p = ProgressState::new(plan);
    for (i, s) in plan.steps.iter().enumerate() {
        if done & (1 << i) != 0 {
            p.steps.insert(s.id.clone(), StepStatus::Done);
        }
    }
    p
}

/// Every state reachable by completing ready steps has a ready step until
/// all are done, readiness matches the oracle, and completing a step never
/// un-readies another.
fn explore(n: usize, ids: &[String], plan: &AssemblyPlan, preds: &[u32], report: &mut OracleReport) {
    let all = (1u32 << n) - 1;
    let mut seen = vec![false; 1 << n];
    let mut stack = vec![0u32];
    seen[0] = true;
    let to_mask = |set: &std::collections::BTreeSet<String>| {
        set.iter()
            .map(|id| 1u32 << ids.iter().position(|x| x == id).expect("known id"))
            .fold(0, |a, b| a | b)
    };
    while let Some(done) = stack.pop() {
        report.states += 1;
        let expected = (0..n)
            .filter(|&j| done & (1 << j) == 0 && preds[j] & !done == 0)
            .fold(0u32, |a, j| a | (1 << j));
        let ready = to_mask(&ready_steps(plan, &progress_for(plan, done)));
        if ready != expected {
            report
                .violations
                .push(format!("{:?} done {done:05b}: ready {ready:05b}, expected {expected:05b}", plan.precedence));
            continue;
        }
        if done != all && ready == 0 {
            report
                .violations
                .push(format!("{:?} deadlocks with {done:05b} done", plan.precedence));
            continue;
        }
        for j in (0..n).filter(|&j| ready & (1 << j) != 0) {
            let next = done | (1 << j);
            let after = to_mask(&ready_steps(plan, &progress_for(plan, next)));
            let kept = ready & !(1 << j);
            if after & kept != kept {
                report
                    .violations
                    .push(format!("{:?}: completing {} un-readied {:05b}", plan.precedence, ids[j], kept & !after));
            }
            if !seen[next as usize] {
                seen[next as usize] = true;
                stack.push(next);
            }
        }
    }
    if !seen[all as usize] {
        report.violations.push(format!("{:?}: completion unreachable", plan.precedence));
    }
}

/// Checks every relation on 1..=max_steps steps (self-edges excluded).
pub fn exhaustive(max_steps: usize) -> OracleReport {
    let mut report = OracleReport::default();
    for n in 1..=max_steps {
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        for mask in 0u64..(1u64 << pairs.len()) {
            report.relations += 1;
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &e)| e)
                .collect();
            let mut preds = vec![0u32; n];
            for &(a, b) in &edges {
                preds[b] |= 1 << a;
            }
            let dag = acyclic(n, &preds);
            let p = plan(n, &ids, &edges);
            match validate_plan(&p) {
                Ok(()) if dag => {
                    report.validated += 1;
                    explore(n, &ids, &p, &preds, &mut report);
                }
                Err(errs) if !dag => {
                    report.rejected += 1;
                    if !errs.iter().any(|e| matches!(e, PlanError::CyclicPrecedence(_))) {
                        report.violations.push(format!("{edges:?}: rejected without a cycle error: {errs:?}"));
                    }
                }
                Ok(()) => report.violations.push(format!("{edges:?}: cyclic relation validated")),
                Err(errs) => report.violations.push(format!("{edges:?}: acyclic relation rejected: {errs:?}")),
            }
        }
    }
    report
}
