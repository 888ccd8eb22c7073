//! Release gate: prints one PASS or FAIL line per acceptance criterion and
//! exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::cell::Cell;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use coassembly::assembly::{Actor, StepStatus};
use coassembly::backend::{Mode, ProtocolError, RequestEnvelope, ResponseEnvelope};
use coassembly::dialogue::DialogueEngine;
use coassembly::fixtures;
use coassembly::intent::IntentMatcher;
use coassembly::metrics::{compare, compute_metrics, MetricsReport};
use coassembly::rng;
use coassembly::script::CompiledScript;
use coassembly::sim::{run_batch, run_scenario, EndReason, RecordBody, RobotEventKind, Scenario, Trace};
use coassembly::time::{SimDuration, SimTime};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

use support::{dialogue_fuzz, envelopes, plan_oracle};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference_file(name: &str) -> PathBuf {
    fixtures::reference_dir().join(name)
}

/// Every trace the gate produces, checked for conservation at the end.
#[derive(Default)]
struct Traces(Vec<(String, Trace)>);

fn determinism(traces: &mut Traces) -> Verdict {
    let bin = env!("CARGO_BIN_EXE_coassembly");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = reference_file("scenario.json");
    let started = Instant::now();
    for run in ["a", "b"] {
        let status = Command::new(bin)
            .args(["compare", "--scenario"])
            .arg(&scenario)
            .args(["--seed", "42", "-o"])
            .arg(dir.path().join(run))
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
    }
    let elapsed = started.elapsed();
    for name in ["baseline.trace.jsonl", "conversational.trace.jsonl", "comparison.json"] {
        let a = fs::read(dir.path().join("a").join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(dir.path().join("b").join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between runs"))?;
        if name.ends_with(".jsonl") {
            let text = String::from_utf8(a).map_err(|e| e.to_string())?;
            traces.0.push((format!("compare {name}"), Trace::from_ndjson(&text).map_err(|e| e.to_string())?));
        }
    }
    ensure(elapsed < Duration::from_secs(5), || format!("two runs took {elapsed:?}"))?;
    Ok(format!("two compare runs byte-identical in {:.2}s", elapsed.as_secs_f64()))
}

fn calibration(traces: &mut Traces) -> Verdict {
    let path = reference_file("calibration.json");
    let cal: Value = serde_json::from_str(&fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let num = |v: &Value| v.as_f64().ok_or_else(|| format!("calibration: expected a number, got {v}"));
    let scenario_path = path.parent().unwrap_or(Path::new(".")).join(cal["scenario"].as_str().unwrap_or_default());
    let seed = cal["seed"].as_u64().ok_or("calibration: seed")?;
    let scenario = Scenario::load(&scenario_path).map_err(|e| format!("{e:?}"))?.with_seed(seed);
    let mut reports = Vec::new();
    for mode in Mode::ALL {
        let trace = run_scenario(&scenario.with_mode(mode));
        let m = compute_metrics(&trace).map_err(|e| e.to_string())?;
        traces.0.push((format!("calibration {mode}"), trace));
        reports.push((mode, m));
    }
    let tol = num(&cal["tolerance_pct"])?;
    for (mode, m) in &reports {
        for (field, got) in [("execution_time", m.execution_time), ("robot_downtime", m.robot_downtime)] {
            let want = num(&cal[mode.as_str()][field])?;
            let got = got.as_secs_f64();
            ensure((got - want).abs() <= want.abs() * tol / 100.0, || format!("{mode} {field}: {got} vs recorded {want}"))?;
        }
    }
    let cmp = compare(&reports[0].1, &reports[1].1).map_err(|e| e.to_string())?;
    for (field, got) in [
        ("execution_time_reduction_pct", cmp.execution_time_reduction_pct),
        ("downtime_reduction_pct", cmp.downtime_reduction_pct),
    ] {
        let want = num(&cal[field])?;
        ensure((got - want).abs() <= tol + 1e-9, || format!("{field}: {got} vs recorded {want}"))?;
        let (lo, hi) = (num(&cal["brackets"][field][0])?, num(&cal["brackets"][field][1])?);
        ensure((lo..=hi).contains(&got), || format!("{field}: {got} outside [{lo}, {hi}]"))?;
    }
    Ok(format!(
        "execution time -{:.1}% in [10, 35], downtime -{:.1}% in [50, 90], matching recorded values",
        cmp.execution_time_reduction_pct, cmp.downtime_reduction_pct
    ))
}

fn vocabulary() -> Vec<String> {
    let s = fixtures::reference_script();
    let mut words: Vec<String> = s
        .intents
        .iter()
        .flat_map(|i| i.utterances.iter())
        .flat_map(|t| t.to_string().split_whitespace().map(str::to_owned).collect::<Vec<_>>())
        .filter(|w| !w.starts_with('{'))
        .collect();
    for c in &s.catalogs {
        for e in &c.entries {
            words.extend(e.canonical.split('_').map(str::to_owned));
            words.extend(e.synonyms.iter().flat_map(|x| x.split_whitespace().map(str::to_owned).collect::<Vec<_>>()));
        }
    }
    words.extend(["banana", "please", "not", "?", "!", ",", "ÄÖ", "  "].map(String::from));
    words.sort();
    words.dedup();
    words
}

fn intent_corpus() -> Verdict {
    let corpus = fixtures::reference_corpus();
    ensure(corpus.positive.len() >= 40 && corpus.negative.len() >= 20, || {
        format!("corpus too small: {} positive, {} negative", corpus.positive.len(), corpus.negative.len())
    })?;
    let script = CompiledScript::compile(fixtures::reference_script()).map_err(|e| format!("{e:?}"))?;
    let failures = corpus.failures(script.matcher());
    ensure(failures.is_empty(), || format!("corpus failures: {failures:?}"))?;
    let s = fixtures::reference_script();
    let other = IntentMatcher::new(&s.intents, &s.catalogs);
    let vocab = vocabulary();
    let mut rng = rng::stream(2024, "acceptance-matcher", 0);
    const STRINGS: usize = 10_000;
    for _ in 0..STRINGS {
        let n = rng.gen_range(0..9);
        let text = (0..n).map(|_| vocab.choose(&mut rng).unwrap().as_str()).collect::<Vec<_>>().join(" ");
        let first = script.matcher().match_text(&text);
        ensure(first == script.matcher().match_text(&text) && first == other.match_text(&text), || {
            format!("nondeterministic match for {text:?}")
        })?;
    }
    Ok(format!(
        "{} positive and {} out-of-domain utterances correct; {STRINGS} random strings matched deterministically",
        corpus.positive.len(),
        corpus.negative.len()
    ))
}

fn dialogue_liveness() -> Verdict {
    let script = CompiledScript::compile(fixtures::reference_script()).map_err(|e| format!("{e:?}"))?;
    let engine = DialogueEngine::new(script);
    let bound = dialogue_fuzz::turn_bound(&engine);
    ensure(bound == 10, || format!("turn bound is {bound}, expected 10"))?;
    let r = dialogue_fuzz::fuzz(&engine, 42, 10_000);
    ensure(r.violations.is_empty(), || {
        format!("{} violations, first: {:?}", r.violations.len(), &r.violations[..r.violations.len().min(3)])
    })?;
    ensure(r.sessions == 10_000, || format!("ran {} sessions", r.sessions))?;
    Ok(format!(
        "{} sessions, {} user turns, longest conversation {} of bound {}, no violations",
        r.sessions, r.user_turns, r.longest_conversation, r.bound
    ))
}

fn hand_trace() -> Trace {
    let mut t = Trace::new();
    let robot = |event, mode: &str| RecordBody::Robot {
        event,
        mode: mode.into(),
        action: None,
        detail: None,
    };
    let step = |status| RecordBody::Step {
        step: "r1".into(),
        actor: Actor::Robot,
        status,
    };
    // Idle with work pending, executing, then faulted until the step is done.
    t.push(SimTime::ZERO, step(StepStatus::Pending));
    t.push(SimTime::ZERO, robot(RobotEventKind::Mode, "idle"));
    t.push(SimTime::from_secs(5.0), robot(RobotEventKind::Started, "executing"));
    t.push(SimTime::from_secs(15.0), robot(RobotEventKind::Failed, "faulted"));
    t.push(SimTime::from_secs(22.0), step(StepStatus::Done));
    t.push(
        SimTime::from_secs(22.0),
        RecordBody::SimEnd {
            reason: EndReason::Completed,
            dropped_events: 0,
        },
    );
    t
}

fn metrics_conservation(traces: &mut Traces) -> Verdict {
    let hand = compute_metrics(&hand_trace()).map_err(|e| e.to_string())?;
    ensure(hand.robot_downtime == SimDuration::from_secs(12.0), || format!("hand trace downtime {}", hand.robot_downtime))?;
    ensure(hand.closes(), || "hand trace does not close".into())?;

    let reference = fixtures::reference_scenario();
    let sweep: Vec<Scenario> = (0..40u64)
        .map(|seed| reference.with_seed(seed).with_mode(Mode::ALL[(seed % 2) as usize]))
        .collect();
    for r in run_batch(&sweep, 7) {
        traces.0.push((format!("sweep {} #{}", r.id, r.position), r.trace));
    }
    for (name, trace) in &traces.0 {
        let m: MetricsReport = compute_metrics(trace).map_err(|e| format!("{name}: {e}"))?;
        let total = m.robot_busy + m.robot_downtime + m.robot_idle_other;
        ensure(total == m.execution_time, || format!("{name}: {total} != {}", m.execution_time))?;
    }
    Ok(format!("{} traces close exactly; hand-built trace downtime is 12 s", traces.0.len()))
}

fn protocol_round_trip() -> Verdict {
    const CASES: u32 = 10_000;
    let config = Config {
        failure_persistence: None,
        ..Config::with_cases(CASES)
    };
    let runner = || TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let count = Cell::new(0u32);
    runner()
        .run(&envelopes::request(), |env| {
            count.set(count.get() + 1);
            assert_eq!(RequestEnvelope::from_json(&env.to_json()).expect("round trip parses"), env);
            Ok(())
        })
        .map_err(|e| format!("request: {e}"))?;
    runner()
        .run(&envelopes::response(), |env| {
            count.set(count.get() + 1);
            assert_eq!(ResponseEnvelope::from_json(&env.to_json()).expect("round trip parses"), env);
            Ok(())
        })
        .map_err(|e| format!("response: {e}"))?;
    ensure(envelopes::MALFORMED.len() >= 10, || "malformed table too small".into())?;
    for (name, body) in envelopes::MALFORMED {
        match RequestEnvelope::from_json(body) {
            Err(ProtocolError::BadEnvelope(_)) => {}
            other => return Err(format!("{name}: expected bad envelope, got {other:?}")),
        }
    }
    Ok(format!(
        "{} envelopes round-tripped; {} malformed bodies rejected as bad envelopes",
        count.get(),
        envelopes::MALFORMED.len()
    ))
}

fn deadlock_oracle() -> Verdict {
    let started = Instant::now();
    let r = plan_oracle::exhaustive(5);
    let elapsed = started.elapsed();
    ensure(r.violations.is_empty(), || format!("{} violations, first: {:?}", r.violations.len(), r.violations.first()))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} relations, {} valid plans all complete over {} states in {:.1}s",
        r.relations,
        r.validated,
        r.states,
        elapsed.as_secs_f64()
    ))
}

fn main() {
    let mut traces = Traces::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Traces) -> Verdict>)> = vec![
        ("determinism regression", Box::new(determinism)),
        ("calibrated comparative regression", Box::new(calibration)),
        ("intent corpus", Box::new(|_| intent_corpus())),
        ("dialogue liveness fuzz", Box::new(|_| dialogue_liveness())),
        ("metrics conservation", Box::new(metrics_conservation)),
        ("protocol round-trip", Box::new(|_| protocol_round_trip())),
        ("small-plan deadlock oracle", Box::new(|_| deadlock_oracle())),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check(&mut traces) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
