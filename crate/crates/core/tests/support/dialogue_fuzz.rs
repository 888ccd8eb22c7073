//! Random-input driver for the dialogue engine that checks liveness and the
//! conversation invariants turn by turn.

use std::collections::{BTreeMap, VecDeque};

use coassembly::backend::ResponseEnvelope;
use coassembly::dialogue::{DialogueEngine, SessionState, SessionStatus, Speaker, Trigger, TurnOutcome};
use coassembly::fixtures;
use coassembly::intent::{MatchResult, SlotKind};
use coassembly::rng;
use coassembly::time::SimTime;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub sessions: usize,
    pub user_turns: usize,
    pub dispatches: usize,
    pub slot_prompts: usize,
    pub initiations: usize,
    pub longest_conversation: usize,
    pub bound: usize,
    pub violations: Vec<String>,
}

/// Turn bound for a script: 2 * (slots * (retries + 1) + 2).
pub fn turn_bound(engine: &DialogueEngine) -> usize {
    let script = engine.script().script();
    let slots = script.max_intent_slots();
    let r = script.dialogues.iter().map(|d| d.max_slot_retries as usize).max().unwrap_or(0);
    2 * (slots * (r + 1) + 2)
}

struct Pool {
    utterances: Vec<String>,
    api: Vec<(String, bool)>,
    words: Vec<String>,
}

fn pool(engine: &DialogueEngine) -> Pool {
    let script = engine.script().script();
    let corpus = fixtures::reference_corpus();
    let mut utterances: Vec<String> = corpus.positive.iter().map(|c| c.text.clone()).collect();
    utterances.extend(corpus.negative.iter().cloned());
    for cat in &script.catalogs {
        for e in &cat.entries {
            utterances.push(format!("the {}", e.canonical.replace('_', " ")));
            utterances.extend(e.synonyms.iter().cloned());
        }
    }
    for extra in ["yes", "no", "gear", "the gear", "", "   ", "?!", "bring", "the the the"] {
        utterances.push(extra.to_owned());
    }
    let mut words: Vec<String> = utterances
        .iter()
        .flat_map(|u| u.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
        .collect();
    words.sort();
    words.dedup();
    let api = script
        .dialogues
        .iter()
        .filter(|d| matches!(d.trigger, Trigger::ApiCall(_)))
        .map(|d| (d.id.clone(), d.expect_reply))
        .collect();
    Pool { utterances, api, words }
}

fn random_text(rng: &mut impl Rng, pool: &Pool) -> String {
    match rng.gen_range(0..10) {
        0..=5 => pool.utterances.choose(rng).unwrap().clone(),
        6..=8 => {
            let n = rng.gen_range(1..6);
            (0..n).map(|_| pool.words.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
        }
        _ => {
            let n = rng.gen_range(0..12);
            (0..n).map(|_| char::from_u32(rng.gen_range(32..0x2FF)).unwrap_or('x')).collect()
        }
    }
}

struct Checker<'a> {
    engine: &'a DialogueEngine,
    bound: usize,
    current: usize,
    longest: usize,
    prompt_streak: Option<(String, usize)>,
    expected_queue: VecDeque<String>,
    violations: Vec<String>,
    dispatches: usize,
    prompts: usize,
}

impl Checker<'_> {
    fn turn(&mut self, ctx: &str) {
        self.current += 1;
        self.longest = self.longest.max(self.current);
        if self.current > self.bound {
            self.violations
                .push(format!("{ctx}: conversation exceeded {} turns", self.bound));
        }
    }

    fn close(&mut self) {
        self.current = 0;
    }

    /// Accounts for one engine call's outcomes and checks the invariants.
    /// With `follow_up`, the first robot line closes the conversation and the
    /// rest open a new robot-initiated one.
    fn outcomes(&mut self, ctx: &str, s: &SessionState, out: &[TurnOutcome], log_before: usize, user: bool, follow_up: bool) {
        let spoken = out.iter().filter(|o| o.speech().is_some()).count();
        let logged = s.turn_log().len() - log_before;
        if logged != spoken + usize::from(user) {
            self.violations.push(format!("{ctx}: {logged} turns logged for {spoken} robot lines"));
        }
        for (k, o) in out.iter().enumerate() {
            match o {
                TurnOutcome::RobotSay { .. } => {
                    self.turn(ctx);
                    if follow_up && k == 0 {
                        self.close();
                    }
                }
                TurnOutcome::PromptSlot { slot, .. } => {
                    self.turn(ctx);
                    self.prompts += 1;
                    let n = match &self.prompt_streak {
                        Some((prev, n)) if prev == slot => n + 1,
                        _ => 1,
                    };
                    self.prompt_streak = Some((slot.clone(), n));
                    let r = s
                        .active_dialogue()
                        .and_then(|d| self.engine.script().dialogue(d))
                        .map_or(0, |d| d.max_slot_retries as usize);
                    if n > r + 1 {
                        self.violations.push(format!("{ctx}: slot {slot} prompted {n} times"));
                    }
                }
                TurnOutcome::Dispatch { request } => {
                    self.dispatches += 1;
                    self.check_dispatch(ctx, request);
                }
                TurnOutcome::ConversationEnded => self.close(),
            }
        }
        if s.pending_slot().is_none() {
            self.prompt_streak = None;
        }
        if matches!(s.status(), SessionStatus::Idle | SessionStatus::Terminal) {
            self.close();
        }
    }

    fn check_dispatch(&mut self, ctx: &str, request: &coassembly::backend::RequestEnvelope) {
        let script = self.engine.script();
        let Some(intent) = request.intent.as_deref().and_then(|i| script.intent(i)) else {
            self.violations.push(format!("{ctx}: dispatch without a known intent"));
            return;
        };
        for spec in intent.required_slots() {
            match request.slots.get(&spec.name) {
                None => self
                    .violations
                    .push(format!("{ctx}: dispatch of {} lacks slot {}", intent.id, spec.name)),
                Some(v) => {
                    if let SlotKind::Catalog(c) = &spec.kind {
                        let known = script
                            .script()
                            .catalogs
                            .iter()
                            .find(|k| &k.name == c)
                            .is_some_and(|k| k.canonicals().any(|x| x == v));
                        if !known {
                            self.violations.push(format!("{ctx}: {v:?} is not a {c} value"));
                        }
                    }
                }
            }
        }
    }

    /// The engine's queue must be the tail of what was queued, in order.
    fn check_queue(&mut self, ctx: &str, s: &SessionState) {
        let actual = s.queued_initiations();
        while self.expected_queue.len() > actual.len() {
            self.expected_queue.pop_front();
        }
        if !self.expected_queue.iter().map(String::as_str).eq(actual.iter().copied()) {
            self.violations
                .push(format!("{ctx}: queue {actual:?}, expected tail of {:?}", self.expected_queue));
        }
    }
}

fn alternation(ctx: &str, s: &SessionState, violations: &mut Vec<String>) {
    for w in s.turn_log().windows(2) {
        if w[0].speaker == Speaker::User && w[1].speaker == Speaker::User && w[0].dialogue.is_some() && w[0].dialogue == w[1].dialogue {
            violations.push(format!("{ctx}: two user turns in a row in {:?}", w[0].dialogue));
        }
    }
}

/// Runs `count` random sessions against the engine.
pub fn fuzz(engine: &DialogueEngine, seed: u64, count: usize) -> FuzzReport {
    let pool = pool(engine);
    let bound = turn_bound(engine);
    let mut report = FuzzReport {
        bound,
        ..FuzzReport::default()
    };
    for i in 0..count {
        let mut rng = rng::stream(seed, "dialogue-fuzz", i as u64);
        let mut s = SessionState::new(format!("s{i}"));
        let mut ck = Checker {
            engine,
            bound,
            current: 0,
            longest: 0,
            prompt_streak: None,
            expected_queue: VecDeque::new(),
            violations: Vec::new(),
            dispatches: 0,
            prompts: 0,
        };
        let inputs = rng.gen_range(1..=24);
        let mut t = 0u64;
        let mut step = 0usize;
        let mut drained = false;
        loop {
            step += 1;
            t += 1000;
            let at = SimTime::from_millis(t);
            let ctx = format!("session {i} step {step}");
            let before = s.turn_log().len();
            if s.status() == SessionStatus::AwaitingBackend {
                let mut resp = ResponseEnvelope::say(s.id(), format!("Reply {step}."));
                resp.end = rng.gen_bool(0.2);
                if rng.gen_bool(0.25) {
                    let (d, _) = pool.api.choose(&mut rng).unwrap();
                    resp = resp.with_follow_up(d);
                }
                let follow = resp.follow_up.is_some();
                match engine.backend_result(&mut s, &resp, at) {
                    Ok(out) => {
                        ck.outcomes(&ctx, &s, &out, before, false, follow);
                    }
                    Err(e) => ck.violations.push(format!("{ctx}: backend_result failed: {e}")),
                }
                ck.check_queue(&ctx, &s);
                continue;
            }
            let quiet = matches!(s.status(), SessionStatus::Idle | SessionStatus::Terminal);
            if step > inputs * 2 + 1 && quiet {
                drained = true;
                break;
            }
            if step > inputs * 2 + 4 * bound + 8 {
                break;
            }
            if s.status() == SessionStatus::Terminal {
                s.reopen();
            }
            let draining = step > inputs * 2;
            if !draining && rng.gen_bool(0.15) {
                let (d, _) = pool.api.choose(&mut rng).unwrap().clone();
                let mut payload = BTreeMap::new();
                payload.insert("item".to_owned(), "planet carrier".to_owned());
                payload.insert("detail".to_owned(), "I could not reach the carrier".to_owned());
                let idle = matches!(s.status(), SessionStatus::Idle | SessionStatus::Terminal);
                if !idle {
                    ck.expected_queue.push_back(d.clone());
                }
                report.initiations += 1;
                match engine.initiate_dialogue(&mut s, &d, payload, at) {
                    Ok(out) => {
                        if idle {
                            ck.close();
                        }
                        ck.outcomes(&ctx, &s, &out, before, false, false);
                    }
                    Err(e) => ck.violations.push(format!("{ctx}: initiate {d} failed: {e}")),
                }
                ck.check_queue(&ctx, &s);
                continue;
            }
            let text = if draining {
                "zzz qqq".to_owned()
            } else {
                random_text(&mut rng, &pool)
            };
            report.user_turns += 1;
            // A newly matched intent opens a new dialogue, superseding any
            // open robot question.
            if s.pending_slot().is_none() && matches!(engine.script().matcher().match_text(&text), MatchResult::Matched(_)) {
                ck.close();
            }
            ck.turn(&ctx);
            match engine.user_turn(&mut s, &text, at) {
                Ok(out) => ck.outcomes(&ctx, &s, &out, before, true, false),
                Err(e) => ck.violations.push(format!("{ctx}: user turn {text:?} failed: {e}")),
            }
            ck.check_queue(&ctx, &s);
        }
        if !drained {
            ck.violations
                .push(format!("session {i}: never returned to idle, status {:?}", s.status()));
        }
        if !s.queued_initiations().is_empty() {
            ck.violations
                .push(format!("session {i}: initiations left queued {:?}", s.queued_initiations()));
        }
        alternation(&format!("session {i}"), &s, &mut ck.violations);
        report.sessions += 1;
        report.dispatches += ck.dispatches;
        report.slot_prompts += ck.prompts;
        report.longest_conversation = report.longest_conversation.max(ck.longest);
        report.violations.extend(ck.violations);
    }
    report
}
