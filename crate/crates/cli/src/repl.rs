//! Interactive operator console over a live simulation.
//!
//! Time is turn-stepped by default: the simulation only moves between
//! inputs, so typing speed never shows up in the metrics.
//!
//! | input        | effect                                              |
//! |--------------|-----------------------------------------------------|
//! | text         | say it now, then run until the robot needs you      |
//! | `@T text`    | move to `T` seconds, then say it                    |
//! | `@T`         | move to `T` seconds                                 |
//! | empty line   | run until the robot needs you                       |
//! | `:run`       | run to the end                                      |
//! | `:state`     | print the simulation snapshot                       |
//! | `:metrics`   | print metrics so far                                |
//! | `:quit`      | leave without finishing the run                     |
//!
//! End of input finishes the run. With `realtime`, simulated time follows
//! the wall clock and nothing advances after speech.

use std::io::{BufRead, Write};
use std::time::Instant;

use coassembly::assembly::StepStatus;
use coassembly::dialogue::Speaker;
use coassembly::metrics::render_table;
use coassembly::sim::{OperatorKind, RecordBody, Scenario, Sim, Trace, TraceRecord};
use coassembly::time::SimTime;

use crate::Failure;

const HELP: &str = "type to speak; '@T text' speaks at T seconds; empty line waits; :run :state :metrics :quit :help";

/// Runs an interactive session and returns its trace.
pub fn session(scenario: &Scenario, realtime: bool, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<Trace, Failure> {
    let mut sim = Sim::new(scenario, OperatorKind::External);
    let origin = Instant::now();
    writeln!(out, "scenario {} in {} mode; {HELP}", scenario.config.id, scenario.mode())?;
    let mut shown = 0;
    show(&sim, &mut shown, out)?;
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            finish(&mut sim);
            show(&sim, &mut shown, out)?;
            break;
        }
        if realtime {
            sim.advance_to(SimTime::from_millis(origin.elapsed().as_millis() as u64));
        }
        let text = line.trim();
        let keep_going = command(&mut sim, text, realtime, out)?;
        show(&sim, &mut shown, out)?;
        if !keep_going {
            break;
        }
    }
    if let Ok(m) = sim.metrics() {
        write!(out, "{}", render_table(&[("session", &m)]))?;
    }
    Ok(sim.into_trace())
}

fn finish(sim: &mut Sim) {
    while !sim.is_finished() {
        sim.step();
    }
}

/// Applies one input line. Returns false when the session should stop.
fn command(sim: &mut Sim, text: &str, realtime: bool, out: &mut dyn Write) -> Result<bool, Failure> {
    let wait = |sim: &mut Sim| {
        let limit = sim.max_time();
        sim.advance_until_attention(limit);
    };
    match text {
        "" | ":wait" => wait(sim),
        ":run" => finish(sim),
        ":quit" | ":q" => return Ok(false),
        ":help" => writeln!(out, "{HELP}")?,
        ":state" => writeln!(out, "{}", serde_json::to_string_pretty(&sim.snapshot()).expect("snapshot serializes"))?,
        ":metrics" => match sim.metrics() {
            Ok(m) => write!(out, "{}", render_table(&[("now", &m)]))?,
            Err(e) => writeln!(out, "! {e}")?,
        },
        _ if text.starts_with(':') => writeln!(out, "! unknown command {text}; {HELP}")?,
        _ if text.starts_with('@') => {
            let rest = &text[1..];
            let (at, speech) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            let t = match at.parse::<f64>().ok().and_then(SimTime::try_from_secs) {
                Some(t) => t,
                None => {
                    writeln!(out, "! bad time {at:?}")?;
                    return Ok(true);
                }
            };
            if t < sim.now() {
                writeln!(out, "! {t} is before the current time {}", sim.now())?;
                return Ok(true);
            }
            sim.advance_to(t);
            let speech = speech.trim();
            if !speech.is_empty() {
                say(sim, speech, out)?;
            }
        }
        _ => {
            say(sim, text, out)?;
            if !realtime {
                wait(sim);
            }
        }
    }
    Ok(true)
}

fn say(sim: &mut Sim, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    if sim.is_finished() {
        writeln!(out, "! the run has ended")?;
    } else if let Err(e) = sim.say(text) {
        writeln!(out, "! {e}")?;
    }
    Ok(())
}

fn show(sim: &Sim, shown: &mut u64, out: &mut dyn Write) -> Result<(), Failure> {
    for r in sim.trace().since(*shown) {
        if let Some(line) = describe(r) {
            writeln!(out, "[{:>8.1}] {line}", r.t.as_secs_f64())?;
        }
        *shown = r.seq + 1;
    }
    Ok(())
}

/// One transcript line per record worth showing to the operator.
pub fn describe(r: &TraceRecord) -> Option<String> {
    match &r.body {
        RecordBody::Utterance { speaker, text, .. } => Some(match speaker {
            Speaker::Robot => format!("robot: {text}"),
            Speaker::User => format!("you:   {text}"),
        }),
        RecordBody::Robot {
            event, mode, action, detail, ..
        } => {
            let what = action.as_deref().unwrap_or("-");
            let event = serde_json::to_value(event).ok()?;
            let mut s = format!("robot {} {what} ({mode})", event.as_str()?);
            if let Some(d) = detail {
                s.push_str(": ");
                s.push_str(d);
            }
            Some(s)
        }
        RecordBody::Step { step, status, .. } => {
            if *status == StepStatus::Pending {
                return None;
            }
            let status = serde_json::to_value(status).ok()?;
            Some(format!("step {step} {}", status.as_str()?))
        }
        RecordBody::Dialogue { .. } => None,
        RecordBody::SimEnd { reason, .. } => Some(format!("end: {reason}")),
    }
}
