//! Execution-time and downtime accounting over traces, mode comparison and
//! questionnaire aggregation.
//!
//! Robot downtime is time the robot is not executing an action while at least
//! one robot or joint step is still unfinished. Busy time, downtime and the
//! remaining idle time partition the execution time exactly.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assembly::StepStatus;
use crate::dialogue::Speaker;
use crate::sim::{RecordBody, RobotEventKind, Trace};
use crate::time::SimDuration;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub execution_time: SimDuration,
    pub robot_downtime: SimDuration,
    pub robot_busy: SimDuration,
    /// Robot not executing with no robot work left.
    pub robot_idle_other: SimDuration,
    pub user_turns: u64,
    pub robot_turns: u64,
    pub slot_prompts: u64,
    pub failures: u64,
    pub dropped_events: u64,
}

impl MetricsReport {
    /// Whether busy + downtime + other idle equals execution time.
    pub fn closes(&self) -> bool {
        self.robot_busy + self.robot_downtime + self.robot_idle_other == self.execution_time
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("baseline has zero execution time or zero downtime")]
    ZeroBaseline,
    #[error("questionnaire sample is empty")]
    EmptySample,
    #[error("rating {0} outside [0, 10]")]
    RatingOutOfRange(f64),
}

fn check_well_formed(trace: &Trace) -> Result<(), MetricsError> {
    let n = trace.records.len();
    let ends = trace
        .records
        .iter()
        .filter(|r| matches!(r.body, RecordBody::SimEnd { .. }))
        .count();
    if ends != 1 || !matches!(trace.records.last().map(|r| &r.body), Some(RecordBody::SimEnd { .. })) {
        return Err(MetricsError::MalformedTrace("trace must end with exactly one sim_end".into()));
    }
    for w in trace.records.windows(2) {
        if w[1].t < w[0].t {
            return Err(MetricsError::MalformedTrace(format!("time goes backwards at seq {}", w[1].seq)));
        }
        if w[1].seq <= w[0].seq {
            return Err(MetricsError::MalformedTrace(format!("sequence not increasing at seq {}", w[1].seq)));
        }
    }
    debug_assert!(n > 0);
    Ok(())
}

pub fn compute_metrics(trace: &Trace) -> Result<MetricsReport, MetricsError> {
    check_well_formed(trace)?;
    let start = trace.records[0].t;
    let mut report = MetricsReport::default();
    let mut executing = false;
    let mut open_robot_steps: BTreeSet<&str> = BTreeSet::new();
    let mut prev = start;

    for r in &trace.records {
        let span = r.t.saturating_since(prev);
        if executing {
            report.robot_busy += span;
        } else if !open_robot_steps.is_empty() {
            report.robot_downtime += span;
        } else {
            report.robot_idle_other += span;
        }
        prev = r.t;
        match &r.body {
            RecordBody::Utterance { speaker, .. } => match speaker {
                Speaker::User => report.user_turns += 1,
                Speaker::Robot => report.robot_turns += 1,
            },
            RecordBody::Robot { event, mode, .. } => {
                executing = mode == "executing";
                if *event == RobotEventKind::Failed {
                    report.failures += 1;
                }
            }
            RecordBody::Step { step, actor, status } => {
                if actor.involves_robot() {
                    if *status == StepStatus::Done {
                        open_robot_steps.remove(step.as_str());
                    } else {
                        open_robot_steps.insert(step.as_str());
                    }
                }
            }
            RecordBody::Dialogue { outcome, .. } => {
                if outcome == "prompt_slot" {
                    report.slot_prompts += 1;
                }
            }
            RecordBody::SimEnd { dropped_events, .. } => report.dropped_events = *dropped_events,
        }
    }
    report.execution_time = prev.saturating_since(start);
    debug_assert!(report.closes());
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub execution_time_reduction_pct: f64,
    pub downtime_reduction_pct: f64,
}

/// `100 * (base - prop) / base` rounded half-up to one decimal, computed on
/// integer milliseconds.
pub fn reduction_pct(base: SimDuration, prop: SimDuration) -> Option<f64> {
    let b = base.as_millis() as i128;
    if b == 0 {
        return None;
    }
    let p = prop.as_millis() as i128;
    // tenths = floor((1000 (b - p) + b / 2) / b), exactly.
    let num = 2 * 1000 * (b - p) + b;
    let den = 2 * b;
    Some(num.div_euclid(den) as f64 / 10.0)
}

/// Unrounded reduction percentage.
pub fn raw_reduction_pct(base: SimDuration, prop: SimDuration) -> Option<f64> {
    let b = base.as_millis() as f64;
    (b > 0.0).then(|| 100.0 * (b - prop.as_millis() as f64) / b)
}

pub fn compare(base: &MetricsReport, prop: &MetricsReport) -> Result<ComparisonReport, MetricsError> {
    if base.execution_time.is_zero() || base.robot_downtime.is_zero() {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(ComparisonReport {
        execution_time_reduction_pct: reduction_pct(base.execution_time, prop.execution_time).unwrap(),
        downtime_reduction_pct: reduction_pct(base.robot_downtime, prop.robot_downtime).unwrap(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireRecord {
    pub clarity: f64,
    pub naturalness: f64,
    pub ease: f64,
    pub stress: f64,
    pub overall: f64,
}

impl QuestionnaireRecord {
    fn ratings(&self) -> [f64; 5] {
        [self.clarity, self.naturalness, self.ease, self.stress, self.overall]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireSummary {
    pub clarity: f64,
    pub naturalness: f64,
    pub ease: f64,
    pub stress: f64,
    pub overall: f64,
    /// Mean over every rating of every record.
    pub mean: f64,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn aggregate_questionnaire(records: &[QuestionnaireRecord]) -> Result<QuestionnaireSummary, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let mut sums = [0.0f64; 5];
    for r in records {
        for (s, v) in sums.iter_mut().zip(r.ratings()) {
            if !(0.0..=10.0).contains(&v) {
                return Err(MetricsError::RatingOutOfRange(v));
            }
            *s += v;
        }
    }
    let n = records.len() as f64;
    let m = sums.map(|s| s / n);
    Ok(QuestionnaireSummary {
        clarity: round1(m[0]),
        naturalness: round1(m[1]),
        ease: round1(m[2]),
        stress: round1(m[3]),
        overall: round1(m[4]),
        mean: round1(m.iter().sum::<f64>() / 5.0),
    })
}

const COLUMNS: [&str; 10] = [
    "scenario",
    "execution_s",
    "downtime_s",
    "busy_s",
    "idle_other_s",
    "user_turns",
    "robot_turns",
    "slot_prompts",
    "failures",
    "dropped_events",
];

fn cells(name: &str, r: &MetricsReport) -> [String; 10] {
    [
        name.to_owned(),
        format!("{:.3}", r.execution_time.as_secs_f64()),
        format!("{:.3}", r.robot_downtime.as_secs_f64()),
        format!("{:.3}", r.robot_busy.as_secs_f64()),
        format!("{:.3}", r.robot_idle_other.as_secs_f64()),
        r.user_turns.to_string(),
        r.robot_turns.to_string(),
        r.slot_prompts.to_string(),
        r.failures.to_string(),
        r.dropped_events.to_string(),
    ]
}

/// Aligned text table, one row per report.
pub fn render_table(rows: &[(&str, &MetricsReport)]) -> String {
    let body: Vec<[String; 10]> = rows.iter().map(|(n, r)| cells(n, r)).collect();
    let mut widths = COLUMNS.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        for (i, (c, w)) in row.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, &COLUMNS);
    for row in &body {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

pub fn csv_header() -> String {
    COLUMNS.join(",")
}

pub fn csv_row(name: &str, r: &MetricsReport) -> String {
    cells(name, r).join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Actor;
    use crate::sim::EndReason;
    use crate::time::SimTime;

    fn robot(event: RobotEventKind, mode: &str) -> RecordBody {
        RecordBody::Robot {
            event,
            mode: mode.into(),
            action: None,
            detail: None,
        }
    }

    fn secs(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn end() -> RecordBody {
        RecordBody::SimEnd {
            reason: EndReason::Completed,
            dropped_events: 0,
        }
    }

    #[test]
    fn empty_body_trace_is_all_zero() {
        let mut t = Trace::new();
        t.push(SimTime::ZERO, end());
        assert_eq!(compute_metrics(&t).unwrap(), MetricsReport::default());
    }

    #[test]
    fn hand_built_three_interval_trace() {
        let mut t = Trace::new();
        t.push(
            secs(0.0),
            RecordBody::Step {
                step: "r1".into(),
                actor: Actor::Robot,
                status: StepStatus::Pending,
            },
        );
        t.push(secs(0.0), robot(RobotEventKind::Mode, "idle"));
        t.push(secs(5.0), robot(RobotEventKind::Started, "executing"));
        t.push(secs(15.0), robot(RobotEventKind::Failed, "faulted"));
        t.push(
            secs(22.0),
            RecordBody::Step {
                step: "r1".into(),
                actor: Actor::Robot,
                status: StepStatus::Done,
            },
        );
        t.push(secs(22.0), end());
        let m = compute_metrics(&t).unwrap();
        assert_eq!(m.robot_downtime, SimDuration::from_secs(12.0));
        assert_eq!(m.robot_busy, SimDuration::from_secs(10.0));
        assert_eq!(m.execution_time, SimDuration::from_secs(22.0));
        assert_eq!(m.failures, 1);
        assert!(m.closes());
    }

    #[test]
    fn idle_after_robot_work_is_not_downtime() {
        let mut t = Trace::new();
        t.push(
            secs(0.0),
            RecordBody::Step {
                step: "r1".into(),
                actor: Actor::Robot,
                status: StepStatus::Pending,
            },
        );
        t.push(secs(0.0), robot(RobotEventKind::Started, "executing"));
        t.push(secs(4.0), robot(RobotEventKind::Done, "idle"));
        t.push(
            secs(4.0),
            RecordBody::Step {
                step: "r1".into(),
                actor: Actor::Robot,
                status: StepStatus::Done,
            },
        );
        t.push(secs(30.0), end());
        let m = compute_metrics(&t).unwrap();
        assert_eq!(m.robot_downtime, SimDuration::ZERO);
        assert_eq!(m.robot_idle_other, SimDuration::from_secs(26.0));
    }

    #[test]
    fn malformed_traces_rejected() {
        assert!(compute_metrics(&Trace::new()).is_err());
        let mut t = Trace::new();
        t.push(secs(3.0), robot(RobotEventKind::Mode, "idle"));
        assert!(compute_metrics(&t).is_err());
        t.push(secs(1.0), end());
        assert!(compute_metrics(&t).is_err());
    }

    #[test]
    fn compare_examples() {
        let r = |e: f64, d: f64| MetricsReport {
            execution_time: SimDuration::from_secs(e),
            robot_downtime: SimDuration::from_secs(d),
            ..Default::default()
        };
        let c = compare(&r(100.0, 60.0), &r(78.0, 16.2)).unwrap();
        assert_eq!(c.execution_time_reduction_pct, 22.0);
        assert_eq!(c.downtime_reduction_pct, 73.0);
        let c = compare(&r(10.0, 10.0), &r(10.0, 10.0)).unwrap();
        assert_eq!((c.execution_time_reduction_pct, c.downtime_reduction_pct), (0.0, 0.0));
        assert_eq!(compare(&r(0.0, 1.0), &r(1.0, 1.0)), Err(MetricsError::ZeroBaseline));
        assert_eq!(compare(&r(1.0, 0.0), &r(1.0, 1.0)), Err(MetricsError::ZeroBaseline));
    }

    #[test]
    fn rounding_is_half_up() {
        let ms = SimDuration::from_millis;
        // 100 * 1 / 8 = 12.5 -> 12.5 ; 100 * 1 / 16 = 6.25 -> 6.3
        assert_eq!(reduction_pct(ms(16), ms(15)), Some(6.3));
        // -6.25 -> -6.2 under half-up
        assert_eq!(reduction_pct(ms(16), ms(17)), Some(-6.2));
        assert_eq!(reduction_pct(ms(0), ms(1)), None);
    }

    #[test]
    fn questionnaire() {
        let rec = |c: f64| QuestionnaireRecord {
            clarity: c,
            naturalness: 7.0,
            ease: 8.0,
            stress: 6.0,
            overall: 9.0,
        };
        let one = aggregate_questionnaire(&[rec(8.0)]).unwrap();
        assert_eq!(
            (one.clarity, one.naturalness, one.ease, one.stress, one.overall),
            (8.0, 7.0, 8.0, 6.0, 9.0)
        );
        assert_eq!(aggregate_questionnaire(&[rec(8.0), rec(9.0)]).unwrap().clarity, 8.5);
        assert_eq!(aggregate_questionnaire(&[]), Err(MetricsError::EmptySample));
        assert_eq!(aggregate_questionnaire(&[rec(11.0)]), Err(MetricsError::RatingOutOfRange(11.0)));
    }

    #[test]
    fn table_and_csv() {
        let r = MetricsReport {
            execution_time: SimDuration::from_secs(22.0),
            ..Default::default()
        };
        let table = render_table(&[("baseline", &r), ("conversational", &r)]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
        assert_eq!(csv_row("x", &r).split(',').count(), csv_header().split(',').count());
    }
}
