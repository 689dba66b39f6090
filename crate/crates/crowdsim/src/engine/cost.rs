//! Cost accounting: pay rates and the ledger folded from pay events.

use serde::{Deserialize, Serialize};

use super::event::{EventPayload, LoggedEvent};

/// How a terminated assignment is paid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedPayPolicy {
    /// Full task price regardless of progress.
    #[default]
    Full,
    /// Scaled by the fraction of the sampled latency that elapsed.
    Prorated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRates {
    /// Retainer pay per idle minute.
    pub wait_per_minute: f64,
    /// Pay per record in a finished assignment.
    pub work_per_record: f64,
    /// Flat fee per recruited worker.
    pub recruit_fee: f64,
    pub terminated_pay: TerminatedPayPolicy,
}

impl Default for CostRates {
    fn default() -> Self {
        Self {
            wait_per_minute: 0.05,
            work_per_record: 0.02,
            recruit_fee: 0.05,
            terminated_pay: TerminatedPayPolicy::Full,
        }
    }
}

impl CostRates {
    pub fn wait_pay(&self, idle_s: f64) -> f64 {
        idle_s / 60.0 * self.wait_per_minute
    }

    pub fn work_pay(&self, records: u32) -> f64 {
        f64::from(records) * self.work_per_record
    }

    pub fn termination_pay(&self, records: u32, elapsed_s: f64, due_s: f64) -> f64 {
        let full = self.work_pay(records);
        match self.terminated_pay {
            TerminatedPayPolicy::Full => full,
            TerminatedPayPolicy::Prorated => {
                let fraction = if due_s > 0.0 {
                    (elapsed_s / due_s).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                full * fraction
            }
        }
    }
}

/// Monotone cost components; the total is exactly their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub wait_cost: f64,
    pub work_cost: f64,
    pub recruitment_cost: f64,
    pub total_cost: f64,
}

impl CostLedger {
    /// Accrue every pay event in a run's event stream. Each component sums
    /// its category's pay events in stream order; the total is the exact sum
    /// of the three components.
    pub fn from_events(events: &[LoggedEvent]) -> Self {
        let mut wait = 0.0;
        let mut work = 0.0;
        let mut recruitment = 0.0;
        for event in events {
            match &event.payload {
                EventPayload::RecruitmentReady(e) => recruitment += e.recruit_pay,
                EventPayload::AssignmentFinish(e) => {
                    work += e.work_pay;
                    for t in &e.terminated {
                        work += t.pay;
                    }
                    for s in &e.started {
                        wait += s.wait_pay;
                    }
                }
                EventPayload::MaintenanceTick(e) => {
                    for ev in &e.evictions {
                        wait += ev.wait_pay;
                        if let Some(t) = &ev.terminated {
                            work += t.pay;
                        }
                    }
                    for s in &e.started {
                        wait += s.wait_pay;
                    }
                }
                EventPayload::BatchDispatch(e) => {
                    for s in &e.started {
                        wait += s.wait_pay;
                    }
                    if let Some(end) = &e.run_end {
                        for p in &end.wait_pay {
                            wait += p.amount;
                        }
                    }
                }
                EventPayload::RetrainDone(_) => {}
            }
        }
        CostLedger {
            wait_cost: wait,
            work_cost: work,
            recruitment_cost: recruitment,
            total_cost: wait + work + recruitment,
        }
    }

    /// Sum every individual pay amount in the stream, accumulated per
    /// category in stream order (the ledger's own fold order); used to check
    /// ledger conservation against independently parsed events.
    pub fn pay_event_total(events: &[LoggedEvent]) -> f64 {
        let refolded = Self::from_events(events);
        refolded.wait_cost + refolded.work_cost + refolded.recruitment_cost
    }
}

/// The latency/cost objective: `1 / (beta * l + (1 - beta) * c)`.
///
/// Smaller weighted denominators are better, so the score grows as runs get
/// faster and cheaper. `beta` encodes the seconds-per-dollar exchange rate.
pub fn objective(latency_s: f64, cost: f64, beta: f64) -> crate::Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(crate::Error::invalid("beta", "must be in [0, 1]"));
    }
    let denominator = beta * latency_s + (1.0 - beta) * cost;
    if denominator == 0.0 {
        return Err(crate::Error::ZeroObjective);
    }
    Ok(1.0 / denominator)
}
