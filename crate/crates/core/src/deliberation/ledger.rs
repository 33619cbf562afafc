use serde::{Deserialize, Serialize};

use crate::backend::Usage;

/// Usage of one backend call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub role: String,
    pub request: String,
    pub round: u32,
    pub attempt: u32,
    pub usage: Usage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
    pub wall_ms: u64,
}

impl UsageTotals {
    fn add(&mut self, u: &Usage) {
        self.calls += 1;
        self.prompt_tokens += u.prompt_tokens;
        self.completion_tokens += u.completion_tokens;
        self.total_tokens += u.total_tokens();
        self.wall_ms += u.wall_ms;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub case_id: String,
    pub records: Vec<UsageRecord>,
    pub totals: UsageTotals,
}

impl UsageLedger {
    pub fn new(case_id: impl Into<String>) -> Self {
        Self {
            case_id: case_id.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, record: UsageRecord) {
        self.totals.add(&record.usage);
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = UsageRecord>) {
        for r in records {
            self.push(r);
        }
    }

    /// Totals recomputed from the records.
    pub fn recomputed_totals(&self) -> UsageTotals {
        let mut t = UsageTotals::default();
        for r in &self.records {
            t.add(&r.usage);
        }
        t
    }

    pub fn is_consistent(&self) -> bool {
        self.recomputed_totals() == self.totals
    }
}
