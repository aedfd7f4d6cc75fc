use serde::{Deserialize, Serialize};

use super::{RatingError, Result};

/// Rating batches between maintenance modules once certified.
pub const MAINTENANCE_EVERY: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "number")]
pub enum TrainingModule {
    /// Initial modules 1 to 4.
    Initial(u8),
    Maintenance,
}

impl TrainingModule {
    pub fn item_count(self) -> usize {
        match self {
            TrainingModule::Initial(4) | TrainingModule::Maintenance => 50,
            TrainingModule::Initial(_) => 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleResult {
    pub module: TrainingModule,
    pub item_count: usize,
    pub binary_matches: usize,
    pub within_one_matches: usize,
    pub binary_agreement_pct: f64,
    pub within_one_pct: f64,
    pub passed: bool,
}

fn collapse(score: u8) -> bool {
    score >= 4
}

/// Scores a rater against the expert answer key. Both the correct/incorrect
/// collapse (1-3 vs 4-5) and the within-one-point criterion must reach 90%.
pub fn score_module(module: TrainingModule, rater: &[u8], expert: &[u8]) -> Result<ModuleResult> {
    if rater.len() != expert.len() {
        return Err(RatingError::LengthMismatch {
            rater: rater.len(),
            expert: expert.len(),
        });
    }
    if rater.is_empty() {
        return Err(RatingError::Invalid("module has no items".into()));
    }
    if let Some(s) = rater.iter().chain(expert).find(|s| !(1..=5).contains(*s)) {
        return Err(RatingError::Invalid(format!("score {s} outside 1..=5")));
    }
    let n = rater.len();
    let binary = rater
        .iter()
        .zip(expert)
        .filter(|(a, b)| collapse(**a) == collapse(**b))
        .count();
    let within = rater
        .iter()
        .zip(expert)
        .filter(|(a, b)| a.abs_diff(**b) <= 1)
        .count();
    // Integer comparison so that exactly 90% passes.
    let passed = binary * 10 >= n * 9 && within * 10 >= n * 9;
    Ok(ModuleResult {
        module,
        item_count: n,
        binary_matches: binary,
        within_one_matches: within,
        binary_agreement_pct: 100.0 * binary as f64 / n as f64,
        within_one_pct: 100.0 * within as f64 / n as f64,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "stage", content = "module")]
pub enum Stage {
    Training(u8),
    Certified,
}

/// Where a rater stands in the training protocol for one target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterProgress {
    pub stage: Stage,
    pub batches_completed: u32,
    pub maintenance_due: bool,
}

impl Default for RaterProgress {
    fn default() -> Self {
        Self {
            stage: Stage::Training(1),
            batches_completed: 0,
            maintenance_due: false,
        }
    }
}

impl RaterProgress {
    pub fn certified(&self) -> bool {
        self.stage == Stage::Certified
    }

    /// Module the rater must take next, if any.
    pub fn current_module(&self) -> Option<TrainingModule> {
        match self.stage {
            Stage::Training(k) => Some(TrainingModule::Initial(k)),
            Stage::Certified if self.maintenance_due => Some(TrainingModule::Maintenance),
            Stage::Certified => None,
        }
    }

    /// Certified and not blocked by a pending maintenance module.
    pub fn may_rate(&self) -> bool {
        self.certified() && !self.maintenance_due
    }
}

/// Applies a module result. A failed module is retaken; passing module 4
/// certifies; passing maintenance clears the flag. Results for a module
/// other than the current one leave the state unchanged.
pub fn advance_training(state: RaterProgress, result: &ModuleResult) -> RaterProgress {
    if state.current_module() != Some(result.module) || !result.passed {
        return state;
    }
    match state.stage {
        Stage::Training(k) if k >= 4 => RaterProgress {
            stage: Stage::Certified,
            ..state
        },
        Stage::Training(k) => RaterProgress {
            stage: Stage::Training(k + 1),
            ..state
        },
        Stage::Certified => RaterProgress {
            maintenance_due: false,
            ..state
        },
    }
}

/// Counts a finished rating batch; every twentieth one after certification
/// makes a maintenance module due.
pub fn record_batch_completed(state: RaterProgress) -> RaterProgress {
    let batches_completed = state.batches_completed + 1;
    let maintenance_due = state.maintenance_due
        || (state.certified() && batches_completed.is_multiple_of(MAINTENANCE_EVERY));
    RaterProgress {
        batches_completed,
        maintenance_due,
        ..state
    }
}
