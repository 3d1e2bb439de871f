use thiserror::Error;

use crate::ast::{Formula, Program};

/// The problem solved in place of the original: the loop is entered with
/// `pre ∧ cond`, and `pre ∧ ¬cond ⟹ post` must be discharged separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrengthenedProblem {
    pub original: Program,
    pub strengthened: Program,
    pub side_condition: Formula,
}

impl StrengthenedProblem {
    pub fn strengthened_pre(&self) -> &Formula {
        &self.strengthened.pre
    }

    /// `pre ∧ ¬cond`, the disjunct added back on reconstruction.
    pub fn exit_disjunct(&self) -> Formula {
        Formula::and_all([self.original.pre.clone(), Formula::not(self.original.loop_cond.clone())])
    }
}

/// Solver outcomes required before reconstructing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Discharge {
    pub side_condition_valid: bool,
    pub invariant_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconstructError {
    #[error("side condition has not been verified")]
    SideConditionUnverified,
    #[error("invariant of the strengthened problem has not been verified")]
    InvariantUnverified,
}

pub fn side_condition(p: &Program) -> Formula {
    Formula::implies(
        Formula::and_all([p.pre.clone(), Formula::not(p.loop_cond.clone())]),
        p.post.clone(),
    )
}

pub fn strengthen(p: &Program) -> StrengthenedProblem {
    let mut strengthened = p.clone();
    strengthened.pre = Formula::and_all([p.pre.clone(), p.loop_cond.clone()]);
    StrengthenedProblem { original: p.clone(), strengthened, side_condition: side_condition(p) }
}

/// `inv ∨ (pre ∧ ¬cond)`, an invariant of the original loop.
pub fn reconstruct(inv: &Formula, sp: &StrengthenedProblem, proof: Discharge) -> Result<Formula, ReconstructError> {
    if !proof.side_condition_valid {
        return Err(ReconstructError::SideConditionUnverified);
    }
    if !proof.invariant_valid {
        return Err(ReconstructError::InvariantUnverified);
    }
    Ok(Formula::or_all([inv.clone(), sp.exit_disjunct()]))
}
