//! Directional domain knowledge: monotonicity constraints on choice
//! probabilities, the unlabeled pseudo pairs that probe them, the hinge
//! penalty on wrong-signed pair derivatives, and post-training audits.

mod audit;
mod constraints;
mod pseudo;
mod violation;

pub use audit::{audit_constraints, AuditEntry, AuditReport, AUDIT_TOLERANCE};
pub use constraints::{
    build_constraint_set, ConstraintEntry, ConstraintSet, Direction, MonotonicityConstraint,
};
pub use pseudo::{generate_pseudo_pairs, PseudoConfig, PseudoPair};
pub use violation::{
    knowledge_loss, pair_derivatives, violation_loss, violation_loss_value, KnowledgeTerm,
};
