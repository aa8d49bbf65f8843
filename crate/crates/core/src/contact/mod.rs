//! Contact-state analysis on the Gaussian sphere, task classification and
//! semantic constraints.

mod cone;
mod semantic;
mod task;

pub use cone::{
    classify_state, feasible_cone, feasible_cone_of, fibonacci_sphere, sample_feasible_oracle,
    sample_feasible_oracle_with_tol, ContactElement, ContactStateClass, FeasibleCone,
};
pub use semantic::{check_semantic_constraint, ConstraintReport, ConstraintTolerance, SemanticConstraint, TimedPose};
pub use task::{classify_transition, MotionKind, TaskEntry, TaskMatch, TaskRegistry, TaskType};
