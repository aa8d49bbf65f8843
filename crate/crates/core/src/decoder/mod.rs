//! Decoder: runs task-model programs on a simulated robot.
//!
//! A program is executed frame by frame. Each frame binds one skill from the
//! [`SkillLibrary`]; the skill's controller moves the hand, role-division IK
//! turns the hand pose into joint values under the frame's Laban posture,
//! and the quasi-static world model reports the thresholded drag force that
//! ends contact-making skills.

pub mod exec;
pub mod ik;
pub mod localize;
pub mod robot;
pub mod skill;
pub mod trace;
pub mod world;

pub use exec::{run_program, RunOutcome, Session, SimConfig};
pub use ik::{arm_symbols, solve_ik_role_division, ArmSymbols, IkOptions, IkSolution, PostureTarget};
pub use localize::{runtime_localize, Localization, ViewConfig};
pub use robot::{bundled_robot, bundled_robots, fixed6, mobile7, parse_robot, JointKind, JointRole, JointSpec, RobotSpec};
pub use skill::{Controller, Hints, Motion, Observation, Policy, ScriptedPolicy, Skill, SkillLibrary, Termination};
pub use trace::{
    verify_postconditions, ExecutionTrace, FrameCheck, FrameStatus, SnapshotPhase, StepRecord, TerminationEvent,
    TerminationReason, TraceRecord, VerificationReport,
};
pub use world::{
    bundled_worlds, contact_class, parse_world, serialize_world, Attachment, Grip, Shape, Support, WorldObject,
    WorldSnapshot, WorldState,
};

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// JSON parse with path-precise schema errors.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Parse { line: inner.line(), message: inner.to_string() }
        } else {
            Error::Schema { path, message: inner.to_string() }
        }
    })
}
