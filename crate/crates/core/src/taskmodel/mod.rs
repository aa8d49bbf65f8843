//! Task models: frames with skill-parameter slots and their daemons, the
//! Grasp-Manipulation-Release grammar, the instruction lexicon and the program
//! file format.

mod daemons;
mod frame;
mod lexicon;
mod program;

pub use daemons::{
    angle_about, arc_through, run_daemons, track_at, SegmentData, TrackSample, MIN_PEAK_SPEED, ONSET_SPEED_RATIO, WINDOW_SAMPLES,
    WINDOW_SECONDS,
};
pub use frame::{
    daemons_for, instantiate_frame, required_slots, Daemon, Hand, ReviewMarker, SlotName, Slots, TaskFrame, Transition,
};
pub use lexicon::{match_instruction, InstructionMatch, Lexicon, LexiconEntry, OBJECT, WILDCARD};
pub use program::{
    grammar_violations, may_end_without_release, parse_program, serialize_program, to_canonical, validate_gmr,
    validate_program, violations_error, GMRProgram, Violation, PROGRAM_VERSION,
};
