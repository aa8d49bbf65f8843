//! Task encoder: demonstration recording → validated task-model program.

mod pipeline;
mod recording;
pub mod synth;

pub use pipeline::{
    assign_span, default_purpose, draft_program, encode, recording_pauses, segment_demonstration, EncoderConfig,
    Encoding, Segment,
};
pub use recording::{
    parse_recording, serialize_recording, DemonstrationRecording, InstructionEvent, RecordedFrame, RecordingMetadata,
    RECORDING_VERSION,
};
