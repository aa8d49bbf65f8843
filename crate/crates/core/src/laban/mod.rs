//! Posture notation: digitizing limb directions at stop keyframes, and
//! decoding scores back into joint targets for bodies of any size.

mod direction;
mod pause;
mod score;

pub use direction::{
    canonical_direction, digitize_direction, LabanDirection, AZIMUTH_NAMES, AZIMUTH_TOKENS, PLACE_TOKEN,
    ZENITH_TOKENS,
};
pub use pause::{
    activity_from_frames, butterworth_lowpass, detect_pause_indices, detect_pauses, filtfilt,
    filtfilt_padlen, luma, remove_outliers, smooth_activity, ActivitySignal, GrayFrame, PauseConfig,
    BOX_WINDOW,
};
#[allow(unused_imports)]
pub(crate) use pause::median;
pub use score::{
    column_def, decode_score, default_column_names, encode_skeleton, frame_at, interpolate_keyframes,
    parse_score, posture_row, serialize_score, ColumnDef, Keyframe, LabanRow, LabanScore, LabanSymbol,
    LimbLengths, SkeletonFrame, DEFAULT_COLUMNS,
};
