//! Object shape models, plane segmentation, contact webs and closure
//! selection.

mod fit;
mod plane;
mod superquadric;
mod web;

pub use fit::{fit_superquadric, SuperquadricFit, MIN_FIT_POINTS};
pub use plane::{ransac_plane, PlaneFit, MIN_INLIER_RATIO};
pub use superquadric::{
    implicit_value, random_view, sample_cloud, view_direction, RandomizationRanges, SuperquadricParams,
    MIN_RANDOM_EXPONENT,
};
pub use web::{
    check_force_closure, closure_for_grasp_type, compute_contact_web, select_closure, AffordanceTable,
    ClosureType, ContactWeb, GripperSpec, WebContact,
};
