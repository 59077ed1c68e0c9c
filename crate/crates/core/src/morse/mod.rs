//! Critical points of scalar fields and the C1/C2/C3 classification.
//!
//! The classes are decided on a compact search box: a field with no
//! critical point in the box is only reported as C1 when its gradient stays
//! visibly away from zero on a dense grid, otherwise the verdict is
//! `Inconclusive`.

mod fields;
mod search;
mod verify;

pub use fields::{named_field, FnScalarField, NetworkField, ScalarField, MORSE_FIELD_IDS};
pub use search::{
    classify_function, find_critical_points, BoxDomain, CriticalPoint, CriticalPointSearch, FunctionClass,
    FunctionClassReport, SearchParams,
};
pub use verify::{verify_classification_row, ArchSample, RowSummary, TableRow};
