//! Survey-table ingestion and design-matrix construction: typed loading,
//! baseline-referenced dummy coding with level merges, derived variables,
//! standardization, and interaction expansion.

mod dataset;
mod encode;
mod spec;
pub mod synthetic;
mod table;

pub use dataset::{
    ColumnKind, ColumnMeta, Dataset, DatasetMeta, Interaction, Role, Standardization,
    DATASET_META_VERSION,
};
pub use encode::encode;
pub use spec::{
    EncodingSpec, MissingPolicy, OutcomeRule, RuleKind, Transform, VariableRule,
    ENCODING_SPEC_VERSION,
};
pub use table::{load_table, Cell, RawTable, TableFormat};
