//! Experiment drivers: the masking case study, the mask comparison, parse
//! evaluation, relation analysis and the proposition sweep. Every run is a
//! pure function of its config and seed list.

mod claims;
mod config;
mod output;
mod runs;
mod table;

pub use claims::{
    case_study_claims, claims, mask_compare_claims, parse_eval_claims, relations_claims,
    verify_props_claims, Claim,
};
pub use config::{
    CaseStudyConfig, Experiment, ExperimentConfig, MaskCompareConfig, MaskTask, ModelConfig, ParseEvalConfig,
    RelationsConfig, VerifyConfig,
};
pub use output::{emit_outputs, render_svg};
pub use runs::{
    heldout_pseudo_loss, prop_sweep, run, run_case_study, run_mask_compare, run_parse_eval, run_relations,
    run_verify_props, topic_lexicon, write_prop_csv, RelationsOutput, RunOutput,
};
pub use table::{spearman, AggregateRow, ResultRow, ResultTable};
