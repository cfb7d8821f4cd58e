//! Residual 1-D CNN feature extractor, single-branch model and the
//! three-branch teacher with linear feature fusion.

mod config;
mod extractor;
mod models;

pub use config::{BlockSpec, Res1dCnnConfig, ShortcutKind, StemSpec, CONV_WEIGHT_LAYERS};
pub use extractor::{zero_pad_shortcut, BlockTrace, ExtractorTrace, FeatureExtractor, FeatureMap, ResBlock, Shortcut};
pub use models::{
    argmax_class, build_res1dcnn, build_teacher, classify, fuse_features, FusionWeights, StudentModel, TeacherModel,
    TeacherTrace, NUM_CLASSES,
};
