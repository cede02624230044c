//! Synthetic shot-gather generation and dataset handling.

mod dataset;
mod gather;

pub use dataset::{
    class_counts, derive_seed, generate_dataset, image_path, plan_labels, read_manifest, reference_proportions,
    sample_gather, split_train_test, write_manifest, ManifestEntry, DEFAULT_TEST_FRACTION, IMAGE_DIR, MANIFEST_FILE,
    NSR_RANGES, REFERENCE_COUNTS, TEST_FILE, TRAIN_FILE,
};
pub use gather::{
    assign_label, ricker, synthesize_gather, Cavitation, GatherParams, Interference, LabeledGather, NoiseRecipe,
    PressureVariation, ReflectorEvent, Swell, Tugging, BAD_MAX_NSR, GATHER_SIDE, GOOD_MAX_NSR,
};
