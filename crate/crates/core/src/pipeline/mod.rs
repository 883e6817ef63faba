//! Dataset plumbing: RIR inventories and their partition, reverberant
//! evaluation sets, and the online augmentation stream.

pub mod augment;
pub mod eval;
pub mod inventory;
pub mod manifest;
pub mod partition;

pub use augment::{export_augmented_epoch, AugmentConfig, AugmentationStream, AugmentedItem};
pub use eval::{build_reverb_eval, EvalBuildConfig, MANIFEST_FILE};
pub use inventory::{wav_files, write_analysis_report, InventoryEntry, RirInventory};
pub use manifest::{Label, ManifestRow, TrialManifest, MANIFEST_HEADER};
pub use partition::{filter_and_partition, ExclusionReason, InventoryPartition, PartitionConfig};
