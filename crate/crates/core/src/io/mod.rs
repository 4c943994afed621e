//! File formats: MOT-style CSV, binary embedding sidecars, PPM images and
//! sequence directories.

mod embeddings;
mod image;
mod mot;
mod sequence;

pub use embeddings::{read_embeddings, write_embeddings, EMBEDDING_MAGIC};
pub use image::{read_image, write_ppm};
pub use mot::{group_by_frame, read_detections, read_mot, write_results, MotRecord};
pub use sequence::{
    load_detections, subsample, SequenceDir, SequenceMeta, SubsampleSchedule,
};
