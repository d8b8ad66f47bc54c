//! Domain types shared by every stage and the on-disk dataset layout.
//!
//! ```text
//! sample_<id>/
//!   gt.png
//!   frames/frame_00.png ... frame_<N-1>.png
//!   frames/timestamps.txt    one integer microsecond value per line
//!   events.csv               header "t_us,x,y,p", p in {0,1}, sorted by t_us
//!   meta.json                n_frames, frame_interval_us, width, height, channels, seed
//! ```

mod events;
mod image;
mod sample;

pub use events::{Event, EventStream, Polarity, EVENTS_CSV_HEADER};
pub use image::{clamp01, quantize, Image};
pub use sample::{
    frame_file_name, list_sample_dirs, load_dataset, load_sample, sample_dir_name, save_sample,
    FrameSequence, Sample, SampleMeta, SAMPLE_DIR_PREFIX,
};
