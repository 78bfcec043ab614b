//! Frame data model, ingestion, the echogenicity template and the phantom generator.

mod frame;
pub mod io;
pub mod phantom;
mod template;

pub use frame::{BinaryMask, GrayFrame, VideoSequence, MIN_HEIGHT, MIN_WIDTH};
pub use io::{load_sequence, write_sequence, SequenceMeta};
pub use phantom::{generate_phantom, FrameTruth, PhantomSpec, PhantomTruth};
pub use template::{cell_of, cell_span, make_template, GRID_COLS, GRID_ROWS, WHITE_CELLS};
