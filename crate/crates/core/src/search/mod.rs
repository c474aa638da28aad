//! Design-space search: merge table, region allocation, segment search,
//! baseline schedulers, and the exhaustive oracle.

pub mod allocate;
pub mod baseline;
pub mod cmt;
pub mod count;
pub mod divide;
pub mod exhaustive;
pub mod segment;

pub use allocate::proportional_allocate;
pub use baseline::{schedule_baseline, schedule_scope, Method, SearchResult};
pub use cmt::{compute_parallelism, gen_cmt, Cmt};
pub use count::design_space_size;
pub use divide::{divide_segments, SegmentSpan};
pub use exhaustive::{exhaustive_search, ExhaustiveResult};
pub use segment::{search_segment, ClusterMode, SegmentProblem, SegmentSearch, TraceEntry};
