//! Place recognition for 2D point-set maps using compact part-based
//! descriptors.
//!
//! A map is described by a handful of bounding boxes: regions of the map
//! ("parts") that look like some region of a shared dictionary map. Each part
//! packs into 42 bits, and two descriptors are compared by box overlap only.
//! The crate also carries a RANSAC direct matcher used as a baseline and as a
//! re-ranking stage, evaluation helpers and a synthetic benchmark generator.
//!
//! Everything geometric is generic over the scalar type; `f64` aliases are
//! exported for convenience.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod cpd;
pub mod descriptor;
pub mod descriptor_matcher;
pub mod direct_matcher;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod ingest;
pub mod ranking;
pub mod scalar;
pub mod synth;

pub use cpd::{discover_parts, CpdConfig, Dictionary, GcMode, Part};
pub use descriptor::{
    build_descriptor, pack_part, unpack_part, DecodeContext, MapDescriptor, PackedPart,
};
pub use descriptor_matcher::{
    aggregate_score, rank_hmm, rank_imm, region_similarity, rerank_cascade,
};
pub use direct_matcher::{ransac_match, DmmConfig, DmmResult};
pub use error::{Error, Result};
pub use geometry::{BBox, OccupancyGrid, Point2, PointSetMap, RigidTransform2, RotationMode};
pub use ranking::{MatchStrategy, RankEntry, RankResult};
pub use scalar::Real;

pub type Point2F64 = Point2<f64>;
pub type BBoxF64 = BBox<f64>;
pub type RigidTransform2F64 = RigidTransform2<f64>;
pub type PointSetMapF64 = PointSetMap<f64>;
pub type OccupancyGridF64 = OccupancyGrid<f64>;
pub type PartF64 = Part<f64>;
pub type MapDescriptorF64 = MapDescriptor<f64>;

pub type Point2F32 = Point2<f32>;
pub type BBoxF32 = BBox<f32>;
pub type PointSetMapF32 = PointSetMap<f32>;
pub type MapDescriptorF32 = MapDescriptor<f32>;
