//! Low-level image primitives shared by the pipeline stages.

mod color;
mod contour;
mod edge;
mod flow;
mod morph;
mod skin;

pub use color::{hsv_pixel, rgb_to_hsv, to_gray, GrayImage, Hsv};
pub use contour::{find_contours, label_components, Contour};
pub use edge::{edge_map, edge_map_region, edge_map_with, EdgeOperator, GradientMagnitude};
pub use flow::{dense_flow, BlockMatching, FlowBackend, FlowField};
pub use morph::{dilate, erode, morph_close, BinaryMask};
pub use skin::{
    back_project, back_project_region, probability_map, skin_index, threshold_relative, SkinModel,
    NEGLIGIBLE_PROBABILITY, SKIN_TABLE_LEN,
};
