use super::{Anchor, BoxOffsets, DetectorError};
use crate::dataset_io::Box3D;
use crate::wrap_angle;

pub fn encode_offsets(anchor: &Anchor, gt: &Box3D) -> Result<BoxOffsets, DetectorError> {
    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    if !(anchor.size.iter().all(positive) && positive(&anchor.height) && gt.dims.iter().all(positive)) {
        return Err(DetectorError::NonPositiveDims);
    }
    let diag = anchor.diagonal();
    Ok(BoxOffsets {
        dx: (gt.centroid[0] - anchor.center[0]) / diag,
        dy: (gt.centroid[1] - anchor.center[1]) / diag,
        dz: (gt.centroid[2] - anchor.z_center) / diag,
        dl: (gt.dims[0] / anchor.size[0]).ln(),
        dw: (gt.dims[1] / anchor.size[1]).ln(),
        dh: (gt.dims[2] / anchor.height).ln(),
        theta: gt.yaw,
    })
}

/// Inverse of [`encode_offsets`]; the class comes from the anchor.
pub fn decode_offsets(anchor: &Anchor, offsets: &BoxOffsets) -> Result<Box3D, DetectorError> {
    let positive = |v: &f64| v.is_finite() && *v > 0.0;
    if !(anchor.size.iter().all(positive) && positive(&anchor.height)) {
        return Err(DetectorError::NonPositiveDims);
    }
    let diag = anchor.diagonal();
    Ok(Box3D::new(
        anchor.class_label,
        [
            anchor.center[0] + offsets.dx * diag,
            anchor.center[1] + offsets.dy * diag,
            anchor.z_center + offsets.dz * diag,
        ],
        [
            anchor.size[0] * offsets.dl.exp(),
            anchor.size[1] * offsets.dw.exp(),
            anchor.height * offsets.dh.exp(),
        ],
        wrap_angle(offsets.theta),
    ))
}
