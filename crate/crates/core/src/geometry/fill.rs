use geo::{BooleanOps, MultiPolygon, Polygon};

use super::{points_to_ring, ring_to_points, JordanDisk};
use crate::error::{DynError, Result};

fn to_polygon(d: &JordanDisk) -> Polygon<f64> {
    Polygon::new(points_to_ring(d.boundary()), vec![])
}

/// Union of `core` with the attachments, with every bounded complementary
/// component absorbed. The basepoint of `core` is kept.
pub fn fill_union(core: &JordanDisk, attachments: &[JordanDisk]) -> Result<JordanDisk> {
    if attachments.is_empty() {
        return Ok(core.clone());
    }
    let mut acc = MultiPolygon::new(vec![to_polygon(core)]);
    for a in attachments {
        acc = acc.union(&MultiPolygon::new(vec![to_polygon(a)]));
    }
    if acc.0.len() != 1 {
        return Err(DynError::Disconnected {
            components: acc.0.len(),
        });
    }
    // dropping the interior rings is the filling step
    let outer = ring_to_points(acc.0[0].exterior());
    JordanDisk::from_polyline(outer, core.basepoint())
}
