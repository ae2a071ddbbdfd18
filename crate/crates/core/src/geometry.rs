//! Axis-aligned box geometry.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box extents must be non-negative and finite, got w={w} h={h}")]
    InvalidExtent { w: f64, h: f64 },
    #[error("box origin must be finite")]
    NonFiniteOrigin,
}

/// Box in continuous pixel coordinates, `(x, y)` being the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(GeometryError::NonFiniteOrigin);
        }
        if !(w.is_finite() && h.is_finite()) || w < 0.0 || h < 0.0 {
            return Err(GeometryError::InvalidExtent { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }

    /// Fraction of `self` covered by `other`; 0 for a zero-area `self`.
    pub fn covered_fraction(&self, other: &BoundingBox) -> f64 {
        let a = self.area();
        if a <= 0.0 {
            0.0
        } else {
            (self.intersection_area(other) / a).min(1.0)
        }
    }

    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }
}

/// Intersection over union. Zero when the union has no area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Intersect `b` with the frame rectangle `[0, frame_w] x [0, frame_h]`.
///
/// A box entirely outside the frame collapses to a zero-area box at the
/// nearest frame corner or edge point.
pub fn clip_box(b: &BoundingBox, frame_w: f64, frame_h: f64) -> BoundingBox {
    let x0 = b.x.clamp(0.0, frame_w);
    let y0 = b.y.clamp(0.0, frame_h);
    let x1 = b.right().clamp(0.0, frame_w);
    let y1 = b.bottom().clamp(0.0, frame_h);
    BoundingBox {
        x: x0,
        y: y0,
        w: (x1 - x0).max(0.0),
        h: (y1 - y0).max(0.0),
    }
}
