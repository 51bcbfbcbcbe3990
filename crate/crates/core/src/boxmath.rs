//! Axis-aligned box algebra in pixel space.
//!
//! Boxes are stored in corner form (`x_min, y_min, x_max, y_max`) with the
//! origin at the top-left, x to the right and y down. Center encodings only
//! appear at format boundaries, see [`NormBox`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("box coordinates must be finite")]
    NonFinite,
    #[error("inverted box: min ({min}) exceeds max ({max})")]
    Inverted { min: f64, max: f64 },
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("normalized field {field} = {value} is out of range")]
    NormOutOfRange { field: &'static str, value: f64 },
    #[error("box {0} lies outside the image bounds")]
    OutsideImage(Box2D),
    #[error("box {0} has zero width or height")]
    Degenerate(Box2D),
}

/// Pixel-space rectangle in corner form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Box2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Box2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, BoxError> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.check()?;
        Ok(b)
    }

    /// Builds a box from top-left corner plus width and height.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn check(&self) -> Result<(), BoxError> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if self.x_min > self.x_max {
            return Err(BoxError::Inverted {
                min: self.x_min,
                max: self.x_max,
            });
        }
        if self.y_min > self.y_max {
            return Err(BoxError::Inverted {
                min: self.y_min,
                max: self.y_max,
            });
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_ok()
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        area(self)
    }

    pub fn is_degenerate(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    /// `[x, y, width, height]`, the COCO encoding.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self {
            x_min: self.x_min * sx,
            y_min: self.y_min * sy,
            x_max: self.x_max * sx,
            y_max: self.y_max * sy,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Overlap region, `None` when the boxes do not touch.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min <= x_max && y_min <= y_max).then_some(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// True when the box lies inside `[0,width]x[0,height]`, allowing `slack`
    /// pixels of floating-point drift on each edge.
    pub fn within(&self, dims: ImageDims, slack: f64) -> bool {
        self.x_min >= -slack
            && self.y_min >= -slack
            && self.x_max <= dims.width as f64 + slack
            && self.y_max <= dims.height as f64 + slack
    }
}

impl TryFrom<[f64; 4]> for Box2D {
    type Error = BoxError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<Box2D> for [f64; 4] {
    fn from(b: Box2D) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl fmt::Display for Box2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.x_min, self.y_min, self.x_max, self.y_max
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawDims {
    width: u32,
    height: u32,
}

impl TryFrom<RawDims> for ImageDims {
    type Error = BoxError;

    fn try_from(raw: RawDims) -> Result<Self, Self::Error> {
        Self::new(raw.width, raw.height)
    }
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, BoxError> {
        if width == 0 || height == 0 {
            return Err(BoxError::EmptyImage { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn full_box(&self) -> Box2D {
        Box2D {
            x_min: 0.0,
            y_min: 0.0,
            x_max: self.width as f64,
            y_max: self.height as f64,
        }
    }
}

impl fmt::Display for ImageDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Darknet-style box: center and size as fractions of the image dims.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        for (field, value) in [("cx", cx), ("cy", cy)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(BoxError::NormOutOfRange { field, value });
            }
        }
        for (field, value) in [("w", w), ("h", h)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(BoxError::NormOutOfRange { field, value });
            }
        }
        Ok(Self { cx, cy, w, h })
    }
}

pub fn area(b: &Box2D) -> f64 {
    (b.x_max - b.x_min).max(0.0) * (b.y_max - b.y_min).max(0.0)
}

/// Intersection over union. Two boxes with a zero-area union score 0.
pub fn iou(a: &Box2D, b: &Box2D) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |i| area(&i));
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Decodes a normalized box. The result is not clipped.
pub fn norm_to_pixel(n: &NormBox, d: ImageDims) -> Box2D {
    let (w, h) = (d.width as f64, d.height as f64);
    Box2D {
        x_min: (n.cx - n.w / 2.0) * w,
        y_min: (n.cy - n.h / 2.0) * h,
        x_max: (n.cx + n.w / 2.0) * w,
        y_max: (n.cy + n.h / 2.0) * h,
    }
}

/// Slack, in pixels, tolerated when checking that a box sits inside an image.
pub const BOUNDS_SLACK: f64 = 1e-6;

pub fn pixel_to_norm(b: &Box2D, d: ImageDims) -> Result<NormBox, BoxError> {
    b.check()?;
    if !b.within(d, BOUNDS_SLACK) {
        return Err(BoxError::OutsideImage(*b));
    }
    if b.is_degenerate() {
        return Err(BoxError::Degenerate(*b));
    }
    let (w, h) = (d.width as f64, d.height as f64);
    let cx = ((b.x_min + b.x_max) / 2.0 / w).clamp(0.0, 1.0);
    let cy = ((b.y_min + b.y_max) / 2.0 / h).clamp(0.0, 1.0);
    let nw = (b.width() / w).min(1.0);
    let nh = (b.height() / h).min(1.0);
    NormBox::new(cx, cy, nw, nh)
}

/// Maps a box through a non-uniform resize, scaling x and y independently.
pub fn remap_resize(b: &Box2D, from: ImageDims, to: ImageDims) -> Box2D {
    if from == to {
        return *b;
    }
    // Multiply before dividing so that exact ratios stay exact.
    let (fw, fh) = (from.width as f64, from.height as f64);
    let (tw, th) = (to.width as f64, to.height as f64);
    Box2D {
        x_min: b.x_min * tw / fw,
        y_min: b.y_min * th / fh,
        x_max: b.x_max * tw / fw,
        y_max: b.y_max * th / fh,
    }
}

/// Intersects the box with the image rectangle. May return a degenerate box.
pub fn clip_to_image(b: &Box2D, d: ImageDims) -> Box2D {
    let (w, h) = (d.width as f64, d.height as f64);
    Box2D {
        x_min: b.x_min.clamp(0.0, w),
        y_min: b.y_min.clamp(0.0, h),
        x_max: b.x_max.clamp(0.0, w),
        y_max: b.y_max.clamp(0.0, h),
    }
}
