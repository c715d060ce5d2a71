//! Packed binary masks, boxes and the overlap measures used by slot matching.
//!
//! Coordinates are zero-based and pixel-centred: pixel `(x, y)` has its
//! centre at `(x, y)`. Boxes are half-open, `[x1, x2) × [y1, y2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Row-major binary occupancy grid, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

impl BitMask {
    /// An all-zero mask.
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        Ok(Self {
            width,
            height,
            words: vec![0; n.div_ceil(WORD)],
        })
    }

    /// Builds a mask from a list of occupied `(x, y)` pixels.
    pub fn from_pixels(width: usize, height: usize, pixels: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::empty(width, height)?;
        for (x, y) in pixels {
            if x >= width || y >= height {
                return Err(Error::Geometry(format!(
                    "pixel ({x}, {y}) outside {width}x{height} mask"
                )));
            }
            m.set(x, y, true);
        }
        Ok(m)
    }

    /// Builds a mask from a row-major byte buffer; any non-zero byte is foreground.
    pub fn from_row_major(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Geometry(format!(
                "buffer of {} bytes does not match {width}x{height}",
                data.len()
            )));
        }
        let mut m = Self::empty(width, height)?;
        for (i, &v) in data.iter().enumerate() {
            if v != 0 {
                m.words[i / WORD] |= 1 << (i % WORD);
            }
        }
        Ok(m)
    }

    /// Fills the half-open rectangle `[x1, x2) × [y1, y2)`, clipped to the mask.
    pub fn from_rect(width: usize, height: usize, x1: usize, y1: usize, x2: usize, y2: usize) -> Result<Self> {
        let mut m = Self::empty(width, height)?;
        for y in y1..y2.min(height) {
            for x in x1..x2.min(width) {
                m.set(x, y, true);
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * self.width + x;
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let i = y * self.width + x;
        if value {
            self.words[i / WORD] |= 1 << (i % WORD);
        } else {
            self.words[i / WORD] &= !(1 << (i % WORD));
        }
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Iterates over occupied pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * WORD + b;
                Some((i % width, i / width))
            })
        })
    }

    /// Row-major byte buffer, one byte per pixel.
    pub fn to_row_major(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len()];
        for (x, y) in self.pixels() {
            out[y * self.width + x] = 1;
        }
        out
    }

    /// Tight bounding box of the foreground, or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<BBox> {
        let mut it = self.pixels();
        let (x0, y0) = it.next()?;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (x0, x0, y0, y0);
        for (x, y) in it {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        Some(BBox {
            x1: xmin as f64,
            y1: ymin as f64,
            x2: (xmax + 1) as f64,
            y2: (ymax + 1) as f64,
        })
    }

    fn check_same_shape(&self, other: &BitMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Geometry(format!(
                "mask dimension mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    fn intersection_area(&self, other: &BitMask) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum()
    }
}

/// Axis-aligned half-open box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = Self { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite());
        if !finite || self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(Error::Geometry(format!(
                "degenerate box [{}, {}, {}, {}]",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Intersection over union of two masks; 0 when both are empty.
pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    a.check_same_shape(b)?;
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Intersection over the smaller of the two areas.
pub fn mask_overlap_min(a: &BitMask, b: &BitMask) -> Result<f64> {
    a.check_same_shape(b)?;
    let (aa, ab) = (a.area(), b.area());
    if aa == 0 || ab == 0 {
        return Err(Error::Geometry("overlap of an empty mask".into()));
    }
    Ok(a.intersection_area(b) as f64 / aa.min(ab) as f64)
}

/// Mean coordinate of the occupied pixels.
pub fn centroid(m: &BitMask) -> Result<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in m.pixels() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Geometry("centroid of an empty mask".into()));
    }
    Ok((sx as f64 / n as f64, sy as f64 / n as f64))
}

/// Key for left-to-right ordering: centroid x, then centroid y, then box x1.
#[derive(Debug, Clone, Copy)]
pub struct LtrKey {
    pub cx: f64,
    pub cy: f64,
    pub x1: f64,
}

impl LtrKey {
    pub fn of(mask: &BitMask, bbox: &BBox) -> Result<Self> {
        let (cx, cy) = centroid(mask)?;
        Ok(Self { cx, cy, x1: bbox.x1 })
    }
}

impl Ord for LtrKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cx
            .total_cmp(&other.cx)
            .then(self.cy.total_cmp(&other.cy))
            .then(self.x1.total_cmp(&other.x1))
    }
}

impl PartialOrd for LtrKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for LtrKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for LtrKey {}
