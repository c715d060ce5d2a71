//! COCO-style run-length encoding.
//!
//! Runs are taken over the column-major flattening of an `h × w` mask and
//! alternate background/foreground, starting with background. The compressed
//! string form is the LEB128-like encoding with stride-2 differencing used by
//! the reference `maskApi.c`.

use crate::error::{Error, Result};
use crate::mask::BitMask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rle {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
}

impl Rle {
    pub fn encode(mask: &BitMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for x in 0..w {
            for y in 0..h {
                let v = mask.get(x, y);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self {
            height: h,
            width: w,
            counts,
        }
    }

    pub fn decode(&self) -> Result<BitMask> {
        let n = self.height * self.width;
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total != n as u64 {
            return Err(Error::Geometry(format!(
                "RLE counts sum to {total}, expected {n} for {}x{}",
                self.height, self.width
            )));
        }
        let mut mask = BitMask::empty(self.width, self.height)?;
        let mut pos = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            let c = c as usize;
            if i % 2 == 1 {
                for p in pos..pos + c {
                    mask.set(p / self.height, p % self.height, true);
                }
            }
            pos += c;
        }
        Ok(mask)
    }

    pub fn to_compressed(&self) -> String {
        let mut s = String::new();
        for (i, &cnt) in self.counts.iter().enumerate() {
            let mut x = cnt as i64;
            if i > 2 {
                x -= self.counts[i - 2] as i64;
            }
            loop {
                let mut c = (x & 0x1f) as u8;
                x >>= 5;
                let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                s.push((c + 48) as char);
                if !more {
                    break;
                }
            }
        }
        s
    }

    pub fn from_compressed(s: &str, height: usize, width: usize) -> Result<Self> {
        let bytes = s.as_bytes();
        let mut counts: Vec<u32> = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let mut x: i64 = 0;
            let mut shift = 0;
            let mut more = true;
            while more {
                let b = *bytes
                    .get(i)
                    .ok_or_else(|| Error::Geometry("truncated RLE string".into()))?;
                if !(48..48 + 64).contains(&b) || shift > 55 {
                    return Err(Error::Geometry(format!("invalid RLE byte {b:#x}")));
                }
                let c = (b - 48) as i64;
                i += 1;
                x |= (c & 0x1f) << shift;
                more = c & 0x20 != 0;
                shift += 5;
                if !more && c & 0x10 != 0 {
                    x |= -1i64 << shift;
                }
            }
            if counts.len() > 2 {
                x += counts[counts.len() - 2] as i64;
            }
            let c = u32::try_from(x).map_err(|_| Error::Geometry(format!("RLE run {x} out of range")))?;
            counts.push(c);
        }
        Ok(Self { height, width, counts })
    }
}
