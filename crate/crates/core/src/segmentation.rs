//! Threshold segmentation, object isolation and cropping.
//!
//! The candling images have a single bright object on a dark background, so
//! segmentation is a fixed-threshold binarization followed by keeping the
//! largest 4-connected component and cropping the original image to that
//! component's bounding box.

use thiserror::Error;

use crate::raster::{to_grayscale, GrayImage, RgbImage};

/// Default binarization threshold.
pub const DEFAULT_THRESHOLD: u8 = 125;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("no object found (mask has no set bits)")]
    NoObject,
    #[error("crop rectangle {rect:?} exceeds image bounds {width}x{height}")]
    RectOutOfBounds {
        rect: CropRect,
        width: u32,
        height: u32,
    },
}

/// Row-major boolean mask: 1 = object, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Inclusive rectangle in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub top: u32,
    pub left: u32,
    pub bottom: u32,
    pub right: u32,
}

impl CropRect {
    pub fn width(&self) -> u32 {
        self.right - self.left + 1
    }

    pub fn height(&self) -> u32 {
        self.bottom - self.top + 1
    }
}

/// Thresholds a grayscale image into a mask: a pixel is object iff its
/// value is `>= threshold` (the boundary value itself counts as object).
pub fn binarize(image: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: image.width(),
        height: image.height(),
        bits: image.pixels().iter().map(|&p| p >= threshold).collect(),
    }
}

/// Keeps only the largest 4-connected component of set bits. Ties go to the
/// component whose bounding-box (top, left) is lexicographically smallest.
pub fn largest_component(mask: &BinaryMask) -> Result<BinaryMask, SegmentError> {
    let w = mask.width as usize;
    let h = mask.height as usize;
    let mut labels = vec![0u32; w * h];
    let mut next_label = 0u32;
    // Per-component (size, bbox_top, bbox_left).
    let mut stats: Vec<(usize, u32, u32)> = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next_label += 1;
        let label = next_label;
        let mut size = 0usize;
        let mut top = u32::MAX;
        let mut left = u32::MAX;
        stack.push(start);
        labels[start] = label;
        while let Some(idx) = stack.pop() {
            size += 1;
            let x = (idx % w) as u32;
            let y = (idx / w) as u32;
            top = top.min(y);
            left = left.min(x);
            let mut visit = |n: usize| {
                if mask.bits[n] && labels[n] == 0 {
                    labels[n] = label;
                    stack.push(n);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if (x as usize) < w - 1 {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - w);
            }
            if (y as usize) < h - 1 {
                visit(idx + w);
            }
        }
        stats.push((size, top, left));
    }

    if stats.is_empty() {
        return Err(SegmentError::NoObject);
    }

    let best = stats
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            // Larger size wins; on equal size the smaller (top, left) wins.
            a.0.cmp(&b.0).then_with(|| (b.1, b.2).cmp(&(a.1, a.2)))
        })
        .map(|(i, _)| i as u32 + 1)
        .expect("stats is non-empty");

    Ok(BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: labels.iter().map(|&l| l == best).collect(),
    })
}

/// Tightest rectangle containing every set bit.
pub fn bounding_box(mask: &BinaryMask) -> Result<CropRect, SegmentError> {
    let mut top = u32::MAX;
    let mut left = u32::MAX;
    let mut bottom = 0u32;
    let mut right = 0u32;
    let mut any = false;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                any = true;
                top = top.min(y);
                left = left.min(x);
                bottom = bottom.max(y);
                right = right.max(x);
            }
        }
    }
    if !any {
        return Err(SegmentError::NoObject);
    }
    Ok(CropRect {
        top,
        left,
        bottom,
        right,
    })
}

fn check_bounds(rect: &CropRect, width: u32, height: u32) -> Result<(), SegmentError> {
    if rect.top > rect.bottom || rect.left > rect.right || rect.bottom >= height || rect.right >= width
    {
        return Err(SegmentError::RectOutOfBounds {
            rect: *rect,
            width,
            height,
        });
    }
    Ok(())
}

/// Copies the rectangle out of an RGB image.
pub fn crop_rgb(image: &RgbImage, rect: &CropRect) -> Result<RgbImage, SegmentError> {
    check_bounds(rect, image.width(), image.height())?;
    let mut pixels = Vec::with_capacity(rect.width() as usize * rect.height() as usize * 3);
    for y in rect.top..=rect.bottom {
        let row = 3 * (y as usize * image.width() as usize + rect.left as usize);
        let len = 3 * rect.width() as usize;
        pixels.extend_from_slice(&image.pixels()[row..row + len]);
    }
    Ok(RgbImage::new(rect.width(), rect.height(), pixels).expect("rect bounds checked"))
}

/// Copies the rectangle out of a grayscale image.
pub fn crop_gray(image: &GrayImage, rect: &CropRect) -> Result<GrayImage, SegmentError> {
    check_bounds(rect, image.width(), image.height())?;
    let mut pixels = Vec::with_capacity(rect.width() as usize * rect.height() as usize);
    for y in rect.top..=rect.bottom {
        let row = y as usize * image.width() as usize + rect.left as usize;
        pixels.extend_from_slice(&image.pixels()[row..row + rect.width() as usize]);
    }
    Ok(GrayImage::new(rect.width(), rect.height(), pixels).expect("rect bounds checked"))
}

/// Full object-detection crop: grayscale, binarize, keep the largest
/// component, and cut its bounding box out of the RGB original.
pub fn segment_crop(image: &RgbImage, threshold: u8) -> Result<RgbImage, SegmentError> {
    let rect = detect_object(&to_grayscale(image), threshold)?;
    crop_rgb(image, &rect)
}

/// Grayscale variant of [`segment_crop`] for inputs that are already
/// single-channel.
pub fn segment_crop_gray(image: &GrayImage, threshold: u8) -> Result<GrayImage, SegmentError> {
    let rect = detect_object(image, threshold)?;
    crop_gray(image, &rect)
}

fn detect_object(gray: &GrayImage, threshold: u8) -> Result<CropRect, SegmentError> {
    let mask = binarize(gray, threshold);
    let object = largest_component(&mask)?;
    bounding_box(&object)
}
