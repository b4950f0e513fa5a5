//! Deterministic flat-color rasterization of layouts.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layout::Layout;

/// Row-major RGB image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Luma as the plain channel mean.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect()
    }

    /// 8-bit channels via `round(255·v)`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
            .collect()
    }

    /// Binary PPM (P6).
    pub fn write_ppm(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.to_rgb8())
    }

    pub fn save_ppm(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_ppm(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .ok_or_else(|| Error::Image("buffer size mismatch".into()))?;
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))
    }
}

/// Paints visible components as filled rectangles in list order over a white canvas.
/// A pixel is covered when its center lies in `[left, right) × [top, bottom)`.
pub fn rasterize(layout: &Layout) -> RasterImage {
    let (w, h) = (layout.canvas.0 as usize, layout.canvas.1 as usize);
    let mut img = RasterImage::filled(w, h, [1.0; 3]);
    for c in layout.visible() {
        let (l, r, t, b) = (c.left(), c.right(), c.top(), c.bottom());
        for py in 0..h {
            let v = (py as f64 + 0.5) / h as f64;
            if v < t || v >= b {
                continue;
            }
            for px in 0..w {
                let u = (px as f64 + 0.5) / w as f64;
                if u >= l && u < r {
                    let i = (py * w + px) * 3;
                    img.data[i..i + 3].copy_from_slice(&c.color);
                }
            }
        }
    }
    img
}
