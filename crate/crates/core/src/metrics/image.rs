use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_STRIDE: usize = 4;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Reported when the images are (numerically) identical.
pub const PSNR_CAP_DB: f64 = 100.0;

fn same_size(a: &RasterImage, b: &RasterImage) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Shape {
            expected: (a.width(), a.height()),
            got: (b.width(), b.height()),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio for unit-range channels, in dB.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    same_size(a, b)?;
    let n = a.data().len() as f64;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let mse = sse / n;
    if mse < 1e-10 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(-10.0 * mse.log10())
}

/// Mean SSIM over `8 × 8` luma windows at stride 4 with uniform weights.
pub fn ssim(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    same_size(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "image {w}x{h} is smaller than one {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let (la, lb) = (a.luma(), b.luma());
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in (0..=h - SSIM_WINDOW).step_by(SSIM_STRIDE) {
        for x0 in (0..=w - SSIM_WINDOW).step_by(SSIM_STRIDE) {
            let (mut sa, mut sb) = (0.0, 0.0);
            for y in y0..y0 + SSIM_WINDOW {
                for x in x0..x0 + SSIM_WINDOW {
                    sa += la[y * w + x];
                    sb += lb[y * w + x];
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in y0..y0 + SSIM_WINDOW {
                for x in x0..x0 + SSIM_WINDOW {
                    let (da, db) = (la[y * w + x] - ma, lb[y * w + x] - mb);
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            let (va, vb, cov) = (va / n, vb / n, cov / n);
            total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psnr_closed_forms() {
        let white = RasterImage::filled(16, 16, [1.0; 3]);
        let black = RasterImage::filled(16, 16, [0.0; 3]);
        assert_eq!(psnr(&white, &white).unwrap(), 100.0);
        assert_eq!(psnr(&white, &black).unwrap(), 0.0);
        // One pixel in 25 differs by 0.5 on every channel: MSE = 0.25 / 25 = 0.01.
        let a = RasterImage::filled(5, 5, [0.5; 3]);
        let b = RasterImage::from_fn(5, 5, |x, y| if (x, y) == (2, 3) { [1.0; 3] } else { [0.5; 3] });
        assert_eq!(psnr(&a, &b).unwrap(), 20.0);
        assert!(psnr(&a, &RasterImage::filled(4, 5, [0.0; 3])).is_err());
    }

    #[test]
    fn ssim_closed_forms() {
        let zero = RasterImage::filled(16, 12, [0.0; 3]);
        let one = RasterImage::filled(16, 12, [1.0; 3]);
        assert_eq!(ssim(&one, &one).unwrap(), 1.0);
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((ssim(&zero, &one).unwrap() - expected).abs() < 1e-12);
        assert!(ssim(&RasterImage::filled(7, 20, [0.0; 3]), &RasterImage::filled(7, 20, [0.0; 3])).is_err());
    }

    proptest! {
        #[test]
        fn ssim_symmetric_and_bounded(seed_a in 0u64..1000, seed_b in 0u64..1000) {
            let img = |s: u64| RasterImage::from_fn(12, 12, move |x, y| {
                let v = ((x as u64 * 31 + y as u64 * 17 + s * 7) % 11) as f64 / 10.0;
                [v, 1.0 - v, v * 0.5]
            });
            let (a, b) = (img(seed_a), img(seed_b));
            let ab = ssim(&a, &b).unwrap();
            prop_assert!((ab - ssim(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
            prop_assert!(psnr(&a, &b).unwrap() >= 0.0);
        }
    }
}
