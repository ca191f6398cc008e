use rayon::prelude::*;

use super::{BinaryImage, GrayImage};
use crate::error::ImageError;
use crate::geometry::{distort_pixel, CameraModel, PixelPoint};

/// Sobel derivatives and their magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    pub magnitude: Vec<f32>,
}

impl GradientField {
    #[inline]
    pub fn magnitude_at(&self, x: usize, y: usize) -> f32 {
        self.magnitude[y * self.width + x]
    }

    pub fn max_magnitude(&self) -> f32 {
        self.magnitude.iter().copied().fold(0.0, f32::max)
    }
}

/// 3x3 separable Gaussian with replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let side = (-1.0 / (2.0 * sigma * sigma)).exp();
    let norm = 1.0 + 2.0 * side;
    let k = [
        (side / norm) as f32,
        (1.0 / norm) as f32,
        (side / norm) as f32,
    ];
    let (w, h) = (img.width(), img.height());
    let mut tmp = vec![0f32; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let xi = x as isize;
            let yi = y as isize;
            *out = k[0] * img.get_clamped(xi - 1, yi)
                + k[1] * img.get_clamped(xi, yi)
                + k[2] * img.get_clamped(xi + 1, yi);
        }
    });
    let mut out = vec![0f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for (x, o) in row.iter_mut().enumerate() {
            *o = (k[0] * tmp[up * w + x] + k[1] * tmp[y * w + x] + k[2] * tmp[down * w + x])
                .clamp(0.0, 1.0);
        }
    });
    GrayImage::from_pixels(w, h, out).expect("blur keeps shape and range")
}

/// Sobel gradients with replicated-edge padding.
///
/// `gx` responds to intensity increasing to the right, `gy` downwards.
pub fn sobel(img: &GrayImage) -> Result<GradientField, ImageError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImageError::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    gx.par_chunks_mut(w)
        .zip(gy.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (rx, ry))| {
            let yi = y as isize;
            for x in 0..w {
                let xi = x as isize;
                let p = |dx: isize, dy: isize| img.get_clamped(xi + dx, yi + dy);
                let (a, b, c) = (p(-1, -1), p(0, -1), p(1, -1));
                let (d, f) = (p(-1, 0), p(1, 0));
                let (g, hh, i) = (p(-1, 1), p(0, 1), p(1, 1));
                rx[x] = (c + 2.0 * f + i) - (a + 2.0 * d + g);
                ry[x] = (g + 2.0 * hh + i) - (a + 2.0 * b + c);
            }
        });
    let magnitude = gx
        .par_iter()
        .zip(gy.par_iter())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
    })
}

/// Non-maximum suppression of `mask` along the gradient direction,
/// quantized to the four principal axes. A pixel survives if its magnitude
/// is at least that of both neighbours across the edge.
pub fn thin_edges(grad: &GradientField, mask: &BinaryImage) -> BinaryImage {
    let (w, h) = (grad.width as isize, grad.height as isize);
    let mag = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            grad.magnitude[(y * w + x) as usize]
        }
    };
    BinaryImage::from_fn(grad.width, grad.height, |x, y| {
        let i = y * grad.width + x;
        let m = grad.magnitude[i];
        if !mask.get(x, y) || m <= 0.0 {
            return false;
        }
        let a = (grad.gy[i] as f64)
            .atan2(grad.gx[i] as f64)
            .to_degrees()
            .rem_euclid(180.0);
        let (dx, dy) = if !(22.5..157.5).contains(&a) {
            (1, 0)
        } else if a < 67.5 {
            (1, 1)
        } else if a < 112.5 {
            (0, 1)
        } else {
            (-1, 1)
        };
        let (xi, yi) = (x as isize, y as isize);
        m >= mag(xi + dx, yi + dy) && m >= mag(xi - dx, yi - dy)
    })
}

/// Resamples a distorted image onto the ideal pinhole grid of `cam`.
pub fn undistort_image(img: &GrayImage, cam: &CameraModel) -> GrayImage {
    if !cam.has_distortion() {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let src = distort_pixel(PixelPoint::new(x as f64, y as f64), cam);
            *o = img.sample_bilinear(src.u, src.v);
        }
    });
    GrayImage::from_pixels(w, h, out).expect("resampling keeps shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct 3x3 correlation with clamped indices.
    fn naive_sobel(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
        let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let (w, h) = (img.width() as isize, img.height() as isize);
        let mut gx = Vec::new();
        let mut gy = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut sx = 0.0;
                let mut sy = 0.0;
                for j in 0..3 {
                    for i in 0..3 {
                        let xx = (x + i as isize - 1).clamp(0, w - 1) as usize;
                        let yy = (y + j as isize - 1).clamp(0, h - 1) as usize;
                        let v = img.get(xx, yy) as f64;
                        sx += kx[j][i] * v;
                        sy += ky[j][i] * v;
                    }
                }
                gx.push(sx);
                gy.push(sy);
            }
        }
        (gx, gy)
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = sobel(&GrayImage::filled(8, 6, 0.4)).unwrap();
        assert!(g.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn vertical_step_peaks_beside_the_step() {
        let img = GrayImage::from_fn(16, 10, |x, _| if x >= 8 { 1.0 } else { 0.0 });
        let g = sobel(&img).unwrap();
        for y in 1..9 {
            for x in 0..16 {
                let gx = g.gx[y * 16 + x];
                if x == 7 || x == 8 {
                    assert_eq!(gx, 4.0);
                } else {
                    assert_eq!(gx, 0.0);
                }
                assert_eq!(g.gy[y * 16 + x], 0.0);
            }
        }
    }

    #[test]
    fn matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = GrayImage::from_fn(16, 16, |_, _| rng.random::<f32>());
        let g = sobel(&img).unwrap();
        let (nx, ny) = naive_sobel(&img);
        for i in 0..256 {
            assert!((g.gx[i] as f64 - nx[i]).abs() < 1e-5);
            assert!((g.gy[i] as f64 - ny[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn ramp_gradient_is_eight_times_slope() {
        let slope = 0.01f32;
        let img = GrayImage::from_fn(20, 12, |x, _| x as f32 * slope);
        let g = sobel(&img).unwrap();
        for y in 1..11 {
            for x in 1..19 {
                assert!((g.gx[y * 20 + x] - 8.0 * slope).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn too_small_image_is_rejected() {
        assert!(matches!(
            sobel(&GrayImage::new(2, 5)),
            Err(ImageError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn thinning_keeps_one_ridge_per_step() {
        let img = GrayImage::from_fn(20, 10, |x, _| if x >= 10 { 1.0 } else { 0.0 });
        let grad = sobel(&gaussian_blur(&img, 0.8)).unwrap();
        let all = BinaryImage::from_fn(20, 10, |_, _| true);
        let thin = thin_edges(&grad, &all);
        for y in 0..10 {
            let row: Vec<usize> = (0..20).filter(|&x| thin.get(x, y)).collect();
            assert!(
                !row.is_empty() && row.len() <= 2 && row.iter().all(|&x| (9..=10).contains(&x)),
                "{row:?}"
            );
        }
    }

    #[test]
    fn blur_preserves_constant_images() {
        let img = GrayImage::filled(9, 9, 0.3);
        let b = gaussian_blur(&img, 0.8);
        assert!(b.pixels().iter().all(|&p| (p - 0.3).abs() < 1e-6));
    }
}
