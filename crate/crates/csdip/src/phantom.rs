//! Deterministic test images.
//!
//! Everything here renders into `[1, H, W]` tensors with values in
//! `[-1, 1]`: digit-like glyphs from a seven-segment layout, smooth
//! low-frequency textures from a handful of seeded cosine modes, and a box
//! blur for softening either.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Segment occupancy per digit, ordered A (top), B (top right),
/// C (bottom right), D (bottom), E (bottom left), F (top left), G (middle).
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],    // 0
    [false, true, true, false, false, false, false], // 1
    [true, true, false, true, true, false, true],   // 2
    [true, true, true, true, false, false, true],   // 3
    [false, true, true, false, false, true, true],  // 4
    [true, false, true, true, false, true, true],   // 5
    [true, false, true, true, true, true, true],    // 6
    [true, true, true, false, false, false, false], // 7
    [true, true, true, true, true, true, true],     // 8
    [true, true, true, true, false, true, true],    // 9
];

/// Renders a digit glyph: foreground `+1` on background `-1`.
pub fn digit(value: u8, height: usize, width: usize) -> Result<Tensor> {
    if value > 9 {
        return Err(Error::invalid("digit", format!("value {value} is not a digit")));
    }
    if height < 7 || width < 7 {
        return Err(Error::invalid("digit", format!("{height} x {width} canvas is too small")));
    }
    let t = (height.min(width) / 9).max(2);
    let top = height / 7;
    let bottom = height - height / 7;
    let left = width / 4;
    let right = width - width / 4;
    let mid = (top + bottom) / 2;

    let mut data = vec![-1.0; height * width];
    let mut fill = |r0: usize, r1: usize, c0: usize, c1: usize| {
        for r in r0..r1.min(height) {
            for c in c0..c1.min(width) {
                data[r * width + c] = 1.0;
            }
        }
    };
    let on = SEGMENTS[value as usize];
    if on[0] {
        fill(top, top + t, left, right); // A
    }
    if on[1] {
        fill(top, mid, right - t, right); // B
    }
    if on[2] {
        fill(mid, bottom, right - t, right); // C
    }
    if on[3] {
        fill(bottom - t, bottom, left, right); // D
    }
    if on[4] {
        fill(mid, bottom, left, left + t); // E
    }
    if on[5] {
        fill(top, mid, left, left + t); // F
    }
    if on[6] {
        fill(mid - t / 2, mid - t / 2 + t, left, right); // G
    }
    Tensor::from_vec(&[1, height, width], data)
}

/// A smooth random texture: a seeded combination of the lowest cosine
/// modes, rescaled to peak at 0.9.
pub fn texture(height: usize, width: usize, seed: u64) -> Result<Tensor> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("texture", format!("{height} x {width} canvas")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let modes = 4usize;
    let mut amps = Vec::new();
    for p in 0..modes {
        for q in 0..modes {
            let a: f64 = StandardNormal.sample(&mut rng);
            amps.push(a / (1.0 + (p * p + q * q) as f64));
        }
    }
    let mut data = vec![0.0; height * width];
    for i in 0..height {
        for j in 0..width {
            let mut acc = 0.0;
            for p in 0..modes {
                for q in 0..modes {
                    acc += amps[p * modes + q]
                        * (std::f64::consts::PI * p as f64 * (i as f64 + 0.5) / height as f64)
                            .cos()
                        * (std::f64::consts::PI * q as f64 * (j as f64 + 0.5) / width as f64)
                            .cos();
                }
            }
            data[i * width + j] = acc;
        }
    }
    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = 0.9 / peak;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    Tensor::from_vec(&[1, height, width], data)
}

/// Box blur with clamped edges, applied separably per channel.
pub fn blur(image: &Tensor, radius: usize) -> Result<Tensor> {
    let dims = image.shape();
    if dims.len() != 3 {
        return Err(Error::shape("blur", format!("{dims:?} is not [C, H, W]")));
    }
    if radius == 0 {
        return Ok(image.clone());
    }
    let (c, h, w) = (dims[0], dims[1], dims[2]);
    let window = 2 * radius + 1;
    let mut rows = vec![0.0; c * h * w];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for o in -(radius as isize)..=(radius as isize) {
                    let jj = (j as isize + o).clamp(0, w as isize - 1) as usize;
                    acc += image.data()[(ch * h + i) * w + jj];
                }
                rows[(ch * h + i) * w + j] = acc / window as f64;
            }
        }
    }
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for o in -(radius as isize)..=(radius as isize) {
                    let ii = (i as isize + o).clamp(0, h as isize - 1) as usize;
                    acc += rows[(ch * h + ii) * w + j];
                }
                out[(ch * h + i) * w + j] = acc / window as f64;
            }
        }
    }
    Tensor::from_vec(&[c, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularization::tv;

    fn foreground(img: &Tensor) -> usize {
        img.data().iter().filter(|&&v| v > 0.0).count()
    }

    #[test]
    fn digits_render_within_range_and_are_distinct() {
        let mut all = Vec::new();
        for v in 0..10u8 {
            let img = digit(v, 28, 28).unwrap();
            assert_eq!(img.shape(), &[1, 28, 28]);
            assert!(img.data().iter().all(|&x| x == 1.0 || x == -1.0));
            assert!(foreground(&img) > 0);
            all.push(img);
        }
        for a in 0..10 {
            for b in (a + 1)..10 {
                assert_ne!(all[a].data(), all[b].data(), "digits {a} and {b} collide");
            }
        }
    }

    #[test]
    fn segment_containments_hold() {
        let one = digit(1, 28, 28).unwrap();
        let eight = digit(8, 28, 28).unwrap();
        let zero = digit(0, 28, 28).unwrap();
        // Everything lit in 1 is lit in 8, and 8 carries strictly more.
        for (a, b) in one.data().iter().zip(eight.data()) {
            assert!(*a <= *b);
        }
        assert!(foreground(&eight) > foreground(&one));
        // 8 is 0 plus the middle bar.
        for (a, b) in zero.data().iter().zip(eight.data()) {
            assert!(*a <= *b);
        }
        assert!(foreground(&eight) > foreground(&zero));
    }

    #[test]
    fn digit_rejects_bad_arguments() {
        assert!(digit(10, 28, 28).is_err());
        assert!(digit(3, 4, 28).is_err());
    }

    #[test]
    fn texture_is_smooth_bounded_and_deterministic() {
        let a = texture(32, 32, 9).unwrap();
        let b = texture(32, 32, 9).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|v| v.abs() <= 0.9 + 1e-12));
        let peak = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.9).abs() <= 1e-12);
        let mut max_step = 0.0f64;
        for i in 0..32 {
            for j in 0..31 {
                let d = (a.data()[i * 32 + j + 1] - a.data()[i * 32 + j]).abs();
                max_step = max_step.max(d);
                let d = (a.data()[(j + 1) * 32 + i] - a.data()[j * 32 + i]).abs();
                max_step = max_step.max(d);
            }
        }
        assert!(max_step <= 0.3, "texture jumps by {max_step} between neighbors");
        assert_ne!(texture(32, 32, 10).unwrap().data(), a.data());
    }

    #[test]
    fn blur_preserves_constants_and_smooths_noise() {
        let flat = Tensor::from_vec(&[1, 5, 5], vec![0.25; 25]).unwrap();
        let blurred = blur(&flat, 2).unwrap();
        for v in blurred.data() {
            assert!((v - 0.25).abs() <= 1e-12);
        }

        let mut rng = crate::check::rng(11);
        let noise =
            Tensor::from_vec(&[1, 16, 16], crate::check::randn(&mut rng, 256)).unwrap();
        let softened = blur(&noise, 1).unwrap();
        let (tv_before, _) = tv(&noise).unwrap();
        let (tv_after, _) = tv(&softened).unwrap();
        assert!(tv_after < tv_before);

        assert_eq!(blur(&noise, 0).unwrap(), noise);
        assert!(blur(&Tensor::zeros(&[25]), 1).is_err());
    }
}
