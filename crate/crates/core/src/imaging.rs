//! Page decoding and the three preprocessing stages (grayscale, binarized,
//! inverted) plus fixed-size area-average resizing.
//!
//! All conversions that turn a fractional luminance into a byte round half
//! up, and every function here is a pure function of its inputs.

use std::path::Path;

use image::ImageFormat;

use crate::error::{Error, Result};

/// Decoded colour page, row-major `(r, g, b)` triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// One luminance byte per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A `width` x `height` image filled with `value`.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let idx = y as usize * self.width as usize + x as usize;
        self.pixels[idx] = value;
    }

    /// Copies the `w` x `h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<GrayImage> {
        check_window(x, y, w, h, self.width, self.height)?;
        let pixels = crop_rows(&self.pixels, self.width, x, y, w, h);
        Ok(GrayImage {
            width: w,
            height: h,
            pixels,
        })
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }
}

/// Ink mask: 1 = ink (foreground), 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        if let Some(bad) = pixels.iter().find(|&&p| p > 1) {
            return Err(Error::InvalidArgument(format!(
                "binary pixel value {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn is_ink(&self, x: u32, y: u32) -> bool {
        self.pixels[y as usize * self.width as usize + x as usize] == 1
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<BinaryImage> {
        check_window(x, y, w, h, self.width, self.height)?;
        let pixels = crop_rows(&self.pixels, self.width, x, y, w, h);
        Ok(BinaryImage {
            width: w,
            height: h,
            pixels,
        })
    }

    /// Renders the mask as gray: ink -> 0, background -> 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|&p| if p == 1 { 0 } else { 255 })
                .collect(),
        }
    }
}

fn check_dims(width: u32, height: u32, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "image dimensions must be >= 1, got {width}x{height}"
        )));
    }
    let expected = width as usize * height as usize;
    if len != expected {
        return Err(Error::DimensionMismatch { expected, got: len });
    }
    Ok(())
}

fn check_window(x: u32, y: u32, w: u32, h: u32, width: u32, height: u32) -> Result<()> {
    let fits = w >= 1
        && h >= 1
        && (x as u64 + w as u64) <= width as u64
        && (y as u64 + h as u64) <= height as u64;
    if fits {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            x,
            y,
            w,
            h,
            width,
            height,
        })
    }
}

fn crop_rows(pixels: &[u8], stride: u32, x: u32, y: u32, w: u32, h: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(w as usize * h as usize);
    for row in y..y + h {
        let start = row as usize * stride as usize + x as usize;
        out.extend_from_slice(&pixels[start..start + w as usize]);
    }
    out
}

/// Decodes a PNG or JPEG page.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Width and height of a PNG or JPEG without decoding the pixels.
pub fn image_dimensions(path: impl AsRef<Path>) -> Result<(u32, u32)> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{other:?}"))),
        None => return Err(Error::UnsupportedFormat("unrecognized image signature".into())),
    }
    reader
        .into_dimensions()
        .map_err(|e| Error::CorruptImage(e.to_string()))
}

/// Decodes PNG or JPEG bytes already in memory.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let format = image::guess_format(bytes)
        .map_err(|_| Error::UnsupportedFormat("unrecognized image signature".into()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(Error::UnsupportedFormat(format!("{format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::CorruptImage(e.to_string()))?
        .to_rgb8();
    let (width, height) = decoded.dimensions();
    let pixels = decoded.pixels().map(|p| p.0).collect();
    RasterImage::new(width, height, pixels)
}

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)` with halves rounded up.
pub fn to_grayscale(img: &RasterImage) -> GrayImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
            ((weighted + 500) / 1000) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Otsu threshold of a gray-level histogram.
///
/// Returns the smallest `t` maximizing the between-class variance of the
/// split `{v <= t}` / `{v > t}`, or `None` when the histogram holds fewer
/// than two distinct levels (no split separates anything).
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let sum_all: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as u128 * n as u128)
        .sum();

    let mut best: Option<(u8, f64)> = None;
    let mut n0: u64 = 0;
    let mut s0: u128 = 0;
    for (t, &n) in hist.iter().enumerate() {
        n0 += n;
        s0 += t as u128 * n as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let variance = between_class_variance(n0, s0, n1, sum_all - s0);
        if best.is_none_or(|(_, v)| variance > v) {
            best = Some((t as u8, variance));
        }
    }
    best.filter(|&(_, v)| v > 0.0).map(|(t, _)| t)
}

// Proportional to n0 n1 (mu0 - mu1)^2; the cross term is exact in i128.
fn between_class_variance(n0: u64, s0: u128, n1: u64, s1: u128) -> f64 {
    let cross = s0 as i128 * n1 as i128 - s1 as i128 * n0 as i128;
    let cross = cross as f64;
    cross * cross / (n0 as f64 * n1 as f64)
}

/// Binarizes with Otsu's threshold; ink iff `gray <= t`.
///
/// A page with a single gray level is returned as all background with
/// threshold 0.
pub fn binarize_otsu(img: &GrayImage) -> (BinaryImage, u8) {
    match otsu_threshold(&img.histogram()) {
        Some(t) => (threshold(img, t), t),
        None => (
            BinaryImage {
                width: img.width,
                height: img.height,
                pixels: vec![0; img.pixels.len()],
            },
            0,
        ),
    }
}

/// Fixed threshold: ink iff `gray <= t`.
pub fn threshold(img: &GrayImage, t: u8) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| u8::from(p <= t)).collect(),
    }
}

pub fn invert(img: &BinaryImage) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| 1 - p).collect(),
    }
}

/// Area-average resize.
///
/// Each output pixel is the coverage-weighted mean of the source pixels its
/// back-projected rectangle touches. Coordinates are scaled to a common
/// integer grid (source axis x out size) so weights are exact.
pub fn resize_area_average(img: &GrayImage, out_w: u32, out_h: u32) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be >= 1x1, got {out_w}x{out_h}"
        )));
    }
    let cols = coverage(img.width, out_w);
    let rows = coverage(img.height, out_h);
    let area = img.width as u64 * img.height as u64;

    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize);
    for row_cover in &rows {
        for col_cover in &cols {
            let mut sum: u64 = 0;
            for &(sy, wy) in row_cover {
                let base = sy as usize * img.width as usize;
                let mut row_sum: u64 = 0;
                for &(sx, wx) in col_cover {
                    row_sum += img.pixels[base + sx as usize] as u64 * wx;
                }
                sum += row_sum * wy;
            }
            pixels.push(((2 * sum + area) / (2 * area)) as u8);
        }
    }
    Ok(GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    })
}

// For each output index, the (source index, overlap) pairs along one axis.
// Source pixel i spans [i*out, (i+1)*out); output pixel o spans [o*src, (o+1)*src).
fn coverage(src: u32, out: u32) -> Vec<Vec<(u32, u64)>> {
    let (src64, out64) = (src as u64, out as u64);
    (0..out64)
        .map(|o| {
            let lo = o * src64;
            let hi = lo + src64;
            let first = lo / out64;
            let last = (hi - 1) / out64;
            (first..=last)
                .map(|i| {
                    let s_lo = i * out64;
                    let s_hi = s_lo + out64;
                    let overlap = hi.min(s_hi) - lo.max(s_lo);
                    (i as u32, overlap)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: u32, h: u32, px: Vec<u8>) -> GrayImage {
        GrayImage::new(w, h, px).unwrap()
    }

    /// Brute force over every candidate threshold straight from the pixels.
    fn otsu_oracle(pixels: &[u8]) -> Option<u8> {
        let n = pixels.len() as f64;
        let mut best: Option<(u8, f64)> = None;
        for t in 0..=255u8 {
            let (lo, hi): (Vec<u8>, Vec<u8>) = pixels.iter().partition(|&&p| p <= t);
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let w0 = lo.len() as f64 / n;
            let w1 = hi.len() as f64 / n;
            let mu0 = lo.iter().map(|&p| p as f64).sum::<f64>() / lo.len() as f64;
            let mu1 = hi.iter().map(|&p| p as f64).sum::<f64>() / hi.len() as f64;
            let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
            if best.is_none_or(|(_, v)| var > v) {
                best = Some((t, var));
            }
        }
        best.map(|(t, _)| t)
    }

    #[test]
    fn grayscale_fixed_points() {
        let img = RasterImage::new(
            3,
            1,
            vec![[255, 255, 255], [128, 128, 128], [255, 0, 0]],
        )
        .unwrap();
        assert_eq!(to_grayscale(&img).pixels(), &[255, 128, 76]);
    }

    #[test]
    fn otsu_uniform_is_all_background() {
        let img = GrayImage::filled(4, 4, 200);
        let (bin, t) = binarize_otsu(&img);
        assert_eq!(t, 0);
        assert_eq!(bin.ink_count(), 0);

        // Even a uniformly black page is not declared all-ink.
        let (bin, t) = binarize_otsu(&GrayImage::filled(3, 3, 0));
        assert_eq!((bin.ink_count(), t), (0, 0));
    }

    #[test]
    fn otsu_two_levels() {
        let mut px = vec![10u8; 10];
        px.extend(vec![200u8; 10]);
        let img = gray(20, 1, px.clone());
        let (bin, t) = binarize_otsu(&img);
        assert_eq!(Some(t), otsu_oracle(&px));
        for (i, &p) in px.iter().enumerate() {
            assert_eq!(bin.pixels()[i] == 1, p == 10);
        }
    }

    #[test]
    fn otsu_already_binary() {
        let px = vec![0, 255, 255, 0, 255, 0, 0, 255, 255];
        let img = gray(3, 3, px.clone());
        let (bin, t) = binarize_otsu(&img);
        assert_eq!(Some(t), otsu_oracle(&px));
        let expected: Vec<u8> = px.iter().map(|&p| u8::from(p == 0)).collect();
        assert_eq!(bin.pixels(), expected.as_slice());
    }

    #[test]
    fn invert_examples() {
        let ink = BinaryImage::new(2, 2, vec![1; 4]).unwrap();
        assert_eq!(invert(&ink).ink_count(), 0);
        let checker = BinaryImage::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(invert(&checker).pixels(), &[0, 1, 1, 0]);
    }

    #[test]
    fn binary_rejects_non_binary_values() {
        assert!(BinaryImage::new(1, 1, vec![2]).is_err());
    }

    #[test]
    fn resize_identity() {
        let px: Vec<u8> = (0..400).map(|i| (i * 7 % 256) as u8).collect();
        let img = gray(20, 20, px);
        assert_eq!(resize_area_average(&img, 20, 20).unwrap(), img);
    }

    #[test]
    fn resize_quadrants() {
        let mut img = GrayImage::filled(40, 40, 0);
        let values = [[10u8, 90], [170, 250]];
        for y in 0..40 {
            for x in 0..40 {
                img.set(x, y, values[(y / 20) as usize][(x / 20) as usize]);
            }
        }
        let out = resize_area_average(&img, 2, 2).unwrap();
        assert_eq!(out.pixels(), &[10, 90, 170, 250]);
    }

    #[test]
    fn resize_rounds_half_up() {
        let img = gray(2, 1, vec![0, 255]);
        assert_eq!(resize_area_average(&img, 1, 1).unwrap().pixels(), &[128]);
    }

    #[test]
    fn resize_fractional_coverage() {
        // 3 -> 2: output 0 covers source 0 fully and half of source 1.
        let img = gray(3, 1, vec![0, 90, 180]);
        let out = resize_area_average(&img, 2, 1).unwrap();
        // (0*2 + 90*1) / 3 = 30; (90*1 + 180*2) / 3 = 150
        assert_eq!(out.pixels(), &[30, 150]);
    }

    #[test]
    fn resize_upscale() {
        let img = gray(2, 1, vec![0, 200]);
        let out = resize_area_average(&img, 4, 1).unwrap();
        assert_eq!(out.pixels(), &[0, 0, 200, 200]);
    }

    #[test]
    fn resize_rejects_zero_target() {
        assert!(resize_area_average(&GrayImage::filled(2, 2, 0), 0, 1).is_err());
    }

    #[test]
    fn crop_checks_bounds() {
        let img = GrayImage::filled(10, 10, 3);
        assert!(img.crop(5, 5, 5, 5).is_ok());
        assert!(matches!(img.crop(6, 5, 5, 5), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn load_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let px = [[0u8, 0, 0], [10, 20, 30], [255, 128, 1], [7, 7, 7]];
        let buf = image::RgbImage::from_fn(2, 2, |x, y| image::Rgb(px[(y * 2 + x) as usize]));
        buf.save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(image_dimensions(&path).unwrap(), (2, 2));
        assert_eq!(img.pixels(), &px);

        let one = dir.path().join("one.png");
        image::RgbImage::from_pixel(1, 1, image::Rgb([0, 0, 0]))
            .save(&one)
            .unwrap();
        assert_eq!(
            load_image(&one).unwrap(),
            RasterImage::new(1, 1, vec![[0, 0, 0]]).unwrap()
        );
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::FileNotFound(_))
        ));

        let path = dir.path().join("p.png");
        image::RgbImage::from_pixel(8, 8, image::Rgb([1, 2, 3]))
            .save(&path)
            .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.png");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&cut), Err(Error::CorruptImage(_))));

        let txt = dir.path().join("t.png");
        std::fs::write(&txt, b"hello, not an image").unwrap();
        assert!(matches!(load_image(&txt), Err(Error::UnsupportedFormat(_))));
    }

    proptest! {
        #[test]
        fn otsu_matches_brute_force(px in proptest::collection::vec(any::<u8>(), 1..200)) {
            let img = gray(px.len() as u32, 1, px.clone());
            prop_assert_eq!(otsu_threshold(&img.histogram()), otsu_oracle(&px));
        }

        #[test]
        fn invert_is_involution(px in proptest::collection::vec(0u8..=1, 1..64)) {
            let img = BinaryImage::new(px.len() as u32, 1, px).unwrap();
            prop_assert_eq!(invert(&invert(&img)), img);
        }

        #[test]
        fn grayscale_idempotent_on_gray(px in proptest::collection::vec(any::<u8>(), 1..64)) {
            let rgb = RasterImage::new(px.len() as u32, 1, px.iter().map(|&v| [v, v, v]).collect()).unwrap();
            let g = to_grayscale(&rgb);
            prop_assert_eq!(g.pixels(), px.as_slice());
        }

        #[test]
        fn integer_scale_resize_is_block_mean(
            k in 1u32..5, ow in 1u32..5, oh in 1u32..5, seed in any::<u64>()
        ) {
            let (w, h) = (ow * k, oh * k);
            let px: Vec<u8> = (0..w * h)
                .map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8)
                .collect();
            let img = gray(w, h, px);
            let out = resize_area_average(&img, ow, oh).unwrap();
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut sum = 0f64;
                    for y in oy * k..(oy + 1) * k {
                        for x in ox * k..(ox + 1) * k {
                            sum += img.get(x, y) as f64;
                        }
                    }
                    let mean = sum / (k * k) as f64;
                    prop_assert!((out.get(ox, oy) as f64 - mean).abs() <= 1.0);
                }
            }
        }

        #[test]
        fn resize_is_deterministic(px in proptest::collection::vec(any::<u8>(), 12), ow in 1u32..9, oh in 1u32..9) {
            let img = gray(4, 3, px);
            prop_assert_eq!(resize_area_average(&img, ow, oh).unwrap(), resize_area_average(&img, ow, oh).unwrap());
        }
    }
}
