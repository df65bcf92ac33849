use super::{ImagingError, PixelImage, Result};

fn check_target(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(ImagingError::InvalidInput(format!(
            "target dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Bilinear sample at continuous source coordinates, where pixel `(i, j)`
/// has its center at `(i, j)`. Coordinates outside the image clamp to the
/// nearest edge.
pub fn sample_bilinear(img: &PixelImage, sx: f64, sy: f64) -> [f64; 3] {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor() as u32;
    let y0 = sy.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let (p00, p10, p01, p11) = (img.pixel(x0, y0), img.pixel(x1, y0), img.pixel(x0, y1), img.pixel(x1, y1));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_image(img: &PixelImage, width: u32, height: u32) -> Result<PixelImage> {
    check_target(width, height)?;
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    PixelImage::from_fn(width, height, |x, y| {
        let s = sample_bilinear(img, (x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5);
        [to_u8(s[0]), to_u8(s[1]), to_u8(s[2])]
    })
}

/// Area-averaging resize: each output pixel is the coverage-weighted mean
/// of the source pixels under its footprint. Used to bring canonical-frame
/// composites down to classifier resolution without dropping thin stickers
/// between sample points.
pub fn resize_area(img: &PixelImage, width: u32, height: u32) -> Result<PixelImage> {
    check_target(width, height)?;
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let xs = footprints(img.width(), width);
    let ys = footprints(img.height(), height);
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for ry in &ys {
        for rx in &xs {
            let mut acc = [0.0f64; 3];
            let mut total = 0.0;
            for &(sy, wy) in ry {
                for &(sx, wx) in rx {
                    let w = wx * wy;
                    let p = img.pixel(sx, sy);
                    for c in 0..3 {
                        acc[c] += p[c] as f64 * w;
                    }
                    total += w;
                }
            }
            data.extend(acc.iter().map(|v| to_u8(v / total)));
        }
    }
    PixelImage::new(width, height, data)
}

// For each destination index: the source indices it overlaps and the overlap
// length.
fn footprints(src: u32, dst: u32) -> Vec<Vec<(u32, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let lo = d as f64 * scale;
            let hi = lo + scale;
            let first = lo.floor() as u32;
            let last = (hi.ceil() as u32).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_stays_constant() {
        let gray = PixelImage::filled(10, 10, [128, 128, 128]).unwrap();
        let up = resize_image(&gray, 32, 32).unwrap();
        assert_eq!(up, PixelImage::filled(32, 32, [128, 128, 128]).unwrap());
        let down = resize_area(&gray, 3, 7).unwrap();
        assert_eq!(down, PixelImage::filled(3, 7, [128, 128, 128]).unwrap());
    }

    #[test]
    fn identity_resize_is_bit_identical() {
        let img = PixelImage::from_fn(5, 4, |x, y| [x as u8 * 40, y as u8 * 60, 7]).unwrap();
        assert_eq!(resize_image(&img, 5, 4).unwrap(), img);
        assert_eq!(resize_area(&img, 5, 4).unwrap(), img);
    }

    #[test]
    fn two_pixel_ramp_upsampled() {
        // Destination centers map to source x = -0.25, 0.25, 0.75, 1.25.
        // Clamped ends give 0 and 255; interior weights give 63.75 and 191.25.
        let img = PixelImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let out = resize_image(&img, 4, 1).unwrap();
        let reds: Vec<u8> = (0..4).map(|x| out.pixel(x, 0)[0]).collect();
        assert_eq!(reds, vec![0, 64, 191, 255]);
    }

    #[test]
    fn area_downscale_averages_blocks() {
        let img = PixelImage::from_fn(4, 2, |x, _| if x < 2 { [0, 0, 0] } else { [255, 255, 255] }).unwrap();
        let out = resize_area(&img, 2, 1).unwrap();
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
        assert_eq!(out.pixel(1, 0), [255, 255, 255]);
        let out = resize_area(&img, 1, 1).unwrap();
        assert_eq!(out.pixel(0, 0), [128, 128, 128]); // 127.5 rounds up
    }

    #[test]
    fn area_downscale_keeps_thin_features() {
        // a 1-px black column in a white 8x8 must darken the 2x2 result
        let img = PixelImage::from_fn(8, 8, |x, _| if x == 1 { [0; 3] } else { [255; 3] }).unwrap();
        let out = resize_area(&img, 2, 2).unwrap();
        assert!(out.pixel(0, 0)[0] < 255);
        assert_eq!(out.pixel(1, 0)[0], 255);
    }

    proptest! {
        #[test]
        fn constant_inputs_map_to_constants(
            w in 1u32..20, h in 1u32..20, tw in 1u32..40, th in 1u32..40, v in any::<[u8; 3]>()
        ) {
            let img = PixelImage::filled(w, h, v).unwrap();
            prop_assert_eq!(resize_image(&img, tw, th).unwrap(), PixelImage::filled(tw, th, v).unwrap());
            prop_assert_eq!(resize_area(&img, tw, th).unwrap(), PixelImage::filled(tw, th, v).unwrap());
        }
    }
}
