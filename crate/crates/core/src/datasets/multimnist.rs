//! MultiMNIST synthesis: two digits overlaid on a larger canvas, one shifted
//! towards the top-left corner and one towards the bottom-right, then
//! resampled back to 28×28.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MultiMnistSet, RawMnist, Split};
use crate::error::{Error, Result};
use crate::model::IMAGE_SIDE;

/// Side of the intermediate canvas.
pub const CANVAS_SIDE: usize = 36;
/// Diagonal displacement of each digit away from the canvas centre.
pub const SHIFT: usize = 4;

const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// Top-left digit at canvas offset (0, 0), bottom-right digit at
/// (2·SHIFT, 2·SHIFT); overlapping pixels take the maximum.
pub fn overlay_canvas(top_left: &[f32], bottom_right: &[f32]) -> Vec<f32> {
    assert_eq!(top_left.len(), PIXELS);
    assert_eq!(bottom_right.len(), PIXELS);
    let mut canvas = vec![0.0f32; CANVAS_SIDE * CANVAS_SIDE];
    for (src, off) in [(top_left, 0usize), (bottom_right, 2 * SHIFT)] {
        for r in 0..IMAGE_SIDE {
            for c in 0..IMAGE_SIDE {
                let dst = &mut canvas[(r + off) * CANVAS_SIDE + c + off];
                *dst = dst.max(src[r * IMAGE_SIDE + c]);
            }
        }
    }
    canvas
}

/// Bilinear resampling of a square image using pixel-centre alignment.
pub fn downscale_bilinear(src: &[f32], src_side: usize, dst_side: usize) -> Vec<f32> {
    assert_eq!(src.len(), src_side * src_side);
    let scale = src_side as f64 / dst_side as f64;
    let max = (src_side - 1) as f64;
    let coord = |d: usize| -> (usize, usize, f64) {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(src_side - 1);
        (lo, hi, s - lo as f64)
    };
    let mut out = Vec::with_capacity(dst_side * dst_side);
    for y in 0..dst_side {
        let (y0, y1, fy) = coord(y);
        for x in 0..dst_side {
            let (x0, x1, fx) = coord(x);
            let at = |r: usize, c: usize| src[r * src_side + c] as f64;
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
            let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    out
}

pub fn render_pair(top_left: &[f32], bottom_right: &[f32]) -> Vec<f32> {
    downscale_bilinear(&overlay_canvas(top_left, bottom_right), CANVAS_SIDE, IMAGE_SIDE)
}

/// Partner index for every digit, uniform over all other indices.
pub fn draw_partners(n: usize, pair_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
    (0..n)
        .map(|i| {
            if n == 1 {
                return 0;
            }
            let j = rng.gen_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect()
}

/// Renders digit `i` top-left with digit `partners[i]` bottom-right.
pub fn make_multimnist_with_partners(base: &RawMnist, partners: &[usize], split: Split) -> Result<MultiMnistSet> {
    if base.is_empty() {
        return Err(Error::argument("cannot build MultiMNIST from an empty set"));
    }
    if base.rows != IMAGE_SIDE || base.cols != IMAGE_SIDE {
        return Err(Error::Dimension {
            op: "make_multimnist",
            lhs: vec![base.rows, base.cols],
            rhs: vec![IMAGE_SIDE, IMAGE_SIDE],
        });
    }
    if partners.len() != base.len() || partners.iter().any(|&j| j >= base.len()) {
        return Err(Error::argument("partner list does not index the base set"));
    }
    let mut images = Vec::with_capacity(base.len() * PIXELS);
    for (i, &j) in partners.iter().enumerate() {
        images.extend(render_pair(base.image(i), base.image(j)));
    }
    Ok(MultiMnistSet {
        images,
        labels_tl: base.labels.clone(),
        labels_br: partners.iter().map(|&j| base.labels[j]).collect(),
        split,
    })
}

pub fn make_multimnist(base: &RawMnist, pair_seed: u64, split: Split) -> Result<MultiMnistSet> {
    make_multimnist_with_partners(base, &draw_partners(base.len(), pair_seed), split)
}
