#![allow(dead_code)]

pub mod oracle;

use digitprint::imageproc::BinaryImage;
use oracle::Raster;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn to_binary(r: &Raster) -> BinaryImage {
    BinaryImage::new(r.w, r.h, r.ink.clone()).unwrap()
}

pub fn from_binary(b: &BinaryImage) -> Raster {
    Raster {
        w: b.width(),
        h: b.height(),
        ink: b.mask().to_vec(),
    }
}

/// A random raster from one of three families: sparse speckle, dense noise,
/// or blobs (noise smoothed by a 3×3 majority vote, which yields long
/// contours and holes).
pub fn random_raster(seed: u64, w: usize, h: usize) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = match seed % 3 {
        0 => rng.random_range(0.05..0.25),
        _ => rng.random_range(0.35..0.65),
    };
    let mut ink: Vec<bool> = (0..w * h).map(|_| rng.random_bool(density)).collect();
    if seed % 3 == 2 {
        let src = ink.clone();
        for y in 0..h {
            for x in 0..w {
                let mut votes = 0;
                for dy in -1i32..=1 {
                    for dx in -1i32..=1 {
                        let (qx, qy) = (x as i32 + dx, y as i32 + dy);
                        if qx >= 0 && qy >= 0 && (qx as usize) < w && (qy as usize) < h {
                            votes += src[qy as usize * w + qx as usize] as usize;
                        }
                    }
                }
                ink[y * w + x] = votes >= 5;
            }
        }
    }
    Raster { w, h, ink }
}
