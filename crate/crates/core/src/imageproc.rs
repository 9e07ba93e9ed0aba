//! Grayscale digit crops to binary ink rasters, and boundary walks of the
//! resulting connected components.
//!
//! Foreground is 8-connected, background is 4-connected. Every foreground
//! component yields one outer contour (clockwise, y pointing down) and every
//! background hole it encloses yields one inner contour (counter-clockwise).
//! Walks use Moore-neighbor tracing and stop on Jacob's criterion: the trace
//! ends when the start pixel is re-entered with the same backtrack pixel.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    Empty { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("cannot read image {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot write image {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// Row-major 8-bit image, 0 = black ink, 255 = white paper.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Empty { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Reads an 8-bit grayscale PGM (P5) or PNG file. Colour inputs are
    /// converted to luma.
    pub fn read(path: &Path) -> Result<Self, ImageError> {
        let img = image::open(path)
            .map_err(|source| ImageError::Read {
                path: path.display().to_string(),
                source,
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    /// Writes the image; the format follows the extension (`.pgm` or `.png`).
    pub fn write(&self, path: &Path) -> Result<(), ImageError> {
        let buf =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
                .expect("buffer length checked at construction");
        buf.save(path).map_err(|source| ImageError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Row-major ink mask (true = ink).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self, ImageError> {
        if mask.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: mask.len(),
            });
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    /// Parses rows of `#` (ink) and `.` (paper). Handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut mask = Vec::with_capacity(width * height);
        for row in rows {
            assert_eq!(row.len(), width, "ragged ascii raster");
            mask.extend(row.bytes().map(|b| b == b'#'));
        }
        Self {
            width,
            height,
            mask,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, ink: bool) {
        self.mask[y * self.width + x] = ink;
    }

    /// Out-of-frame coordinates read as paper.
    pub fn ink_at(&self, x: i32, y: i32) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.mask[y as usize * self.width + x as usize]
    }

    pub fn ink_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Ink as 0, paper as 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.mask.iter().map(|&m| if m { 0 } else { 255 }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    fn offset(self, (dx, dy): (i32, i32)) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContourKind {
    Outer,
    Inner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<Point>,
    pub kind: ContourKind,
    /// Index of the foreground component this boundary belongs to.
    pub component: usize,
    /// Pixel count of that component.
    pub component_size: usize,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cyclic access.
    pub fn at(&self, i: isize) -> Point {
        let n = self.points.len() as isize;
        self.points[i.rem_euclid(n) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourSet {
    pub contours: Vec<Contour>,
    pub width: usize,
    pub height: usize,
}

impl ContourSet {
    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }
}

/// Otsu's threshold over the 256-bin histogram. Pixels strictly below the
/// returned level form the ink class. Ties go to the lowest level; a
/// constant image returns its single intensity.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let total = img.data().len() as f64;
    let distinct = hist.iter().filter(|&&c| c > 0).count();
    if distinct <= 1 {
        return img.data()[0];
    }

    let grand_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best_level = 0u8;
    let mut best_var = f64::NEG_INFINITY;
    // Class 0 holds intensities < t.
    let mut count0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..=255usize {
        if t > 0 {
            count0 += hist[t - 1] as f64;
            sum0 += (t - 1) as f64 * hist[t - 1] as f64;
        }
        let count1 = total - count0;
        let var = if count0 == 0.0 || count1 == 0.0 {
            0.0
        } else {
            let w0 = count0 / total;
            let w1 = count1 / total;
            let mu0 = sum0 / count0;
            let mu1 = (grand_sum - sum0) / count1;
            w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
        };
        if var > best_var {
            best_var = var;
            best_level = t as u8;
        }
    }
    best_level
}

pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        mask: img.data.iter().map(|&v| v < threshold).collect(),
    }
}

/// Binarizes with the image's own Otsu level.
pub fn binarize_otsu(img: &GrayImage) -> BinaryImage {
    binarize(img, otsu_threshold(img))
}

/// Moore neighbourhood in clockwise order (y down), starting west.
const RING: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];
const WEST: usize = 0;
const SOUTH: usize = 6;

fn ring_index(d: (i32, i32)) -> usize {
    RING.iter()
        .position(|&r| r == d)
        .expect("backtrack is always a Moore neighbour")
}

/// Connected-component labels: `labels[i]` is the component index or `None`.
struct Labels {
    labels: Vec<Option<usize>>,
    sizes: Vec<usize>,
    /// First pixel of each component in raster order.
    seeds: Vec<Point>,
}

fn label_components(img: &BinaryImage, want_ink: bool, eight: bool) -> Labels {
    let (w, h) = (img.width as i32, img.height as i32);
    let mut labels = vec![None; img.mask.len()];
    let mut sizes = Vec::new();
    let mut seeds = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if img.mask[idx] != want_ink || labels[idx].is_some() {
                continue;
            }
            let id = sizes.len();
            labels[idx] = Some(id);
            seeds.push(Point::new(x, y));
            queue.push_back(Point::new(x, y));
            let mut size = 0;
            while let Some(p) = queue.pop_front() {
                size += 1;
                for (k, &d) in RING.iter().enumerate() {
                    // Odd ring entries are the diagonals.
                    if !eight && k % 2 == 1 {
                        continue;
                    }
                    let q = p.offset(d);
                    if q.x < 0 || q.y < 0 || q.x >= w || q.y >= h {
                        continue;
                    }
                    let qi = (q.y * w + q.x) as usize;
                    if img.mask[qi] == want_ink && labels[qi].is_none() {
                        labels[qi] = Some(id);
                        queue.push_back(q);
                    }
                }
            }
            sizes.push(size);
        }
    }
    Labels {
        labels,
        sizes,
        seeds,
    }
}

/// Moore-neighbor walk from `start` whose backtrack (a paper pixel) lies in
/// ring direction `back`. The walk keeps the backtrack region on its left.
///
/// Jacob's criterion is applied to the first move rather than the seed
/// state: the walk closes when leaving `start` would repeat the first step
/// with the same backtrack. The seed backtrack is synthetic and is not
/// always revisited (1-pixel diagonal strokes).
fn moore_walk(img: &BinaryImage, start: Point, back: usize) -> Vec<Point> {
    let step = |p: Point, b: usize| -> Option<(Point, usize)> {
        (1..=8).find_map(|k| {
            let q = p.offset(RING[(b + k) % 8]);
            img.ink_at(q.x, q.y).then(|| {
                let prev = p.offset(RING[(b + k - 1) % 8]);
                (q, ring_index((prev.x - q.x, prev.y - q.y)))
            })
        })
    };

    let mut points = vec![start];
    let Some(first) = step(start, back) else {
        // Isolated pixel.
        return points;
    };
    let (mut p, mut b) = first;
    points.push(p);
    // Each (pixel, backtrack) state occurs at most once per cycle.
    let cap = 8 * img.mask.len() + 8;
    for _ in 0..cap {
        let next = step(p, b).expect("a walk that moved has an ink neighbour");
        if p == start && next == first {
            points.pop();
            return points;
        }
        (p, b) = next;
        points.push(p);
    }
    unreachable!("Moore walk failed to close after {cap} steps")
}

/// Rotates a cyclic walk so it begins at its top-most, then left-most point.
fn rotate_to_topleft(points: &mut [Point]) {
    let first = points
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| (p.y, p.x))
        .map(|(i, _)| i)
        .unwrap_or(0);
    points.rotate_left(first);
}

/// Traces one outer contour per 8-connected ink component and one inner
/// contour per enclosed 4-connected paper hole. Contours are grouped by
/// component (raster order of the component's first pixel); each outer
/// contour is followed by the inner contours of its holes.
pub fn trace_contours(img: &BinaryImage) -> ContourSet {
    let ink = label_components(img, true, true);
    let paper = label_components(img, false, false);
    let (w, h) = (img.width as i32, img.height as i32);

    let mut touches_border = vec![false; paper.sizes.len()];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                if let Some(id) = paper.labels[(y * w + x) as usize] {
                    touches_border[id] = true;
                }
            }
        }
    }

    let mut holes_of: Vec<Vec<Point>> = vec![Vec::new(); ink.sizes.len()];
    for (id, &seed) in paper.seeds.iter().enumerate() {
        if touches_border[id] {
            continue;
        }
        // The pixel above a hole's first raster pixel is ink: a paper pixel
        // there would belong to the same 4-connected hole.
        let above = seed.offset((0, -1));
        let comp =
            ink.labels[(above.y * w + above.x) as usize].expect("pixel above a hole seed is ink");
        holes_of[comp].push(seed);
    }

    let mut contours = Vec::new();
    for (comp, &seed) in ink.seeds.iter().enumerate() {
        let size = ink.sizes[comp];
        contours.push(Contour {
            points: moore_walk(img, seed, WEST),
            kind: ContourKind::Outer,
            component: comp,
            component_size: size,
        });
        for hole in &holes_of[comp] {
            let mut points = moore_walk(img, hole.offset((0, -1)), SOUTH);
            rotate_to_topleft(&mut points);
            contours.push(Contour {
                points,
                kind: ContourKind::Inner,
                component: comp,
                component_size: size,
            });
        }
    }

    ContourSet {
        contours,
        width: img.width,
        height: img.height,
    }
}

/// Number of 8-connected ink components and enclosed 4-connected holes.
pub fn component_counts(img: &BinaryImage) -> (usize, usize) {
    let ink = label_components(img, true, true);
    let paper = label_components(img, false, false);
    let (w, h) = (img.width, img.height);
    let mut border = vec![false; paper.sizes.len()];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                if let Some(id) = paper.labels[y * w + x] {
                    border[id] = true;
                }
            }
        }
    }
    (ink.sizes.len(), border.iter().filter(|&&b| !b).count())
}
