//! Brute-force reference implementations used as test oracles. Nothing here
//! calls into the library's feature or matching code.

#![allow(dead_code)]

use std::collections::HashMap;

/// Row-major raster, `true` is ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub w: usize,
    pub h: usize,
    pub ink: Vec<bool>,
}

impl Raster {
    pub fn at(&self, x: i32, y: i32) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.w
            && (y as usize) < self.h
            && self.ink[y as usize * self.w + x as usize]
    }
}

/// Clockwise with y down, starting west.
const DIRS: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_of(dx: i32, dy: i32) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).unwrap()
}

/// Component label per pixel, and each component's pixels in discovery order.
pub type Labelling = (Vec<Option<usize>>, Vec<Vec<(i32, i32)>>);

/// Components of pixels with `ink == want` in raster order of their first
/// pixel; `diag` selects 8- over 4-connectivity.
pub fn components(r: &Raster, want: bool, diag: bool) -> Labelling {
    let mut label = vec![None; r.w * r.h];
    let mut comps: Vec<Vec<(i32, i32)>> = Vec::new();
    for y in 0..r.h as i32 {
        for x in 0..r.w as i32 {
            let i = y as usize * r.w + x as usize;
            if r.ink[i] != want || label[i].is_some() {
                continue;
            }
            let id = comps.len();
            let mut members = Vec::new();
            let mut stack = vec![(x, y)];
            label[i] = Some(id);
            while let Some((px, py)) = stack.pop() {
                members.push((px, py));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if (dx, dy) == (0, 0) || (!diag && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (qx, qy) = (px + dx, py + dy);
                        if qx < 0 || qy < 0 || qx >= r.w as i32 || qy >= r.h as i32 {
                            continue;
                        }
                        let qi = qy as usize * r.w + qx as usize;
                        if r.ink[qi] == want && label[qi].is_none() {
                            label[qi] = Some(id);
                            stack.push((qx, qy));
                        }
                    }
                }
            }
            comps.push(members);
        }
    }
    (label, comps)
}

/// Moore walk: search clockwise from the backtrack, step to the first ink
/// neighbour, the new backtrack is the square examined just before it.
/// Closes when the walk would leave the start with its very first move.
fn walk(r: &Raster, start: (i32, i32), back: usize) -> Vec<(i32, i32)> {
    let next = |p: (i32, i32), b: usize| -> Option<((i32, i32), usize)> {
        for k in 1..=8 {
            let d = DIRS[(b + k) % 8];
            let q = (p.0 + d.0, p.1 + d.1);
            if r.at(q.0, q.1) {
                let e = DIRS[(b + k + 7) % 8];
                let before = (p.0 + e.0, p.1 + e.1);
                return Some((q, dir_of(before.0 - q.0, before.1 - q.1)));
            }
        }
        None
    };
    let mut pts = vec![start];
    let Some(first) = next(start, back) else {
        return pts;
    };
    let mut state = first;
    loop {
        pts.push(state.0);
        let n = next(state.0, state.1).unwrap();
        if state.0 == start && n == first {
            pts.pop();
            return pts;
        }
        state = n;
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub pts: Vec<(i32, i32)>,
    pub comp_size: usize,
}

/// Outer contour of every 8-connected ink component, each followed by the
/// inner contours of the enclosed 4-connected holes it borders from above.
pub fn contours(r: &Raster) -> Vec<Chain> {
    let (ink_label, ink) = components(r, true, true);
    let (_, paper) = components(r, false, false);
    let mut holes: Vec<Vec<(i32, i32)>> = vec![Vec::new(); ink.len()];
    for comp in &paper {
        let enclosed = comp
            .iter()
            .all(|&(x, y)| x > 0 && y > 0 && x < r.w as i32 - 1 && y < r.h as i32 - 1);
        if !enclosed {
            continue;
        }
        let seed = *comp.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
        let owner = ink_label[(seed.1 - 1) as usize * r.w + seed.0 as usize].unwrap();
        holes[owner].push(seed);
    }
    let mut out = Vec::new();
    for (id, comp) in ink.iter().enumerate() {
        let seed = *comp.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
        out.push(Chain {
            pts: walk(r, seed, 0),
            comp_size: comp.len(),
        });
        let mut hs = holes[id].clone();
        hs.sort_by_key(|&(x, y)| (y, x));
        for (hx, hy) in hs {
            let mut pts = walk(r, (hx, hy - 1), 6);
            let mut best = 0;
            for (i, p) in pts.iter().enumerate() {
                if (p.1, p.0) < (pts[best].1, pts[best].0) {
                    best = i;
                }
            }
            pts.rotate_left(best);
            out.push(Chain {
                pts,
                comp_size: comp.len(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub bins: usize,
    pub fragment: usize,
    pub leg: usize,
    pub min_component: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            bins: 12,
            fragment: 5,
            leg: 5,
            min_component: 3,
        }
    }
}

/// Orientation in degrees with y pointing up.
fn degrees(dx: i32, dy: i32) -> f64 {
    (-(dy as f64)).atan2(dx as f64).to_degrees()
}

const EDGE_SLACK: f64 = 1e-6;

/// Bin of `deg` among `bins` equal sectors of `[0, full)`.
fn sector(mut deg: f64, full: f64, bins: usize) -> usize {
    if deg < 0.0 {
        deg += full;
    }
    if deg > full - EDGE_SLACK {
        return 0;
    }
    let width = full / bins as f64;
    (0..bins)
        .rev()
        .find(|&b| deg >= b as f64 * width - EDGE_SLACK)
        .unwrap()
}

pub fn undirected(dx: i32, dy: i32, bins: usize) -> usize {
    sector(degrees(dx, dy), 180.0, bins)
}

pub fn directed(dx: i32, dy: i32, bins: usize) -> usize {
    sector(degrees(dx, dy), 360.0, bins)
}

fn normalise(counts: &[u64]) -> Option<Vec<f64>> {
    let total: u64 = counts.iter().sum();
    (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect())
}

fn ahead(c: &Chain, i: usize, step: isize) -> (i32, i32) {
    let n = c.pts.len() as isize;
    let j = ((i as isize + step) % n + n) % n;
    (
        c.pts[j as usize].0 - c.pts[i].0,
        c.pts[j as usize].1 - c.pts[i].1,
    )
}

fn usable(c: &Chain, p: &Params, span: usize) -> bool {
    c.comp_size >= p.min_component && c.pts.len() > span
}

pub fn f1(chains: &[Chain], p: &Params) -> Option<Vec<f64>> {
    let mut counts = vec![0u64; p.bins];
    for c in chains.iter().filter(|c| usable(c, p, p.fragment)) {
        for i in 0..c.pts.len() {
            let d = ahead(c, i, p.fragment as isize);
            if d != (0, 0) {
                counts[undirected(d.0, d.1, p.bins)] += 1;
            }
        }
    }
    normalise(&counts)
}

pub fn f2(chains: &[Chain], p: &Params) -> Option<Vec<f64>> {
    let m = 2 * p.bins;
    let mut slot = HashMap::new();
    for a in 0..m {
        for b in a..m {
            let next = slot.len();
            slot.insert((a, b), next);
        }
    }
    let mut counts = vec![0u64; slot.len()];
    for c in chains.iter().filter(|c| usable(c, p, 2 * p.leg)) {
        for i in 0..c.pts.len() {
            let f = ahead(c, i, p.leg as isize);
            let b = ahead(c, i, -(p.leg as isize));
            if f == (0, 0) || b == (0, 0) {
                continue;
            }
            let (x, y) = (directed(f.0, f.1, m), directed(b.0, b.1, m));
            counts[slot[&(x.min(y), x.max(y))]] += 1;
        }
    }
    normalise(&counts)
}

fn orientation_map(r: &Raster, chains: &[Chain], p: &Params) -> HashMap<(i32, i32), usize> {
    let mut map = HashMap::new();
    for c in chains.iter().filter(|c| usable(c, p, p.fragment)) {
        for i in 0..c.pts.len() {
            let d = ahead(c, i, p.fragment as isize);
            if d != (0, 0) {
                map.entry(c.pts[i])
                    .or_insert_with(|| undirected(d.0, d.1, p.bins));
            }
        }
    }
    debug_assert!(map.keys().all(|&(x, y)| r.at(x, y)));
    map
}

/// Co-occurrence over background runs bounded by ink on both ends.
/// `vertical` scans columns instead of rows.
pub fn f3(r: &Raster, chains: &[Chain], p: &Params, vertical: bool) -> Option<Vec<f64>> {
    let orient = orientation_map(r, chains, p);
    if orient.is_empty() {
        return None;
    }
    let (lines, len) = if vertical { (r.w, r.h) } else { (r.h, r.w) };
    let px = |line: usize, pos: usize| -> (i32, i32) {
        if vertical {
            (line as i32, pos as i32)
        } else {
            (pos as i32, line as i32)
        }
    };
    let mut counts = vec![0u64; p.bins * p.bins];
    for line in 0..lines {
        for a in 0..len {
            for b in a + 2..len {
                let (pa, pb) = (px(line, a), px(line, b));
                if !r.at(pa.0, pa.1) || !r.at(pb.0, pb.1) {
                    continue;
                }
                let gap_is_paper = (a + 1..b).all(|k| {
                    let q = px(line, k);
                    !r.at(q.0, q.1)
                });
                if !gap_is_paper {
                    continue;
                }
                if let (Some(&oa), Some(&ob)) = (orient.get(&pa), orient.get(&pb)) {
                    counts[oa * p.bins + ob] += 1;
                }
            }
        }
    }
    normalise(&counts)
}

/// All four PDFs in the order f1, f2, f3h, f3v.
pub fn all_features(r: &Raster, p: &Params) -> [Option<Vec<f64>>; 4] {
    let chains = contours(r);
    [
        f1(&chains, p),
        f2(&chains, p),
        f3(r, &chains, p, false),
        f3(r, &chains, p, true),
    ]
}

pub fn chi2(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for i in 0..p.len() {
        let s = p[i] + q[i];
        if s != 0.0 {
            total += (p[i] - q[i]).powi(2) / s;
        }
    }
    total
}

/// EER by scanning every observed score as a threshold, straight from the
/// definitions. Acceptance is distance <= t.
pub fn eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut ts: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let rates: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let far = impostor.iter().filter(|&&d| d <= t).count() as f64 / impostor.len() as f64;
            let frr = genuine.iter().filter(|&&d| d > t).count() as f64 / genuine.len() as f64;
            (far, frr)
        })
        .collect();
    let mut k = 0;
    for i in 0..rates.len() {
        if (rates[i].0 - rates[i].1).abs() < (rates[k].0 - rates[k].1).abs() {
            k = i;
        }
    }
    let gap = |i: usize| rates[i].0 - rates[i].1;
    // FAR - FRR only grows with t; if it changes sign next to k, meet in between.
    let pair = if gap(k) < 0.0 && k + 1 < rates.len() && gap(k + 1) > 0.0 {
        Some((k, k + 1))
    } else if gap(k) > 0.0 && k > 0 && gap(k - 1) < 0.0 {
        Some((k - 1, k))
    } else {
        None
    };
    match pair {
        Some((a, b)) => {
            let s = gap(a) / (gap(a) - gap(b));
            rates[a].0 + s * (rates[b].0 - rates[a].0)
        }
        None => (rates[k].0 + rates[k].1) / 2.0,
    }
}

/// Raster of a stored 0/255 digit image.
pub fn raster_of(w: usize, h: usize, pixels: &[u8]) -> Raster {
    Raster {
        w,
        h,
        ink: pixels.iter().map(|&v| v < 128).collect(),
    }
}

/// Per-sample f1 and f2 PDFs at each digit position.
pub type SampleFeatures = Vec<[Vec<f64>; 2]>;

pub fn sample_features(digits: &[Raster], p: &Params) -> SampleFeatures {
    digits
        .iter()
        .map(|r| {
            let chains = contours(r);
            [
                f1(&chains, p).expect("synthetic digits carry ink"),
                f2(&chains, p).expect("synthetic digits carry ink"),
            ]
        })
        .collect()
}

fn mean(vs: &[&Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    out.iter().map(|x| x / vs.len() as f64).collect()
}

/// Digit-wise averaged template: per position and kind, the mean PDF.
pub fn template(members: &[&SampleFeatures]) -> SampleFeatures {
    (0..members[0].len())
        .map(|pos| [0, 1].map(|k| mean(&members.iter().map(|m| &m[pos][k]).collect::<Vec<_>>())))
        .collect()
}

/// Mean over kinds of the mean over positions of χ².
pub fn digitwise(t: &SampleFeatures, probe: &SampleFeatures) -> f64 {
    let per_kind = [0, 1].map(|k| {
        let sum: f64 = t.iter().zip(probe).map(|(a, b)| chi2(&a[k], &b[k])).sum();
        sum / t.len() as f64
    });
    (per_kind[0] + per_kind[1]) / 2.0
}

/// Fraction of probes whose nearest template (ties by writer id) is their
/// own writer.
pub fn top1(gallery: &[(String, SampleFeatures)], probes: &[(String, &SampleFeatures)]) -> f64 {
    let mut hits = 0;
    for (truth, probe) in probes {
        let mut best: Option<(f64, &str)> = None;
        for (w, t) in gallery {
            let d = digitwise(t, probe);
            let better = match best {
                None => true,
                Some((bd, bw)) => d < bd || (d == bd && w.as_str() < bw),
            };
            if better {
                best = Some((d, w));
            }
        }
        if best.map(|(_, w)| w) == Some(truth.as_str()) {
            hits += 1;
        }
    }
    hits as f64 / probes.len() as f64
}
