//! Superpixel-based frame quality scoring and optimal frame selection.
//!
//! Each frame's ROI is segmented with SLIC on scalar intensity, every cluster is
//! re-valued by the sum of its pixel intensities, the `k` brightest clusters are
//! binarized and the mask is Dice-scored against the echogenicity template.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{make_template, BinaryMask, GrayFrame, VideoSequence};
use crate::tracking::RoiBox;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    cluster_count: usize,
    cluster_intensity: Vec<u64>,
}

impl SuperpixelLabeling {
    /// Wraps an existing label map. Labels must be dense: every id in
    /// `0..cluster_count` used at least once.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height || labels.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "label map of {} entries for {width}x{height}",
                labels.len()
            )));
        }
        let cluster_count = *labels.iter().max().unwrap() as usize + 1;
        let mut seen = vec![false; cluster_count];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!("cluster {missing} owns no pixels"),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            cluster_count,
            cluster_intensity: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    /// Per-cluster intensity sums; empty until [`realign_labels`] has run.
    pub fn cluster_intensity(&self) -> &[u64] {
        &self.cluster_intensity
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame_index: usize,
    pub dice: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub target_clusters: usize,
    pub compactness: f64,
    pub max_iters: usize,
    pub top_k: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            target_clusters: 100,
            compactness: 10.0,
            max_iters: 10,
            top_k: 7,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.target_clusters == 0 {
            return Err(Error::param("slic clusters", "must be >= 1"));
        }
        if !(self.compactness > 0.0) {
            return Err(Error::param("slic compactness", "must be > 0"));
        }
        if self.top_k == 0 {
            return Err(Error::param("top_k", "must be >= 1"));
        }
        Ok(())
    }
}

/// Centers closer than this to their previous position count as converged.
const CONVERGENCE_PX: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
struct Center {
    intensity: f64,
    x: f64,
    y: f64,
}

fn seed_centers(frame: &GrayFrame, step: f64) -> (Vec<Center>, f64, f64) {
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    let nx = ((w / step).round() as usize).max(1);
    let ny = ((h / step).round() as usize).max(1);
    let (sx, sy) = (w / nx as f64, h / ny as f64);
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * sx;
            let y = (j as f64 + 0.5) * sy;
            let px = (x.floor() as usize).min(frame.width() - 1);
            let py = (y.floor() as usize).min(frame.height() - 1);
            centers.push(Center {
                intensity: frame.get(px, py) as f64,
                x,
                y,
            });
        }
    }
    (centers, sx, sy)
}

/// SLIC superpixels over joint (intensity, x, y) space.
///
/// Pixel `(x, y)` sits at `(x + 0.5, y + 0.5)` so grid seeds and pixel centers
/// share one coordinate system.
///
/// Seeds sit on a regular grid of step `S = sqrt(area / target_clusters)`; each
/// center searches a `2S x 2S` window and the distance is
/// `sqrt(dI^2 + (compactness / S)^2 * ds^2)`. Afterwards every label is made a
/// single 4-connected component and labels are renumbered densely in raster
/// order of first appearance.
pub fn slic_segment(
    frame: &GrayFrame,
    target_clusters: usize,
    compactness: f64,
    max_iters: usize,
) -> Result<SuperpixelLabeling> {
    let (w, h) = (frame.width(), frame.height());
    let n = w * h;
    if target_clusters == 0 || target_clusters > n {
        return Err(Error::param(
            "target_clusters",
            format!("{target_clusters} not in 1..={n}"),
        ));
    }
    if !(compactness > 0.0) {
        return Err(Error::param(
            "compactness",
            format!("{compactness} must be > 0"),
        ));
    }

    let step = (n as f64 / target_clusters as f64).sqrt();
    let (mut centers, sx, sy) = seed_centers(frame, step);
    let spatial = (compactness / step).powi(2);
    let pixels: Vec<f64> = frame.pixels().iter().map(|&p| p as f64).collect();
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];

    for _ in 0..max_iters.max(1) {
        labels.fill(u32::MAX);
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x - sx).floor().max(0.0) as usize;
            let x1 = ((c.x + sx).ceil() as usize).min(w);
            let y0 = (c.y - sy).floor().max(0.0) as usize;
            let y1 = ((c.y + sy).ceil() as usize).min(h);
            for y in y0..y1 {
                let dy = y as f64 + 0.5 - c.y;
                for x in x0..x1 {
                    let i = y * w + x;
                    let di = pixels[i] - c.intensity;
                    let dx = x as f64 + 0.5 - c.x;
                    let d = di * di + spatial * (dx * dx + dy * dy);
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = ci as u32;
                    }
                }
            }
        }
        // pixels outside every window fall back to the globally nearest center
        for i in 0..n {
            if labels[i] == u32::MAX {
                let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
                let mut best = (f64::INFINITY, 0u32);
                for (ci, c) in centers.iter().enumerate() {
                    let di = pixels[i] - c.intensity;
                    let d = di * di + spatial * ((x - c.x).powi(2) + (y - c.y).powi(2));
                    if d < best.0 {
                        best = (d, ci as u32);
                    }
                }
                labels[i] = best.1;
            }
        }

        let mut acc = vec![(0.0f64, 0.0f64, 0.0f64, 0usize); centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let a = &mut acc[l as usize];
            a.0 += pixels[i];
            a.1 += (i % w) as f64 + 0.5;
            a.2 += (i / w) as f64 + 0.5;
            a.3 += 1;
        }
        let mut max_shift: f64 = 0.0;
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a.3 == 0 {
                continue;
            }
            let cnt = a.3 as f64;
            let (nx, ny) = (a.1 / cnt, a.2 / cnt);
            max_shift = max_shift.max(((nx - c.x).powi(2) + (ny - c.y).powi(2)).sqrt());
            *c = Center {
                intensity: a.0 / cnt,
                x: nx,
                y: ny,
            };
        }
        if max_shift < CONVERGENCE_PX {
            break;
        }
    }

    let labels = enforce_connectivity(w, h, &labels);
    SuperpixelLabeling::from_labels(w, h, labels)
}

const NEIGHBORS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Splits labels into 4-connected components, keeps the largest component of
/// each label, merges every other component into its largest adjacent region
/// and renumbers densely.
fn enforce_connectivity(w: usize, h: usize, labels: &[u32]) -> Vec<u32> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let lab = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if comp[j] == usize::MAX && labels[j] == lab {
                    comp[j] = id;
                    queue.push_back(j);
                }
            }
        }
        comp_label.push(lab);
        comp_size.push(size);
    }

    // largest component per label keeps it; ties go to the earliest component
    let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut keeper = vec![usize::MAX; max_label + 1];
    for (id, &lab) in comp_label.iter().enumerate() {
        let k = &mut keeper[lab as usize];
        if *k == usize::MAX || comp_size[id] > comp_size[*k] {
            *k = id;
        }
    }

    // region[c] = component that c has been merged into (itself for keepers)
    let n_comp = comp_label.len();
    let mut region: Vec<Option<usize>> = (0..n_comp)
        .map(|c| (keeper[comp_label[c] as usize] == c).then_some(c))
        .collect();
    let mut region_size: Vec<usize> = comp_size.clone();

    // adjacency between components
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for i in 0..n {
        let (x, y) = (i % w, i / w);
        let c = comp[i];
        if x + 1 < w {
            let d = comp[i + 1];
            if d != c {
                adj[c].push(d);
                adj[d].push(c);
            }
        }
        if y + 1 < h {
            let d = comp[i + w];
            if d != c {
                adj[c].push(d);
                adj[d].push(c);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }

    let mut pending: Vec<usize> = (0..n_comp).filter(|&c| region[c].is_none()).collect();
    while !pending.is_empty() {
        let mut still = Vec::new();
        for &c in &pending {
            let mut best: Option<usize> = None;
            for &d in &adj[c] {
                if let Some(r) = region[d] {
                    let better = match best {
                        None => true,
                        Some(b) => {
                            region_size[r] > region_size[b]
                                || (region_size[r] == region_size[b]
                                    && comp_label[r] < comp_label[b])
                        }
                    };
                    if better {
                        best = Some(r);
                    }
                }
            }
            match best {
                Some(r) => {
                    region[c] = Some(r);
                    region_size[r] += comp_size[c];
                }
                None => still.push(c),
            }
        }
        if still.len() == pending.len() {
            // isolated component with no labelled neighbour: keep it as its own region
            let c = still.remove(0);
            region[c] = Some(c);
        }
        pending = still;
    }

    let mut dense = vec![u32::MAX; n_comp];
    let mut next = 0u32;
    let mut out = vec![0u32; n];
    for i in 0..n {
        let r = region[comp[i]].expect("all components assigned");
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        out[i] = dense[r];
    }
    out
}

/// Sets each cluster's value to the sum of its member pixel intensities.
pub fn realign_labels(
    frame: &GrayFrame,
    labeling: &SuperpixelLabeling,
) -> Result<SuperpixelLabeling> {
    if frame.width() != labeling.width || frame.height() != labeling.height {
        return Err(Error::DimensionMismatch(format!(
            "labeling {}x{} vs frame {}x{}",
            labeling.width,
            labeling.height,
            frame.width(),
            frame.height()
        )));
    }
    let mut sums = vec![0u64; labeling.cluster_count];
    for (&l, &p) in labeling.labels.iter().zip(frame.pixels()) {
        sums[l as usize] += p as u64;
    }
    Ok(SuperpixelLabeling {
        cluster_intensity: sums,
        ..labeling.clone()
    })
}

/// Mask of the `k` clusters with the largest realigned intensity; ties go to
/// the lower cluster id.
pub fn binarize_top_k(labeling: &SuperpixelLabeling, k: usize) -> Result<BinaryMask> {
    if k == 0 || k > labeling.cluster_count {
        return Err(Error::param(
            "k",
            format!("{k} not in 1..={}", labeling.cluster_count),
        ));
    }
    if labeling.cluster_intensity.len() != labeling.cluster_count {
        return Err(Error::param(
            "labeling",
            "cluster intensities not realigned",
        ));
    }
    let mut order: Vec<usize> = (0..labeling.cluster_count).collect();
    order.sort_by(|&a, &b| {
        labeling.cluster_intensity[b]
            .cmp(&labeling.cluster_intensity[a])
            .then(a.cmp(&b))
    });
    let mut selected = vec![false; labeling.cluster_count];
    for &c in &order[..k] {
        selected[c] = true;
    }
    let bits = labeling
        .labels
        .iter()
        .map(|&l| {
            if selected[l as usize] {
                BinaryMask::ON
            } else {
                BinaryMask::OFF
            }
        })
        .collect();
    BinaryMask::new(labeling.width, labeling.height, bits)
}

/// Dice overlap `2|Y ∩ Ŷ| / (|Y| + |Ŷ|)` over 255-valued pixels.
pub fn dice_score(y: &BinaryMask, y_hat: &BinaryMask) -> Result<f64> {
    if y.width() != y_hat.width() || y.height() != y_hat.height() {
        return Err(Error::DimensionMismatch(format!(
            "masks {}x{} and {}x{}",
            y.width(),
            y.height(),
            y_hat.width(),
            y_hat.height()
        )));
    }
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &q) in y.bits().iter().zip(y_hat.bits()) {
        let (p, q) = (p == BinaryMask::ON, q == BinaryMask::ON);
        a += p as usize;
        b += q as usize;
        inter += (p && q) as usize;
    }
    if a + b == 0 {
        return Err(Error::EmptyMasks);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

/// Top-k mask of one frame's ROI, the intermediate the score is computed from.
pub fn roi_prediction(
    frame: &GrayFrame,
    roi: RoiBox,
    params: &SelectionParams,
) -> Result<BinaryMask> {
    let (x, y, w, h) = roi
        .visible(frame.width(), frame.height())
        .ok_or(Error::DegenerateRoi { frame: 0 })?;
    let crop = frame.crop(x, y, w, h)?;
    let clusters = params.target_clusters.min(w * h);
    let labeling = realign_labels(
        &crop,
        &slic_segment(&crop, clusters, params.compactness, params.max_iters)?,
    )?;
    binarize_top_k(&labeling, params.top_k.min(labeling.cluster_count()))
}

/// Scores one frame's ROI against the template.
pub fn score_frame(frame: &GrayFrame, roi: RoiBox, params: &SelectionParams) -> Result<f64> {
    let pred = roi_prediction(frame, roi, params)?;
    let template = make_template(pred.width(), pred.height())?;
    dice_score(&template, &pred)
}

/// Scores every frame and returns the argmax (lowest index on ties) with all scores.
pub fn select_optimal_frame(
    seq: &VideoSequence,
    rois: &[RoiBox],
    params: &SelectionParams,
) -> Result<(usize, Vec<FrameScore>)> {
    params.validate()?;
    if rois.len() != seq.len() {
        return Err(Error::LengthMismatch {
            left: seq.len(),
            right: rois.len(),
        });
    }
    for (i, r) in rois.iter().enumerate() {
        match r.visible(seq.width(), seq.height()) {
            Some((_, _, w, h))
                if w >= crate::imaging::MIN_WIDTH && h >= crate::imaging::MIN_HEIGHT => {}
            _ => return Err(Error::DegenerateRoi { frame: i }),
        }
    }
    let scores: Vec<FrameScore> = seq
        .frames()
        .par_iter()
        .zip(rois.par_iter())
        .enumerate()
        .map(|(i, (frame, roi))| {
            score_frame(frame, *roi, params)
                .map(|dice| FrameScore {
                    frame_index: i,
                    dice,
                })
                .map_err(|e| e.at_stage("frame scoring", i))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for s in &scores {
        if s.dice > scores[best].dice {
            best = s.frame_index;
        }
    }
    Ok((best, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(w: usize, h: usize, seed: u64) -> GrayFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayFrame::from_fn(w, h, |_, _| 0).unwrap();
        let px: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
        GrayFrame::new(w, h, px).unwrap()
    }

    fn is_single_component_per_label(l: &SuperpixelLabeling) -> bool {
        let relabeled = enforce_connectivity(l.width(), l.height(), l.labels());
        // a connected labeling is a fixed point up to renumbering
        let mut map = std::collections::HashMap::new();
        l.labels()
            .iter()
            .zip(&relabeled)
            .all(|(a, b)| *map.entry(*a).or_insert(*b) == *b)
            && relabeled.iter().max() == l.labels().iter().max()
    }

    #[test]
    fn constant_field_splits_on_grid_midlines() {
        let f = GrayFrame::filled(32, 32, 77).unwrap();
        let l = slic_segment(&f, 4, 10.0, 10).unwrap();
        assert_eq!(l.cluster_count(), 4);
        assert!(l.cluster_sizes().iter().all(|&s| s == 256));
        for y in 0..32 {
            for x in 0..32 {
                let q = (y / 16) * 2 + x / 16;
                let expect = l.label(if q % 2 == 0 { 0 } else { 31 }, if q < 2 { 0 } else { 31 });
                assert_eq!(l.label(x, y), expect);
            }
        }
    }

    #[test]
    fn single_cluster() {
        let f = random_frame(20, 15, 1);
        let l = slic_segment(&f, 1, 10.0, 10).unwrap();
        assert_eq!(l.cluster_count(), 1);
        assert!(l.labels().iter().all(|&v| v == 0));
    }

    #[test]
    fn two_tone_clusters_do_not_straddle() {
        let f = GrayFrame::from_fn(32, 32, |x, _| if x < 16 { 0 } else { 255 }).unwrap();
        let l = slic_segment(&f, 8, 0.1, 10).unwrap();
        let mut side = vec![None; l.cluster_count()];
        for y in 0..32 {
            for x in 0..32 {
                let s = x < 16;
                let slot = &mut side[l.label(x, y) as usize];
                assert!(
                    slot.is_none() || *slot == Some(s),
                    "cluster straddles at ({x},{y})"
                );
                *slot = Some(s);
            }
        }
    }

    #[test]
    fn too_many_clusters_rejected() {
        let f = GrayFrame::filled(6, 3, 0).unwrap();
        assert!(slic_segment(&f, 19, 10.0, 5).is_err());
        assert!(slic_segment(&f, 18, 10.0, 5).is_ok());
        assert!(slic_segment(&f, 2, 0.0, 5).is_err());
    }

    #[test]
    fn labels_are_dense_and_connected_on_noise() {
        for seed in 0..5 {
            let f = random_frame(40, 30, seed);
            let l = slic_segment(&f, 12, 5.0, 10).unwrap();
            let sizes = l.cluster_sizes();
            assert!(sizes.iter().all(|&s| s > 0));
            assert!(is_single_component_per_label(&l));
        }
    }

    #[test]
    fn realign_closed_forms() {
        let zero = GrayFrame::filled(16, 16, 0).unwrap();
        let l = realign_labels(&zero, &slic_segment(&zero, 4, 10.0, 5).unwrap()).unwrap();
        assert!(l.cluster_intensity().iter().all(|&v| v == 0));

        let white = GrayFrame::filled(10, 7, 255).unwrap();
        let one = SuperpixelLabeling::from_labels(10, 7, vec![0; 70]).unwrap();
        assert_eq!(
            realign_labels(&white, &one).unwrap().cluster_intensity(),
            &[255 * 70]
        );
    }

    #[test]
    fn realign_matches_accumulation_oracle() {
        let f = random_frame(16, 16, 7);
        let l = realign_labels(&f, &slic_segment(&f, 5, 10.0, 10).unwrap()).unwrap();
        for c in 0..l.cluster_count() {
            let mut expect = 0u64;
            for y in 0..16 {
                for x in 0..16 {
                    if l.label(x, y) == c as u32 {
                        expect += f.get(x, y) as u64;
                    }
                }
            }
            assert_eq!(l.cluster_intensity()[c], expect);
        }
    }

    fn three_cluster_labeling() -> SuperpixelLabeling {
        // columns 0-1 -> 0, 2-3 -> 1, 4-5 -> 2; intensities 10, 30, 20 per cluster
        let labels: Vec<u32> = (0..18).map(|i| ((i % 6) / 2) as u32).collect();
        let l = SuperpixelLabeling::from_labels(6, 3, labels).unwrap();
        SuperpixelLabeling {
            cluster_intensity: vec![10, 30, 20],
            ..l
        }
    }

    #[test]
    fn top_k_selects_argmax_and_everything() {
        let l = three_cluster_labeling();
        let m = binarize_top_k(&l, 1).unwrap();
        for y in 0..3 {
            for x in 0..6 {
                assert_eq!(m.is_on(x, y), (2..4).contains(&x));
            }
        }
        assert_eq!(binarize_top_k(&l, 3).unwrap().count_on(), 18);
        assert!(binarize_top_k(&l, 0).is_err());
        assert!(binarize_top_k(&l, 4).is_err());
    }

    #[test]
    fn top_k_ties_prefer_lower_id() {
        let l = SuperpixelLabeling {
            cluster_intensity: vec![5, 9, 9],
            ..three_cluster_labeling()
        };
        let m = binarize_top_k(&l, 1).unwrap();
        assert!(m.is_on(2, 0) && !m.is_on(4, 0));
    }

    #[test]
    fn top_k_matches_sort_oracle() {
        let f = random_frame(24, 24, 11);
        let l = realign_labels(&f, &slic_segment(&f, 12, 10.0, 10).unwrap()).unwrap();
        let k = 5.min(l.cluster_count());
        let mut keyed: Vec<(u64, i64)> = l
            .cluster_intensity()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, -(i as i64)))
            .collect();
        keyed.sort_unstable_by(|a, b| b.cmp(a));
        let chosen: Vec<u32> = keyed[..k].iter().map(|&(_, id)| (-id) as u32).collect();
        let m = binarize_top_k(&l, k).unwrap();
        let sizes = l.cluster_sizes();
        for (i, &lab) in l.labels().iter().enumerate() {
            assert_eq!(m.bits()[i] == 255, chosen.contains(&lab));
        }
        let expected_area: usize = chosen.iter().map(|&c| sizes[c as usize]).sum();
        assert_eq!(m.count_on(), expected_area);
    }

    #[test]
    fn dice_examples() {
        let a = BinaryMask::from_predicate(4, 2, |x, _| x < 2);
        assert_eq!(dice_score(&a, &a).unwrap(), 1.0);
        let b = BinaryMask::from_predicate(4, 2, |x, _| x >= 2);
        assert_eq!(dice_score(&a, &b).unwrap(), 0.0);
        // |Y| = 4, |Y^| = 4, overlap 2
        let c = BinaryMask::from_predicate(4, 2, |x, _| (1..3).contains(&x));
        assert_eq!(dice_score(&a, &c).unwrap(), 0.5);
        let e = BinaryMask::empty(4, 2);
        assert!(matches!(dice_score(&e, &e), Err(Error::EmptyMasks)));
        assert!(dice_score(&a, &BinaryMask::empty(2, 4)).is_err());
    }

    #[test]
    fn identical_frames_tie_to_first() {
        let f = random_frame(40, 30, 3);
        let seq = VideoSequence::new(vec![f.clone(), f.clone(), f], None).unwrap();
        let roi = RoiBox::new(0, 0, 40, 30).unwrap();
        let (best, scores) =
            select_optimal_frame(&seq, &[roi; 3], &SelectionParams::default()).unwrap();
        assert_eq!(best, 0);
        assert!(scores.iter().all(|s| s.dice == scores[0].dice));
    }

    #[test]
    fn singleton_sequence() {
        let seq = VideoSequence::new(vec![random_frame(30, 30, 9)], None).unwrap();
        let roi = RoiBox::new(0, 0, 30, 30).unwrap();
        let (best, scores) =
            select_optimal_frame(&seq, &[roi], &SelectionParams::default()).unwrap();
        assert_eq!((best, scores.len()), (0, 1));
    }

    #[test]
    fn degenerate_roi_names_frame() {
        let f = random_frame(30, 30, 9);
        let seq = VideoSequence::new(vec![f.clone(), f], None).unwrap();
        let good = RoiBox::new(0, 0, 30, 30).unwrap();
        let off = RoiBox::new(40, 40, 10, 10).unwrap();
        match select_optimal_frame(&seq, &[good, off], &SelectionParams::default()) {
            Err(Error::DegenerateRoi { frame }) => assert_eq!(frame, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_labelings_connected_via_prop() {
        use proptest::prelude::*;
        proptest!(ProptestConfig::with_cases(24), |(seed in 0u64..1000, k in 1usize..20)| {
            let f = random_frame(20, 16, seed);
            let l = slic_segment(&f, k, 10.0, 5).unwrap();
            prop_assert!(l.cluster_sizes().iter().all(|&s| s > 0));
            prop_assert!(is_single_component_per_label(&l));
        });
    }
}
