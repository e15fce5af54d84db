//! Brute-force metric definitions.

/// Class order for one sample: score descending, id ascending.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    // insertion sort with an explicit comparison, no library tie rules
    for i in 1..ids.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (ids[j - 1], ids[j]);
            let b_first = scores[b] > scores[a] || (scores[b] == scores[a] && b < a);
            if !b_first {
                break;
            }
            ids.swap(j - 1, j);
            j -= 1;
        }
    }
    ids
}

pub fn top_k(samples: &[(Vec<f64>, usize)], k: usize) -> f64 {
    let hits = samples.iter().filter(|(s, t)| ranking(s).iter().take(k).any(|c| c == t)).count();
    hits as f64 / samples.len() as f64
}

pub fn balanced_accuracy(samples: &[(Vec<f64>, usize)], n_classes: usize) -> f64 {
    let mut recalls = Vec::new();
    for c in 0..n_classes {
        let of_c: Vec<_> = samples.iter().filter(|(_, t)| *t == c).collect();
        if of_c.is_empty() {
            continue;
        }
        let right = of_c.iter().filter(|(s, _)| ranking(s)[0] == c).count();
        recalls.push(right as f64 / of_c.len() as f64);
    }
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

/// Interpolated AP: mean over recall levels j/P of the best precision at
/// any cut-off reaching that recall.
pub fn average_precision(relevant: &[bool], positives: usize) -> f64 {
    if positives == 0 {
        return 0.0;
    }
    let mut points = Vec::new();
    let mut hits = 0;
    for (i, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
        }
        points.push((hits as f64 / positives as f64, hits as f64 / (i + 1) as f64));
    }
    (1..=positives)
        .map(|j| {
            let level = j as f64 / positives as f64;
            points.iter().filter(|(r, _)| *r >= level - 1e-12).map(|(_, p)| *p).fold(0.0, f64::max)
        })
        .sum::<f64>()
        / positives as f64
}

pub fn class_mean_ap(samples: &[(Vec<f64>, usize)], n_classes: usize) -> f64 {
    let mut aps = Vec::new();
    for c in 0..n_classes {
        let positives = samples.iter().filter(|(_, t)| *t == c).count();
        if positives == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (samples[a].0[c], samples[b].0[c]);
            sb.partial_cmp(&sa).unwrap().then(a.cmp(&b))
        });
        let rel: Vec<bool> = order.iter().map(|&i| samples[i].1 == c).collect();
        aps.push(average_precision(&rel, positives));
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

pub type Rect = (f64, f64, f64, f64);

pub fn iou(a: Rect, b: Rect) -> f64 {
    let ix = ((a.0 + a.2).min(b.0 + b.2) - a.0.max(b.0)).max(0.0);
    let iy = ((a.1 + a.3).min(b.1 + b.3) - a.1.max(b.1)).max(0.0);
    let inter = ix * iy;
    let union = a.2 * a.3 + b.2 * b.3 - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// One image: predictions `(box, class, confidence)` and truths `(box, class)`.
pub struct Image {
    pub preds: Vec<(Rect, u32, f64)>,
    pub truths: Vec<(Rect, u32)>,
}

/// mAP at one threshold; returns `None` when no class has ground truth.
pub fn map_at(images: &[Image], thr: f64) -> Option<f64> {
    let mut classes: Vec<u32> = images.iter().flat_map(|im| im.truths.iter().map(|t| t.1)).collect();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return None;
    }
    let mut aps = Vec::new();
    for &c in &classes {
        let positives = images.iter().flat_map(|im| &im.truths).filter(|t| t.1 == c).count();
        // all predictions of the class, globally ordered
        let mut preds: Vec<(f64, usize, usize)> = Vec::new();
        for (i, im) in images.iter().enumerate() {
            for (k, p) in im.preds.iter().enumerate() {
                if p.1 == c {
                    preds.push((p.2, i, k));
                }
            }
        }
        preds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut used: Vec<(usize, usize)> = Vec::new();
        let mut rel = Vec::new();
        for &(_, i, k) in &preds {
            let pbox = images[i].preds[k].0;
            let mut best: Option<(usize, f64)> = None;
            for (g, t) in images[i].truths.iter().enumerate() {
                if t.1 != c || used.contains(&(i, g)) {
                    continue;
                }
                let o = iou(pbox, t.0);
                if o < thr {
                    continue;
                }
                match best {
                    Some((_, b)) if b >= o => {}
                    _ => best = Some((g, o)),
                }
            }
            match best {
                Some((g, _)) => {
                    used.push((i, g));
                    rel.push(true);
                }
                None => rel.push(false),
            }
        }
        aps.push(average_precision(&rel, positives));
    }
    Some(aps.iter().sum::<f64>() / aps.len() as f64)
}
