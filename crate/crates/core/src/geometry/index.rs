//! Static k-d tree for nearest-point queries on large point clouds.

#[derive(Debug, Clone)]
pub struct KdTree {
    k: usize,
    points: Vec<f64>,
    axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec<f64>]) -> Self {
        let k = points.first().map_or(0, |p| p.len());
        let mut pts: Vec<Vec<f64>> = points.to_vec();
        let mut axis = vec![0u8; pts.len()];
        build(&mut pts, &mut axis, 0, k);
        KdTree {
            k,
            points: pts.into_iter().flatten().collect(),
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    /// Squared distance to the nearest stored point.
    pub fn nearest_sq(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        self.search(x, 0, self.len(), &mut best);
        best
    }

    fn search(&self, x: &[f64], lo: usize, hi: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.point(mid);
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < *best {
            *best = d2;
        }
        let ax = self.axis[mid] as usize;
        let diff = x[ax] - p[ax];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(x, near.0, near.1, best);
        if diff * diff < *best {
            self.search(x, far.0, far.1, best);
        }
    }
}

fn build(pts: &mut [Vec<f64>], axis: &mut [u8], depth: usize, k: usize) {
    if pts.len() <= 1 {
        return;
    }
    let mut ax = depth % k;
    let mut spread = -1.0;
    for a in 0..k {
        let (mn, mx) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), p| {
                (mn.min(p[a]), mx.max(p[a]))
            });
        if mx - mn > spread {
            spread = mx - mn;
            ax = a;
        }
    }
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[ax].total_cmp(&b[ax]));
    axis[mid] = ax as u8;
    let (lp, rp) = pts.split_at_mut(mid);
    let (la, ra) = axis.split_at_mut(mid);
    build(lp, la, depth + 1, k);
    build(&mut rp[1..], &mut ra[1..], depth + 1, k);
}
