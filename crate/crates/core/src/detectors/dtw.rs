//! Dependent multivariate dynamic time warping.

use super::DetectorError;
use crate::preprocess::Series;

fn rows(s: &Series) -> Vec<f64> {
    let (len, m) = s.shape();
    let mut out = Vec::with_capacity(len * m);
    for t in 0..len {
        for c in 0..m {
            out.push(s.get(t, c));
        }
    }
    out
}

/// Sum of Euclidean row distances along the cheapest monotone alignment.
/// `band` is an optional Sakoe-Chiba width as a fraction of the longer
/// series; the band is never narrower than the length difference.
pub fn dtw_distance(a: &Series, b: &Series, band: Option<f64>) -> Result<f64, DetectorError> {
    if a.n_channels() != b.n_channels() {
        return Err(DetectorError::ChannelMismatch {
            left: a.n_channels(),
            right: b.n_channels(),
        });
    }
    if let Some(f) = band {
        if !(f > 0.0 && f <= 1.0) {
            return Err(DetectorError::InvalidConfig(format!("dtw band {f} outside (0, 1]")));
        }
    }
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(DetectorError::InvalidConfig("dtw on empty series".into()));
    }
    let width = band.map(|f| {
        let w = (f * n.max(m) as f64).ceil() as usize;
        w.max(n.abs_diff(m))
    });
    let ch = a.n_channels();
    let ra = rows(a);
    let rb = rows(b);
    let cost = |i: usize, j: usize| -> f64 {
        let x = &ra[i * ch..(i + 1) * ch];
        let y = &rb[j * ch..(j + 1) * ch];
        x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    };

    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let (lo, hi) = match width {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        for j in lo..=hi {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = cost(i - 1, j - 1) + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}
