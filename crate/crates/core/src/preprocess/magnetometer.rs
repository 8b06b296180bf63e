//! Heading-bias removal for the magnetometer stream.

use super::filter::Butterworth;
use super::PreprocessError;

/// Centers each axis on its sequence mean, normalizes every 3-vector to unit
/// length (zero vectors pass through), takes first-order differences and
/// prepends a zero row so the output keeps the input length.
pub fn debias_magnetometer(mag: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let unit = center_and_normalize(mag);
    difference(&unit)
}

/// The conditioning used by the pipeline: like [`debias_magnetometer`] but
/// with the low-pass filter applied between normalization and differencing.
pub fn condition_magnetometer(
    mag: &[[f64; 3]],
    filter: Option<&Butterworth>,
) -> Result<Vec<[f64; 3]>, PreprocessError> {
    let mut unit = center_and_normalize(mag);
    if let Some(filter) = filter {
        for axis in 0..3 {
            let col: Vec<f64> = unit.iter().map(|v| v[axis]).collect();
            let filtered = filter.filtfilt(&col)?;
            for (row, v) in unit.iter_mut().zip(filtered) {
                row[axis] = v;
            }
        }
    }
    Ok(difference(&unit))
}

fn center_and_normalize(mag: &[[f64; 3]]) -> Vec<[f64; 3]> {
    if mag.is_empty() {
        return Vec::new();
    }
    let n = mag.len() as f64;
    let mut mean = [0.0; 3];
    for v in mag {
        for a in 0..3 {
            mean[a] += v[a];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    mag.iter()
        .map(|v| {
            let c = [v[0] - mean[0], v[1] - mean[1], v[2] - mean[2]];
            let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            if norm > 0.0 {
                [c[0] / norm, c[1] / norm, c[2] / norm]
            } else {
                c
            }
        })
        .collect()
}

fn difference(v: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(v.len());
    if v.is_empty() {
        return out;
    }
    out.push([0.0; 3]);
    for w in v.windows(2) {
        out.push([w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_gives_zeros() {
        let out = debias_magnetometer(&[[20.0, -5.0, 40.0]; 6]);
        assert_eq!(out, vec![[0.0; 3]; 6]);
    }

    #[test]
    fn four_row_hand_computation() {
        // mean = (1, 1, 0); centered rows: (1,0,0), (0,-2,0), (-1,0,0), (0,2,0)
        // unit rows: (1,0,0), (0,-1,0), (-1,0,0), (0,1,0)
        // diffs: (-1,-1,0), (-1,1,0), (1,1,0)
        let mag = [[2.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 3.0, 0.0]];
        let out = debias_magnetometer(&mag);
        let expected = [
            [0.0, 0.0, 0.0],
            [-1.0, -1.0, 0.0],
            [-1.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        for (o, e) in out.iter().zip(expected) {
            for a in 0..3 {
                assert!((o[a] - e[a]).abs() < 1e-15, "{out:?}");
            }
        }
    }

    #[test]
    fn offset_invariant() {
        let mag: Vec<[f64; 3]> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.1;
                [30.0 * t.cos(), 12.0 * t.sin(), -40.0 + t]
            })
            .collect();
        let shifted: Vec<[f64; 3]> = mag
            .iter()
            .map(|v| [v[0] + 17.0, v[1] - 250.0, v[2] + 3.5])
            .collect();
        let a = debias_magnetometer(&mag);
        let b = debias_magnetometer(&shifted);
        for (x, y) in a.iter().zip(&b) {
            for k in 0..3 {
                assert!((x[k] - y[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_vector_passes_through() {
        // Centered middle row is exactly zero.
        let out = debias_magnetometer(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
        assert_eq!(out, vec![[0.0; 3], [-1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
    }
}
