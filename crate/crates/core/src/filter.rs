//! Separable Gaussian smoothing with symmetric (reflect) boundary handling.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Grid;

/// Normalised Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = libm::ceil(3.0 * sigma) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / denom))
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

/// Maps any integer coordinate into `0..n` by mirroring about the edges
/// (`d c b a | a b c d | d c b a`). Works for offsets larger than `n`.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Convolves every row of a `w`-wide buffer, writing the result transposed.
fn convolve_rows_transposed(src: &[f64], w: usize, h: usize, taps: &[f64], out: &mut [f64]) {
    let radius = (taps.len() / 2) as isize;
    let mut padded = vec![0.0; w + taps.len() - 1];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[reflect_index(i as isize - radius, w)];
        }
        for x in 0..w {
            let mut acc = 0.0;
            for (&t, &v) in taps.iter().zip(&padded[x..]) {
                acc += t * v;
            }
            out[x * h + y] = acc;
        }
    }
}

/// Convolves with `taps` along x and then along y.
pub fn convolve_separable(input: &Grid<f64>, taps: &[f64]) -> Grid<f64> {
    let (w, h) = (input.width(), input.height());
    let mut tmp = vec![0.0; w * h];
    convolve_rows_transposed(input.as_slice(), w, h, taps, &mut tmp);
    let mut out = vec![0.0; w * h];
    convolve_rows_transposed(&tmp, h, w, taps, &mut out);
    Grid::from_vec(w, h, out).expect("same shape")
}

pub fn gaussian_blur(input: &Grid<f64>, sigma: f64) -> Grid<f64> {
    if sigma <= 0.0 {
        return input.clone();
    }
    convolve_separable(input, &gaussian_kernel(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn reflect_mirrors_edges() {
        let idx: Vec<usize> = (-4..7).map(|i| reflect_index(i, 3)).collect();
        assert_eq!(idx, vec![2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0]);
    }

    #[test]
    fn blur_preserves_constants() {
        let g = Grid::filled(5, 4, 0.7);
        let b = gaussian_blur(&g, 10.0);
        assert!(b.as_slice().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let g = Grid::from_fn(3, 3, |x, y| (x * 3 + y) as f64);
        assert_eq!(gaussian_blur(&g, 0.0), g);
    }
}
