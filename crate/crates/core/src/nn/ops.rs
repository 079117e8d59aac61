//! Dense kernels for 3x3 / stride 2 / padding 1 convolutions via im2col.
//! All reductions run in a fixed order so results are reproducible.
//!
//! Column matrices are `[c * 9, ld]` with one sample occupying `out_side²`
//! consecutive columns, so a whole batch can share one matrix.

use super::arch::KERNEL;
use super::Real;

/// Unfolds one `[c, side, side]` input into rows of `col` spaced `ld` apart.
pub(crate) fn im2col<T: Real>(input: &[T], channels: usize, side: usize, out_side: usize, col: &mut [T], ld: usize) {
    let plane = out_side * out_side;
    for c in 0..channels {
        let src = &input[c * side * side..(c + 1) * side * side];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut col[((c * KERNEL + ky) * KERNEL + kx) * ld..][..plane];
                for oy in 0..out_side {
                    let y = (2 * oy + ky) as isize - 1;
                    let dst = &mut row[oy * out_side..(oy + 1) * out_side];
                    if y < 0 || y as usize >= side {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let line = &src[y as usize * side..(y as usize + 1) * side];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let x = (2 * ox + kx) as isize - 1;
                        *d = if x < 0 || x as usize >= side {
                            T::zero()
                        } else {
                            line[x as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into `[c, side, side]`.
pub(crate) fn col2im_add<T: Real>(col: &[T], channels: usize, side: usize, out_side: usize, grad: &mut [T], ld: usize) {
    let plane = out_side * out_side;
    for c in 0..channels {
        let dst = &mut grad[c * side * side..(c + 1) * side * side];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &col[((c * KERNEL + ky) * KERNEL + kx) * ld..][..plane];
                for oy in 0..out_side {
                    let y = (2 * oy + ky) as isize - 1;
                    if y < 0 || y as usize >= side {
                        continue;
                    }
                    let line = &mut dst[y as usize * side..(y as usize + 1) * side];
                    for ox in 0..out_side {
                        let x = (2 * ox + kx) as isize - 1;
                        if x >= 0 && (x as usize) < side {
                            line[x as usize] += row[oy * out_side + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Dot product with four interleaved accumulators.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut tail = T::zero();
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Column block width; keeps four output rows of a block in L1.
const BLOCK: usize = 256;

/// `out[rows × n] += w[rows × k] · col[k × n]`.
pub(crate) fn matmul_acc<T: Real>(w: &[T], col: &[T], out: &mut [T], rows: usize, k: usize, n: usize) {
    let mut p0 = 0;
    while p0 < n {
        let len = BLOCK.min(n - p0);
        let mut r = 0;
        while r + 4 <= rows {
            let (o0, rest) = out[r * n..(r + 4) * n].split_at_mut(n);
            let (o1, rest) = rest.split_at_mut(n);
            let (o2, o3) = rest.split_at_mut(n);
            let (o0, o1, o2, o3) = (
                &mut o0[p0..p0 + len],
                &mut o1[p0..p0 + len],
                &mut o2[p0..p0 + len],
                &mut o3[p0..p0 + len],
            );
            for j in 0..k {
                let x = &col[j * n + p0..j * n + p0 + len];
                let (a, b, c, d) = (w[r * k + j], w[(r + 1) * k + j], w[(r + 2) * k + j], w[(r + 3) * k + j]);
                for ((((v0, v1), v2), v3), &xv) in o0.iter_mut().zip(o1.iter_mut()).zip(o2.iter_mut()).zip(o3.iter_mut()).zip(x) {
                    *v0 += a * xv;
                    *v1 += b * xv;
                    *v2 += c * xv;
                    *v3 += d * xv;
                }
            }
            r += 4;
        }
        for r in r..rows {
            let dst = &mut out[r * n + p0..r * n + p0 + len];
            for j in 0..k {
                let wv = w[r * k + j];
                for (v, &xv) in dst.iter_mut().zip(&col[j * n + p0..j * n + p0 + len]) {
                    *v += wv * xv;
                }
            }
        }
        p0 += len;
    }
}

/// `dw[rows × k] += dout[rows × n] · col[k × n]ᵀ`.
pub(crate) fn matmul_grad_weight<T: Real>(dout: &[T], col: &[T], dw: &mut [T], rows: usize, k: usize, n: usize) {
    for r in 0..rows {
        let g = &dout[r * n..(r + 1) * n];
        for j in 0..k {
            dw[r * k + j] += dot(g, &col[j * n..(j + 1) * n]);
        }
    }
}

/// `dcol[k × n] = w[rows × k]ᵀ · dout[rows × n]`.
pub(crate) fn matmul_grad_input<T: Real>(w: &[T], dout: &[T], dcol: &mut [T], rows: usize, k: usize, n: usize) {
    dcol.iter_mut().for_each(|v| *v = T::zero());
    let mut p0 = 0;
    while p0 < n {
        let len = BLOCK.min(n - p0);
        for j in 0..k {
            let dst = &mut dcol[j * n + p0..j * n + p0 + len];
            let mut r = 0;
            while r + 4 <= rows {
                let (a, b, c, d) = (w[r * k + j], w[(r + 1) * k + j], w[(r + 2) * k + j], w[(r + 3) * k + j]);
                let g0 = &dout[r * n + p0..r * n + p0 + len];
                let g1 = &dout[(r + 1) * n + p0..(r + 1) * n + p0 + len];
                let g2 = &dout[(r + 2) * n + p0..(r + 2) * n + p0 + len];
                let g3 = &dout[(r + 3) * n + p0..(r + 3) * n + p0 + len];
                for ((((v, &x0), &x1), &x2), &x3) in dst.iter_mut().zip(g0).zip(g1).zip(g2).zip(g3) {
                    *v += a * x0 + b * x1 + c * x2 + d * x3;
                }
                r += 4;
            }
            for r in r..rows {
                let wv = w[r * k + j];
                for (v, &x) in dst.iter_mut().zip(&dout[r * n + p0..r * n + p0 + len]) {
                    *v += wv * x;
                }
            }
        }
        p0 += len;
    }
}
