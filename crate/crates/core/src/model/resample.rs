use crate::Scalar;

/// Area-average resampling of a square interleaved RGB image.
///
/// Each output pixel averages the source area it covers, weighting partially
/// covered source pixels by their overlap. Equal sizes copy the input.
pub fn area_resample<T: Scalar>(pixels: &[T], side_in: usize, side_out: usize) -> Vec<T> {
    if side_in == side_out {
        return pixels.to_vec();
    }
    let weights = overlap_weights::<T>(side_in, side_out);
    // rows first: side_out x side_in x 3
    let mut tmp = vec![T::zero(); side_out * side_in * 3];
    for (oy, row_w) in weights.iter().enumerate() {
        for &(iy, w) in row_w {
            let src = &pixels[iy * side_in * 3..(iy + 1) * side_in * 3];
            let dst = &mut tmp[oy * side_in * 3..(oy + 1) * side_in * 3];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    let mut out = vec![T::zero(); side_out * side_out * 3];
    for oy in 0..side_out {
        for (ox, col_w) in weights.iter().enumerate() {
            for &(ix, w) in col_w {
                for b in 0..3 {
                    out[(oy * side_out + ox) * 3 + b] += w * tmp[(oy * side_in + ix) * 3 + b];
                }
            }
        }
    }
    out
}

/// For every output index, the source indices it overlaps and their
/// normalized weights.
fn overlap_weights<T: Scalar>(side_in: usize, side_out: usize) -> Vec<Vec<(usize, T)>> {
    let scale = side_in as f64 / side_out as f64;
    (0..side_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(side_in);
            (first..last)
                .filter_map(|i| {
                    let overlap = hi.min((i + 1) as f64) - lo.max(i as f64);
                    (overlap > 0.0).then(|| (i, T::of(overlap / scale)))
                })
                .collect()
        })
        .collect()
}
