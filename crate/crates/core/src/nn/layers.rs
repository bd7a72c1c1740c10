//! 3x3, stride-2, zero-padded convolution in channel-major layout.

pub(crate) const K: usize = 3;
pub(crate) const STRIDE: usize = 2;

#[inline]
pub(crate) fn out_dim(n: usize) -> usize {
    // pad 1 on both sides
    (n + 2 - K) / STRIDE + 1
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvShape {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
}

impl ConvShape {
    pub fn out_h(&self) -> usize {
        out_dim(self.in_h)
    }

    pub fn out_w(&self) -> usize {
        out_dim(self.in_w)
    }

    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * K * K
    }

    pub fn out_len(&self) -> usize {
        self.out_c * self.out_h() * self.out_w()
    }
}

/// Pre-activation output of the convolution.
pub(crate) fn conv_forward(s: ConvShape, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut out = vec![0.0; s.out_len()];
    for oc in 0..s.out_c {
        let plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        plane.iter_mut().for_each(|v| *v = bias[oc]);
        for ic in 0..s.in_c {
            let inp = &input[ic * s.in_h * s.in_w..(ic + 1) * s.in_h * s.in_w];
            let w = &weight[(oc * s.in_c + ic) * K * K..(oc * s.in_c + ic + 1) * K * K];
            for ki in 0..K {
                for kj in 0..K {
                    let wv = w[ki * K + kj];
                    for y in 0..oh {
                        let iy = (y * STRIDE + ki) as isize - 1;
                        if iy < 0 || iy >= s.in_h as isize {
                            continue;
                        }
                        let row = &inp[iy as usize * s.in_w..(iy as usize + 1) * s.in_w];
                        let orow = &mut plane[y * ow..(y + 1) * ow];
                        for (x, o) in orow.iter_mut().enumerate() {
                            let ix = (x * STRIDE + kj) as isize - 1;
                            if ix >= 0 && (ix as usize) < s.in_w {
                                *o += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulate weight and bias gradients; optionally return the input
/// gradient.
pub(crate) fn conv_backward(
    s: ConvShape,
    input: &[f64],
    weight: &[f64],
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut dinput = if want_input { Some(vec![0.0; s.in_c * s.in_h * s.in_w]) } else { None };
    for oc in 0..s.out_c {
        let plane = &dout[oc * oh * ow..(oc + 1) * oh * ow];
        dbias[oc] += plane.iter().sum::<f64>();
        for ic in 0..s.in_c {
            let inp = &input[ic * s.in_h * s.in_w..(ic + 1) * s.in_h * s.in_w];
            let widx = (oc * s.in_c + ic) * K * K;
            for ki in 0..K {
                for kj in 0..K {
                    let wv = weight[widx + ki * K + kj];
                    let mut acc = 0.0;
                    for y in 0..oh {
                        let iy = (y * STRIDE + ki) as isize - 1;
                        if iy < 0 || iy >= s.in_h as isize {
                            continue;
                        }
                        let iy = iy as usize;
                        for x in 0..ow {
                            let ix = (x * STRIDE + kj) as isize - 1;
                            if ix < 0 || ix as usize >= s.in_w {
                                continue;
                            }
                            let g = plane[y * ow + x];
                            acc += g * inp[iy * s.in_w + ix as usize];
                            if let Some(d) = dinput.as_mut() {
                                d[ic * s.in_h * s.in_w + iy * s.in_w + ix as usize] += g * wv;
                            }
                        }
                    }
                    dweight[widx + ki * K + kj] += acc;
                }
            }
        }
    }
    dinput
}
