//! Orthonormal 2-D DCT-II and its inverse (DCT-III), applied per channel.
//!
//! The separable path multiplies by precomputed cosine bases, rows first and then
//! columns, accumulating in `f64`. [`dct2_naive`] evaluates the defining double sum
//! directly and exists to check the fast path.

use std::f64::consts::PI;

use crate::tensor::Tensor;

/// Orthonormal DCT-II basis for length `n`, `basis[u * n + i] = a(u) cos(pi (2i+1) u / 2n)`.
fn basis(n: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(n * n);
    for u in 0..n {
        let a = if u == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            b.push(a * (PI * (2 * i + 1) as f64 * u as f64 / (2 * n) as f64).cos());
        }
    }
    b
}

/// Cached bases for one `height × width` plane size.
#[derive(Clone, Debug)]
pub struct Dct2d {
    height: usize,
    width: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl Dct2d {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            rows: basis(height),
            cols: basis(width),
        }
    }

    fn transform_plane(&self, src: &[f32], dst: &mut [f32], inverse: bool) {
        let (h, w) = (self.height, self.width);
        // Along each row (index j -> v), then along each column (i -> u).
        let mut tmp = vec![0f64; h * w];
        for i in 0..h {
            let row = &src[i * w..(i + 1) * w];
            for v in 0..w {
                let mut acc = 0.0;
                for (j, &x) in row.iter().enumerate() {
                    let c = if inverse {
                        self.cols[j * w + v]
                    } else {
                        self.cols[v * w + j]
                    };
                    acc += c * f64::from(x);
                }
                tmp[i * w + v] = acc;
            }
        }
        let mut col = vec![0f64; h];
        for v in 0..w {
            for (i, c) in col.iter_mut().enumerate() {
                *c = tmp[i * w + v];
            }
            for u in 0..h {
                let mut acc = 0.0;
                for (i, &x) in col.iter().enumerate() {
                    let c = if inverse {
                        self.rows[i * h + u]
                    } else {
                        self.rows[u * h + i]
                    };
                    acc += c * x;
                }
                dst[u * w + v] = acc as f32;
            }
        }
    }

    fn apply(&self, x: &Tensor, inverse: bool) -> Tensor {
        assert_eq!(
            (x.height(), x.width()),
            (self.height, self.width),
            "dct plan size mismatch"
        );
        let mut out = Tensor::zeros(x.channels(), self.height, self.width);
        for c in 0..x.channels() {
            self.transform_plane(x.plane(c), out.plane_mut(c), inverse);
        }
        out
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        self.apply(x, false)
    }

    pub fn inverse(&self, x: &Tensor) -> Tensor {
        self.apply(x, true)
    }
}

/// Per-channel orthonormal 2-D DCT-II.
pub fn dct2(x: &Tensor) -> Tensor {
    Dct2d::new(x.height(), x.width()).forward(x)
}

/// Per-channel orthonormal 2-D DCT-III, the exact inverse of [`dct2`].
pub fn idct2(x: &Tensor) -> Tensor {
    Dct2d::new(x.height(), x.width()).inverse(x)
}

/// The defining quadruple loop, in `f64`. Output is channel-major like [`Tensor`].
pub fn dct2_naive_f64(x: &Tensor) -> Vec<f64> {
    let (ch, h, w) = x.shape();
    let a = |k: usize, n: usize| {
        if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        }
    };
    let mut out = vec![0f64; ch * h * w];
    for c in 0..ch {
        for u in 0..h {
            for v in 0..w {
                let mut acc = 0.0;
                for i in 0..h {
                    for j in 0..w {
                        acc += f64::from(x.get(c, i, j))
                            * (PI * (2 * i + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                            * (PI * (2 * j + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                    }
                }
                out[(c * h + u) * w + v] = a(u, h) * a(v, w) * acc;
            }
        }
    }
    out
}

pub fn dct2_naive(x: &Tensor) -> Tensor {
    let (c, h, w) = x.shape();
    let data = dct2_naive_f64(x).into_iter().map(|v| v as f32).collect();
    Tensor::from_vec(c, h, w, data).expect("same shape")
}
